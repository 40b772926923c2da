use std::path::{Path, PathBuf};

use asl_core::config::Experiment;
use asl_core::exponent::{error_exponent, ExponentOptions};
use asl_core::lmgf::classify_agents;
use asl_core::network::{self, PERRON_MAX_ITER, PERRON_TOL};
use asl_core::presets;
use asl_core::simulate::{estimate_error_prob, run_replication, SimulationConfig, TruthChange};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_load_and_round_trip() {
    for name in ["illustrative.json", "noisy_gaussian.json", "laplace.json"] {
        let exp = Experiment::load(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = asl_core::config::ExperimentConfig::from_json(&exp.config.to_json()).unwrap();
        assert_eq!(again, exp.config, "{name}");
        classify_agents(exp.task(), &exp.config.classify).unwrap();
    }
}

#[test]
fn gaussian_config_reproduces_the_preset() {
    let exp = Experiment::load(&config("noisy_gaussian.json")).unwrap();
    let preset = presets::noisy_gaussian_task().unwrap();
    let pi = exp.perron_vector().unwrap();
    let a = error_exponent(exp.task(), &pi, &ExponentOptions::default()).unwrap();
    let b = error_exponent(&preset, &pi, &ExponentOptions::default()).unwrap();
    assert!((a.phi.unwrap() - b.phi.unwrap()).abs() < 1e-9);
    assert!((a.phi.unwrap() - 0.0173864).abs() < 1e-6);
}

#[test]
fn laplace_config_combination_has_its_perron_vector() {
    let exp = Experiment::load(&config("laplace.json")).unwrap();
    let a = exp.combination().unwrap();
    assert_eq!(a.support(), *exp.adjacency());
    let pi = network::perron_eigenvector(&a, PERRON_TOL, PERRON_MAX_ITER).unwrap();
    let api = a.apply(pi.as_slice());
    for (x, y) in api.iter().zip(pi.as_slice()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn network_tracks_a_change_of_truth() {
    let task = presets::laplace_task().unwrap();
    let a = network::uniform_averaging(&asl_core::Adjacency::complete(10).unwrap()).unwrap();
    let mut cfg = SimulationConfig::stationary(0.05, 600, 200, 3);
    cfg.truth_schedule = vec![TruthChange { start: 0, truth: 0 }, TruthChange { start: 300, truth: 2 }];
    let curve = estimate_error_prob(&task, &a, &cfg).unwrap();
    let at = |i: usize| curve.average[curve.steps.iter().position(|&s| s == i).unwrap()];
    assert!(at(299) < 0.2, "{}", at(299));
    // Right after the switch the network still believes the old truth.
    assert!(at(305) > 0.5, "{}", at(305));
    assert!(at(600) < 0.2, "{}", at(600));

    let r = run_replication(&task, &a, &cfg, 0).unwrap();
    assert_eq!(r.truth[0], 0);
    assert_eq!(*r.truth.last().unwrap(), 2);
}
