//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The `*_json` functions hold the logic and are
//! plain Rust, which keeps them testable off the browser.

use asl_core::design::{optimal_design, DesignOptions};
use asl_core::exponent::{error_exponent, network_phi, ExponentOptions, INTEGRATION_TOL};
use asl_core::network::matrix_from_eigenvector;
use asl_core::presets::{gaussian_group_agents, GaussianGroup};
use asl_core::simulate::{run_replication, SimulationConfig};
use asl_core::{Adjacency, LearningTask, PerronVector};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Horizon cap so a click cannot freeze the tab.
pub const MAX_DEMO_STEPS: usize = 20_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Group {
    pub count: usize,
    pub means: [f64; 3],
    pub variance: f64,
    #[serde(default)]
    pub noise_level: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Design,
    Uniform,
}

fn task(groups_json: &str) -> Result<LearningTask, String> {
    let groups: Vec<Group> = serde_json::from_str(groups_json).map_err(|e| format!("groups: {e}"))?;
    if groups.is_empty() {
        return Err("at least one group is required".into());
    }
    let groups: Vec<GaussianGroup> = groups
        .iter()
        .map(|g| GaussianGroup { count: g.count, means: g.means, variance: g.variance, noise_level: g.noise_level })
        .collect();
    let agents = gaussian_group_agents(&groups).map_err(|e| e.to_string())?;
    LearningTask::from_agents(agents).map_err(|e| e.to_string())
}

fn weights(task: &LearningTask, weighting: &str) -> Result<PerronVector, String> {
    let w: Weighting = serde_json::from_value(serde_json::Value::String(weighting.into()))
        .map_err(|_| format!("unknown weighting {weighting:?}"))?;
    match w {
        Weighting::Uniform => Ok(PerronVector::uniform(task.num_agents())),
        Weighting::Design => optimal_design(task, &DesignOptions::default()).map(|d| d.pi).map_err(|e| e.to_string()),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo output serializes")
}

#[derive(Serialize)]
struct DesignOut {
    pi: Vec<f64>,
    theta_dagger: usize,
    status: String,
    achieved_exponent: f64,
    upper_bound: f64,
    uniform_exponent: Option<f64>,
    phi_theta: Vec<Option<f64>>,
}

pub fn design_json(groups_json: &str) -> Result<String, String> {
    let task = task(groups_json)?;
    let d = optimal_design(&task, &DesignOptions::default()).map_err(|e| e.to_string())?;
    let uniform = error_exponent(&task, &PerronVector::uniform(task.num_agents()), &ExponentOptions::default())
        .map_err(|e| e.to_string())?;
    let status = serde_json::to_value(d.status).expect("status serializes")["kind"].as_str().unwrap_or("").to_string();
    Ok(to_json(&DesignOut {
        pi: d.pi.as_slice().to_vec(),
        theta_dagger: d.theta_dagger + 1,
        status,
        achieved_exponent: d.achieved_exponent,
        upper_bound: d.upper_bound,
        uniform_exponent: uniform.phi,
        phi_theta: d.report.per_hypothesis.iter().map(|t| t.phi_theta).collect(),
    }))
}

#[derive(Serialize)]
struct CurveOut {
    t: Vec<f64>,
    /// `phi[theta - 1][i]`.
    phi: Vec<Vec<f64>>,
    t_star: Vec<Option<f64>>,
    phi_theta: Vec<Option<f64>>,
}

/// `phi(t; pi, theta)` on a grid over `[1.5 * min t*, 0]` for every wrong
/// hypothesis.
pub fn phi_curve_json(groups_json: &str, weighting: &str, points: usize) -> Result<String, String> {
    let task = task(groups_json)?;
    let pi = weights(&task, weighting)?;
    let report = error_exponent(&task, &pi, &ExponentOptions::default()).map_err(|e| e.to_string())?;
    let t_min = report.per_hypothesis.iter().filter_map(|t| t.t_star).fold(-1.0, f64::min) * 1.5;
    let points = points.clamp(2, 400);
    let t: Vec<f64> = (0..points).map(|i| t_min * (1.0 - i as f64 / (points - 1) as f64)).collect();
    let mut phi = Vec::new();
    for theta in task.wrong_hypotheses() {
        let row: Result<Vec<f64>, _> = t.iter().map(|&x| network_phi(&task, &pi, theta, x, INTEGRATION_TOL)).collect();
        phi.push(row.map_err(|e| e.to_string())?);
    }
    Ok(to_json(&CurveOut {
        t,
        phi,
        t_star: report.per_hypothesis.iter().map(|t| t.t_star).collect(),
        phi_theta: report.per_hypothesis.iter().map(|t| t.phi_theta).collect(),
    }))
}

#[derive(Serialize)]
struct TrajectoryOut {
    steps: Vec<usize>,
    /// Network average of `lambda_k(theta)`, `mean_lambda[theta - 1][i]`.
    mean_lambda: Vec<Vec<f64>>,
    /// Fraction of agents whose decision is wrong.
    wrong_fraction: Vec<f64>,
}

/// One replication on a complete graph whose combination matrix has the
/// chosen Perron vector.
pub fn trajectory_json(groups_json: &str, weighting: &str, delta: f64, horizon: usize, seed: u64) -> Result<String, String> {
    if horizon > MAX_DEMO_STEPS {
        return Err(format!("horizon is limited to {MAX_DEMO_STEPS} steps in the demo"));
    }
    let task = task(groups_json)?;
    let pi = weights(&task, weighting)?;
    let n = task.num_agents();
    let adj = Adjacency::complete(n).map_err(|e| e.to_string())?;
    let a = matrix_from_eigenvector(&adj, &pi).map_err(|e| e.to_string())?;
    let cfg = SimulationConfig::stationary(delta, horizon, 1, seed);
    let r = run_replication(&task, &a, &cfg, 0).map_err(|e| e.to_string())?;
    let hm1 = task.num_hypotheses() - 1;
    let mean_lambda = (0..hm1)
        .map(|j| r.lambda.iter().map(|row| (0..n).map(|k| row[k * hm1 + j]).sum::<f64>() / n as f64).collect())
        .collect();
    let wrong_fraction = r
        .decisions
        .iter()
        .zip(&r.truth)
        .map(|(d, &t)| d.iter().filter(|&&x| x != t).count() as f64 / n as f64)
        .collect();
    Ok(to_json(&TrajectoryOut { steps: r.steps, mean_lambda, wrong_fraction }))
}

/// Optimal Perron vector and exponents for Gaussian agent groups.
#[wasm_bindgen]
pub fn design(groups_json: &str) -> Result<String, JsValue> {
    design_json(groups_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phi_curve(groups_json: &str, weighting: &str, points: usize) -> Result<String, JsValue> {
    phi_curve_json(groups_json, weighting, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn trajectory(groups_json: &str, weighting: &str, delta: f64, horizon: usize, seed: u32) -> Result<String, JsValue> {
    trajectory_json(groups_json, weighting, delta, horizon, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
