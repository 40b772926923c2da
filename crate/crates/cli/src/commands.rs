use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use asl_core::config::{parse_weights, Experiment, ExperimentConfig, PiSource};
use asl_core::exponent::error_exponent;
use asl_core::lmgf::classify_agents;
use asl_core::network::{self, check_strong_connectivity, PERRON_MAX_ITER, PERRON_TOL};
use asl_core::simulate::{
    adaptation_time_simulated, adaptation_time_theory, ldp_slope, run_monte_carlo, run_replication,
};
use asl_core::AslError;
use serde::Serialize;

use crate::plot::{line_chart, Series};
use crate::report::{exponent_csv, AdaptationRow, ClassifyReport, SimulationRun, SimulationSummary};
use crate::{Format, PiChoice};

#[derive(Debug)]
pub enum CliError {
    Core(AslError),
    Io(PathBuf, io::Error),
    Usage(String),
}

impl CliError {
    /// 2 for invalid input, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<AslError> for CliError {
    fn from(e: AslError) -> Self {
        CliError::Core(e)
    }
}

pub struct Context {
    exp: Experiment,
    out: PathBuf,
    /// Reports go to files only when an output directory was given.
    explicit_out: bool,
    format: Format,
}

impl Context {
    pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>, format: Format) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let exp = Experiment::new(cfg, base)?;
        let explicit_out = out.is_some();
        let out = out.unwrap_or_else(|| exp.output_dir());
        Ok(Self { exp, out, explicit_out, format })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::Io(self.out.clone(), e))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path, e))
    }

    /// Print the report and, with `--out`, also store it.
    fn emit<T: Serialize>(&self, stem: &str, value: &T, csv: impl FnOnce() -> String) -> Result<(), CliError> {
        let (text, ext) = match self.format {
            Format::Json => (json(value), "json"),
            Format::Csv => (csv(), "csv"),
        };
        print!("{text}");
        if self.explicit_out {
            self.write(&format!("{stem}.{ext}"), &text)?;
        }
        Ok(())
    }

    pub fn classify(&self) -> Result<(), CliError> {
        let task = self.exp.task();
        let c = classify_agents(task, &self.exp.config.classify)?;
        let report = ClassifyReport::new(task, &c);
        self.emit("classify", &report, || report.to_csv())
    }

    pub fn exponent(&self, pi: Option<PiChoice>, pi_file: Option<PathBuf>) -> Result<(), CliError> {
        let mut exp = self.exp.clone();
        if let Some(choice) = pi {
            exp.config.pi = match choice {
                PiChoice::Network => PiSource::Network,
                PiChoice::Uniform => PiSource::Uniform,
                PiChoice::Design => PiSource::Design,
            };
        }
        if let Some(path) = pi_file {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Io(path.clone(), e))?;
            exp.config.pi = PiSource::Explicit { weights: parse_weights(&text)? };
        }
        let pi = exp.perron_vector()?;
        let report = error_exponent(exp.task(), &pi, &exp.config.exponent)?;
        #[derive(Serialize)]
        struct Out<'a> {
            perron_vector: &'a [f64],
            #[serde(flatten)]
            report: &'a asl_core::exponent::ExponentReport,
        }
        let out = Out { perron_vector: pi.as_slice(), report: &report };
        self.emit("exponent", &out, || exponent_csv(&report))
    }

    pub fn design(&self, emit_matrix: bool) -> Result<(), CliError> {
        let design = self.exp.design()?;
        if emit_matrix {
            let a = network::matrix_from_eigenvector(self.exp.adjacency(), &design.pi)?;
            self.write("design_matrix.txt", &a.to_text())?;
        }
        self.emit("design", &design, || {
            let mut s = String::from("agent,pi,critical_point,class\n");
            for (k, p) in design.pi.as_slice().iter().enumerate() {
                s.push_str(&format!("{},{p},{},{}\n", k + 1, design.critical_points[k], design.classes[k].letter()));
            }
            s
        })
    }

    pub fn graph_gen(&self) -> Result<(), CliError> {
        let adj = self.exp.adjacency();
        let a = self.exp.combination()?;
        let pi = network::perron_eigenvector(&a, PERRON_TOL, PERRON_MAX_ITER)?;
        self.write("adjacency.txt", &adj.to_text())?;
        self.write("combination.txt", &a.to_text())?;
        #[derive(Serialize)]
        struct Out<'a> {
            agents: usize,
            strongly_connected: bool,
            doubly_stochastic: bool,
            perron_vector: &'a [f64],
        }
        let out = Out {
            agents: adj.n(),
            strongly_connected: check_strong_connectivity(adj),
            doubly_stochastic: a.is_doubly_stochastic(1e-9),
            perron_vector: pi.as_slice(),
        };
        let text = match self.format {
            Format::Json => json(&out),
            Format::Csv => {
                let mut s = String::from("agent,pi\n");
                for (k, p) in pi.as_slice().iter().enumerate() {
                    s.push_str(&format!("{},{p}\n", k + 1));
                }
                s
            }
        };
        print!("{text}");
        Ok(())
    }

    pub fn simulate(&self) -> Result<(), CliError> {
        let sim = self.exp.config.simulate.as_ref().ok_or_else(|| AslError::Config("missing simulate section".into()))?;
        let task = self.exp.task();
        let a = self.exp.combination()?;
        let pi = network::perron_eigenvector(&a, PERRON_TOL, PERRON_MAX_ITER)?;
        let phi_theory = match error_exponent(task, &pi, &self.exp.config.exponent) {
            Ok(r) => r.phi,
            Err(e) => {
                log::warn!("no exponent for the simulated network: {e}");
                None
            }
        };
        let mut runs = Vec::new();
        let mut curves = Vec::new();
        for cfg in self.exp.simulation_configs()? {
            let mc = run_monte_carlo(task, &a, &cfg, false)?;
            let curve = mc.curve;
            let tag = format!("delta_{}", cfg.delta);
            let curve_file = format!("curve_{tag}.csv");
            let mut buf = Vec::new();
            curve.write_csv(&mut buf).expect("write to memory");
            self.write(&curve_file, &String::from_utf8(buf).expect("utf8"))?;
            let trajectory_file = if sim.trajectory {
                let r = run_replication(task, &a, &cfg, 0)?;
                let mut buf = Vec::new();
                r.write_csv(&task.hypotheses().labels, &mut buf).expect("write to memory");
                let name = format!("trajectory_{tag}.csv");
                self.write(&name, &String::from_utf8(buf).expect("utf8"))?;
                Some(name)
            } else {
                None
            };
            let mut adaptation = Vec::new();
            for &omega in &sim.omegas {
                let simulated = match adaptation_time_simulated(&curve, omega) {
                    Ok(i) => Some(i),
                    Err(AslError::NotReached | AslError::DomainError(_)) => None,
                    Err(e) => return Err(e.into()),
                };
                adaptation.push(AdaptationRow { omega, theory: adaptation_time_theory(omega, cfg.delta)?, simulated });
            }
            runs.push(SimulationRun {
                delta: cfg.delta,
                horizon: cfg.horizon,
                replications: cfg.replications,
                curve_file,
                trajectory_file,
                steady_state_agent: curve.terminal_agent().to_vec(),
                steady_state_average: curve.terminal_average(),
                steady_state_stderr: curve.average_stderr.last().copied().unwrap_or(0.0),
                adaptation,
            });
            curves.push(curve);
        }
        let points: Vec<(f64, f64)> = runs.iter().map(|r| (r.delta, r.steady_state_average)).collect();
        let (slope_fit, slope_fit_note) = if points.len() < 2 {
            (None, None)
        } else {
            match ldp_slope(&points) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        let summary = SimulationSummary {
            seed: self.exp.config.seed,
            perron_vector: pi.as_slice().to_vec(),
            phi_theory,
            slope_fit,
            slope_fit_note,
            runs,
        };
        let summary_json = json(&summary);
        self.write("simulate_summary.json", &summary_json)?;
        if sim.plots {
            let series: Vec<Series> = curves
                .iter()
                .map(|c| Series {
                    label: format!("delta = {}", c.delta),
                    points: c.steps.iter().zip(&c.average).map(|(&i, &p)| (i as f64, p.log10())).collect(),
                    scatter: false,
                })
                .collect();
            self.write("error_curves.svg", &line_chart("Network error probability", "step", "log10 p_ave", &series))?;
            let mut series = vec![Series {
                label: "simulated".into(),
                points: points.iter().map(|&(d, p)| (1.0 / d, p.ln())).collect(),
                scatter: true,
            }];
            if let (Some(s), Some(&(d0, p0))) = (slope_fit, points.first()) {
                let xs: Vec<f64> = points.iter().map(|(d, _)| 1.0 / d).collect();
                let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                let c = p0.ln() + s / d0;
                series.push(Series { label: "fit".into(), points: vec![(lo, c - s * lo), (hi, c - s * hi)], scatter: false });
            }
            self.write("steady_state.svg", &line_chart("Steady-state error", "1/delta", "ln p_ave", &series))?;
        }
        match self.format {
            Format::Json => print!("{summary_json}"),
            Format::Csv => print!("{}", summary.to_csv()),
        }
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
