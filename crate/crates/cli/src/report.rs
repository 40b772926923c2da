//! Serializable reports with 1-based agent numbers and hypothesis labels.

use std::fmt::Write;

use asl_core::exponent::{aggregate_bounds, ExponentReport};
use asl_core::lmgf::{AgentClassification, HypothesisClassification};
use asl_core::LearningTask;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub labels: Vec<String>,
    pub hypotheses: Vec<HypothesisReport>,
    /// `sum_k min_theta Phi_k^nc(theta)`, a lower bound on every exponent.
    pub aggregate_lower: f64,
    /// `min_theta sum_k Phi_k^nc(theta)`, an upper bound on every exponent.
    pub aggregate_upper: f64,
    pub truth_consistent: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct HypothesisReport {
    pub theta: usize,
    pub label: String,
    pub classes: String,
    pub uninformative: Vec<usize>,
    pub informative: Vec<usize>,
    pub conflicting: Vec<usize>,
    pub d: Vec<f64>,
    pub rho: Vec<f64>,
    pub t_nc: Vec<f64>,
    pub phi_nc: Vec<f64>,
    pub phi_sum: f64,
    pub phi_min: f64,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|k| k + 1).collect()
}

fn labels(task: &LearningTask) -> Vec<String> {
    task.hypotheses().labels.clone()
}

impl ClassifyReport {
    pub fn new(task: &LearningTask, c: &AgentClassification) -> Self {
        let (aggregate_lower, aggregate_upper) = aggregate_bounds(&c.per_hypothesis);
        Self {
            labels: labels(task),
            hypotheses: c.per_hypothesis.iter().map(|h| HypothesisReport::new(task, h)).collect(),
            aggregate_lower,
            aggregate_upper,
            truth_consistent: one_based(&c.truth_consistent),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,agent,class,d,rho,t_nc,phi_nc\n");
        for h in &self.hypotheses {
            for (k, class) in h.classes.chars().enumerate() {
                let _ = writeln!(s, "{},{},{class},{},{},{},{}", h.label, k + 1, h.d[k], h.rho[k], h.t_nc[k], h.phi_nc[k]);
            }
        }
        s
    }
}

impl HypothesisReport {
    fn new(task: &LearningTask, h: &HypothesisClassification) -> Self {
        Self {
            theta: h.theta,
            label: task.hypotheses().label(h.theta).to_string(),
            classes: h.classes.iter().map(|c| c.letter()).collect(),
            uninformative: one_based(&h.uninformative),
            informative: one_based(&h.informative),
            conflicting: one_based(&h.conflicting),
            d: h.d.clone(),
            rho: h.rho.clone(),
            t_nc: h.t_nc.clone(),
            phi_nc: h.phi_nc.clone(),
            phi_sum: h.phi_sum(),
            phi_min: h.phi_min(),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Table with one row per wrong hypothesis: exact and parabolic columns.
pub fn exponent_csv(r: &ExponentReport) -> String {
    let mut s = String::from("theta,label,feasible,m_ave,c_ave,t_star,phi_theta,t_hat,phi_hat\n");
    for t in &r.per_hypothesis {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            t.theta,
            t.label,
            t.feasible,
            t.m_ave,
            t.c_ave,
            opt(t.t_star),
            opt(t.phi_theta),
            opt(t.t_hat),
            opt(t.phi_hat)
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct AdaptationRow {
    pub omega: f64,
    pub theory: f64,
    /// Absent when the threshold is never held until the horizon.
    pub simulated: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct SimulationRun {
    pub delta: f64,
    pub horizon: usize,
    pub replications: usize,
    pub curve_file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
    pub steady_state_agent: Vec<f64>,
    pub steady_state_average: f64,
    pub steady_state_stderr: f64,
    pub adaptation: Vec<AdaptationRow>,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub perron_vector: Vec<f64>,
    /// Exponent predicted for the simulated combination matrix.
    pub phi_theory: Option<f64>,
    /// Negated slope of `log p_ave` against `1/delta`.
    pub slope_fit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_fit_note: Option<String>,
    pub runs: Vec<SimulationRun>,
}

impl SimulationSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,p_ave,stderr\n");
        for r in &self.runs {
            let _ = writeln!(s, "{},{},{}", r.delta, r.steady_state_average, r.steady_state_stderr);
        }
        s
    }
}
