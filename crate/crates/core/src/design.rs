//! Synthesis of Perron eigenvectors that maximize the error exponent.
//!
//! The construction weighs each agent proportionally to its
//! non-cooperative critical point against the hypothesis `theta_dagger`
//! that minimizes the summed non-cooperative exponents. Conflicting agents
//! make that bound unreachable; they are then given a small weight derived
//! from a slack `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::{AslError, Result};
use crate::exponent::{self, ExponentOptions, ExponentReport};
use crate::lmgf::{self, AgentClass, AgentClassification, ClassifyOptions, HypothesisClassification, LearningTask};
use crate::network::PerronVector;
use crate::roots;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DAGGER_TIE_TOL: f64 = 1e-12;
pub const MEMBERSHIP_TOL: f64 = 1e-9;
pub const EPSILON_T_TOL: f64 = 1e-12;
const EPSILON_T_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignOptions {
    pub epsilon: f64,
    pub membership_tol: f64,
    pub classify: ClassifyOptions,
    pub exponent: ExponentOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            membership_tol: MEMBERSHIP_TOL,
            classify: ClassifyOptions::default(),
            exponent: ExponentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignStatus {
    OptimalUpperBoundAchieved,
    EpsilonOptimal { epsilon: f64 },
    UpperBoundUnachievable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorDesign {
    pub theta_dagger: usize,
    /// Every hypothesis tied for the smallest summed non-cooperative exponent.
    pub tied: Vec<usize>,
    pub pi: PerronVector,
    pub status: DesignStatus,
    /// Verified `Phi(pi)`; 0 when the design is infeasible.
    pub achieved_exponent: f64,
    /// `sum_k Phi_k^nc(theta_dagger)`.
    pub upper_bound: f64,
    pub pi1_member: bool,
    /// Critical points the weights were made proportional to.
    pub critical_points: Vec<f64>,
    pub classes: Vec<AgentClass>,
    pub report: ExponentReport,
}

/// Hypotheses minimizing `sum_k Phi_k^nc(theta)`; the first is canonical.
pub fn theta_dagger(classification: &AgentClassification, tie_tol: f64) -> Vec<usize> {
    let sums: Vec<(usize, f64)> = classification.per_hypothesis.iter().map(|h| (h.theta, h.phi_sum())).collect();
    let min = sums.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    sums.iter().filter(|s| s.1 - min <= tie_tol).map(|s| s.0).collect()
}

/// Critical point used for an agent that carries no information about
/// `theta`: its own critical point at the first hypothesis it does inform
/// on, or `-placeholder` if it is uninformative everywhere.
fn uninformative_weight(classification: &AgentClassification, k: usize, placeholder: f64) -> f64 {
    classification
        .per_hypothesis
        .iter()
        .find(|h| h.classes[k] == AgentClass::Informative)
        .map_or(-placeholder, |h| h.t_nc[k])
}

fn normalize(weights: &[f64]) -> Result<PerronVector> {
    let s: f64 = weights.iter().sum();
    if !(s < 0.0) || weights.iter().any(|&t| !(t < 0.0)) {
        return Err(AslError::Infeasible("critical points must all be negative".into()));
    }
    PerronVector::new(weights.iter().map(|t| t / s).collect())
}

/// Per-agent critical points with conflicting agents mapped to `conflict_t`.
fn design_points(classification: &AgentClassification, theta: usize, placeholder: f64, conflict_t: f64) -> Vec<f64> {
    let h = classification.for_theta(theta);
    h.classes
        .iter()
        .enumerate()
        .map(|(k, c)| match c {
            AgentClass::Informative => h.t_nc[k],
            AgentClass::Conflicting => conflict_t,
            AgentClass::Uninformative => uninformative_weight(classification, k, placeholder),
        })
        .collect()
}

/// `pi_k = t_k^nc / sum_l t_l^nc` against `theta`; requires no conflicting agents.
pub fn candidate_pi(classification: &AgentClassification, theta: usize, placeholder: f64) -> Result<PerronVector> {
    let h = classification.for_theta(theta);
    if !h.conflicting.is_empty() {
        return Err(AslError::ConflictingAgentsPresent { agents: h.conflicting.clone() });
    }
    normalize(&design_points(classification, theta, placeholder, 0.0))
}

/// True when `pi` is feasible and `theta` attains the smallest per-hypothesis
/// exponent within `tol`.
pub fn check_pi1_membership(report: &ExponentReport, theta: usize, tol: f64) -> bool {
    if !report.feasible {
        return false;
    }
    let Some(target) = report.for_theta(theta).phi_theta else { return false };
    report.per_hypothesis.iter().all(|p| p.phi_theta.is_some_and(|v| target <= v + tol))
}

pub fn pi1_member(task: &LearningTask, pi: &PerronVector, theta: usize, opts: &DesignOptions) -> Result<bool> {
    let report = exponent::error_exponent(task, pi, &opts.exponent)?;
    Ok(check_pi1_membership(&report, theta, opts.membership_tol))
}

/// Non-cooperative `phi_k(t)` of one agent.
fn agent_phi(task: &LearningTask, k: usize, theta: usize, t: f64, tol: f64) -> Result<f64> {
    let e = task.evaluator(k, theta);
    exponent::phi_integral(|s| e.eval(s), e.mean(), t, tol)
}

/// `t_eps`: the most negative `t` at which every conflicting agent still
/// has `phi_k(t) <= epsilon / |C|`.
pub fn epsilon_t(
    task: &LearningTask,
    h: &HypothesisClassification,
    epsilon: f64,
    opts: &DesignOptions,
) -> Result<f64> {
    if h.conflicting.is_empty() {
        return Err(AslError::NoConflictingAgents);
    }
    if !(epsilon > 0.0) {
        return Err(AslError::DomainError(format!("epsilon must be positive, got {epsilon}")));
    }
    let share = epsilon / h.conflicting.len() as f64;
    let tol = opts.exponent.integration_tol.min(share * 1e-3);
    let holds = |t: f64| -> Result<bool> {
        for &k in &h.conflicting {
            if agent_phi(task, k, h.theta, t, tol)? > share {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut lo = -1.0;
    while holds(lo)? {
        lo *= 2.0;
        if lo.abs() > EPSILON_T_CAP {
            return Err(AslError::RootNotBracketed(format!("phi stays below {share:e} for |t| <= {EPSILON_T_CAP:e}")));
        }
    }
    roots::bisect_boundary(holds, lo, 0.0, EPSILON_T_TOL)
}

/// Perron vector with conflicting agents weighted by `t_eps`.
pub fn epsilon_pi(
    task: &LearningTask,
    classification: &AgentClassification,
    theta: usize,
    epsilon: f64,
    opts: &DesignOptions,
) -> Result<(PerronVector, Vec<f64>)> {
    let t_eps = epsilon_t(task, classification.for_theta(theta), epsilon, opts)?;
    let points = design_points(classification, theta, opts.classify.placeholder, t_eps);
    Ok((normalize(&points)?, points))
}

/// `pi_k t_l = pi_l t_k` for all informative pairs.
pub fn proportionality_check(pi: &PerronVector, h: &HypothesisClassification, tol: f64) -> bool {
    let inf = &h.informative;
    inf.iter().enumerate().all(|(i, &k)| {
        inf[i + 1..].iter().all(|&l| (pi[k] * h.t_nc[l] - pi[l] * h.t_nc[k]).abs() <= tol)
    })
}

fn design_for(
    task: &LearningTask,
    classification: &AgentClassification,
    theta: usize,
    tied: &[usize],
    opts: &DesignOptions,
) -> Result<EigenvectorDesign> {
    let h = classification.for_theta(theta);
    let (pi, points, epsilon) = if h.conflicting.is_empty() {
        let points = design_points(classification, theta, opts.classify.placeholder, 0.0);
        (normalize(&points)?, points, None)
    } else {
        let (pi, points) = epsilon_pi(task, classification, theta, opts.epsilon, opts)?;
        (pi, points, Some(opts.epsilon))
    };
    let report = exponent::error_exponent(task, &pi, &opts.exponent)?;
    let member = check_pi1_membership(&report, theta, opts.membership_tol);
    let status = match (member, epsilon) {
        (true, None) => DesignStatus::OptimalUpperBoundAchieved,
        (true, Some(epsilon)) => DesignStatus::EpsilonOptimal { epsilon },
        (false, _) => DesignStatus::UpperBoundUnachievable,
    };
    Ok(EigenvectorDesign {
        theta_dagger: theta,
        tied: tied.to_vec(),
        pi,
        status,
        achieved_exponent: report.phi.unwrap_or(0.0),
        upper_bound: h.phi_sum(),
        pi1_member: member,
        critical_points: points,
        classes: h.classes.clone(),
        report,
    })
}

/// Optimal (or epsilon-optimal) Perron eigenvector for the task.
///
/// With several tied `theta_dagger` candidates, a design is built for each
/// and the one with the largest verified exponent is returned.
pub fn optimal_design(task: &LearningTask, opts: &DesignOptions) -> Result<EigenvectorDesign> {
    let classification = lmgf::classify_agents(task, &opts.classify)?;
    optimal_design_with(task, &classification, opts)
}

pub fn optimal_design_with(
    task: &LearningTask,
    classification: &AgentClassification,
    opts: &DesignOptions,
) -> Result<EigenvectorDesign> {
    let tied = theta_dagger(classification, DAGGER_TIE_TOL);
    let mut best: Option<EigenvectorDesign> = None;
    for &theta in &tied {
        let d = design_for(task, classification, theta, &tied, opts)?;
        if best.as_ref().is_none_or(|b| d.achieved_exponent > b.achieved_exponent) {
            best = Some(d);
        }
    }
    best.ok_or_else(|| AslError::Infeasible("no wrong hypotheses".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AgentModel, DistributionModel};
    use crate::presets;

    fn g(m: f64, v: f64) -> DistributionModel {
        DistributionModel::gaussian(m, v)
    }

    fn classify(task: &LearningTask) -> AgentClassification {
        lmgf::classify_agents(task, &ClassifyOptions::default()).unwrap()
    }

    #[test]
    fn dagger_for_gaussian_groups() {
        let task = presets::noisy_gaussian_task().unwrap();
        let c = classify(&task);
        assert_eq!(theta_dagger(&c, DAGGER_TIE_TOL), vec![1]);
        assert!((c.for_theta(1).phi_sum() - (3.0 * 0.00125 + 3.0 * 0.04 / (8.0 * 1.1))).abs() < 1e-12);
    }

    #[test]
    fn dagger_ties() {
        let a = AgentModel::accurate(vec![g(0.0, 1.0), g(0.2, 1.0), g(-0.2, 1.0)]).unwrap();
        let task = LearningTask::from_agents(vec![a; 3]).unwrap();
        assert_eq!(theta_dagger(&classify(&task), DAGGER_TIE_TOL), vec![1, 2]);
        let d = optimal_design(&task, &DesignOptions::default()).unwrap();
        assert_eq!(d.tied, vec![1, 2]);
        assert_eq!(d.theta_dagger, 1);
    }

    #[test]
    fn gaussian_group_design() {
        let task = presets::noisy_gaussian_task().unwrap();
        let d = optimal_design(&task, &DesignOptions::default()).unwrap();
        assert_eq!(d.status, DesignStatus::OptimalUpperBoundAchieved);
        let inv: Vec<f64> = presets::NOISY_GAUSSIAN_GROUPS
            .iter()
            .flat_map(|g| std::iter::repeat_n(1.0 / (1.0 + g.noise_level), g.count))
            .collect();
        let s: f64 = inv.iter().sum();
        for (k, w) in inv.iter().enumerate() {
            assert!((d.pi[k] - w / s).abs() < 1e-10);
        }
        assert!((d.achieved_exponent - d.upper_bound).abs() < 1e-6 * d.upper_bound);
    }

    #[test]
    fn identical_and_accurate_give_uniform() {
        let a = AgentModel::accurate(vec![g(0.0, 1.0), g(0.3, 2.0)]).unwrap();
        let task = LearningTask::from_agents(vec![a; 5]).unwrap();
        let c = classify(&task);
        let pi = candidate_pi(&c, 1, 1.0).unwrap();
        assert!(pi.as_slice().iter().all(|p| (p - 0.2).abs() < 1e-12));
        let d = optimal_design(&task, &DesignOptions::default()).unwrap();
        let single = c.for_theta(1).phi_nc[0];
        assert!((d.achieved_exponent - 5.0 * single).abs() < 1e-6 * d.achieved_exponent);

        let lap = presets::laplace_task().unwrap();
        let d = optimal_design(&lap, &DesignOptions::default()).unwrap();
        assert!(d.pi.as_slice().iter().all(|p| (p - 0.1).abs() < 1e-9));
        assert_eq!(d.status, DesignStatus::OptimalUpperBoundAchieved);
    }

    #[test]
    fn conflicting_agents_block_candidate() {
        let task = presets::illustrative_task().unwrap();
        let c = classify(&task);
        assert!(matches!(candidate_pi(&c, 1, 1.0), Err(AslError::ConflictingAgentsPresent { .. })));
    }

    #[test]
    fn epsilon_t_gaussian_closed_form() {
        // One conflicting agent with Lambda = a t + b t^2 / 2, a = -0.005, b = 0.01,
        // so phi(t) = a t + b t^2 / 4.
        let task = presets::illustrative_task().unwrap();
        let c = classify(&task);
        let h = c.for_theta(1).clone();
        let only_third = HypothesisClassification { conflicting: vec![2], ..h };
        let eps = 1e-3;
        let (a, b): (f64, f64) = (-0.005, 0.01);
        let oracle = (-a - (a * a + b * eps).sqrt()) / (b / 2.0);
        let t = epsilon_t(&task, &only_third, eps, &DesignOptions::default()).unwrap();
        assert!((t - oracle).abs() < 1e-9, "{t} vs {oracle}");

        let t6 = epsilon_t(&task, c.for_theta(1), 1e-6, &DesignOptions::default()).unwrap();
        let t3 = epsilon_t(&task, c.for_theta(1), 1e-3, &DesignOptions::default()).unwrap();
        assert!(t6.abs() < t3.abs());
    }

    #[test]
    fn epsilon_needs_conflicts() {
        let task = presets::noisy_gaussian_task().unwrap();
        let c = classify(&task);
        assert!(matches!(
            epsilon_t(&task, c.for_theta(1), 1e-4, &DesignOptions::default()),
            Err(AslError::NoConflictingAgents)
        ));
    }

    #[test]
    fn illustrative_epsilon_design() {
        let task = presets::illustrative_task().unwrap();
        let opts = DesignOptions::default();
        let d = optimal_design(&task, &opts).unwrap();
        assert_eq!(d.status, DesignStatus::EpsilonOptimal { epsilon: 1e-4 });
        assert!((d.critical_points[1] + 3.0).abs() < 1e-8);
        assert_eq!(d.critical_points[3], -1.0);
        assert_eq!(d.critical_points[0], d.critical_points[2]);
        assert!(d.achieved_exponent >= d.upper_bound - 1e-4 - 1e-8);
        assert!(d.achieved_exponent <= d.upper_bound + 1e-9);

        let c = classify(&task);
        let w_small = epsilon_pi(&task, &c, 1, 1e-8, &opts).unwrap().0[0];
        let w_large = epsilon_pi(&task, &c, 1, 1e-3, &opts).unwrap().0[0];
        assert!(w_small < w_large);
    }

    #[test]
    fn proportionality() {
        let h = HypothesisClassification {
            theta: 1,
            classes: vec![AgentClass::Informative, AgentClass::Informative, AgentClass::Uninformative],
            uninformative: vec![2],
            informative: vec![0, 1],
            conflicting: vec![],
            d: vec![0.0; 3],
            rho: vec![0.0; 3],
            t_nc: vec![-2.0, -1.0, -1.0],
            phi_nc: vec![0.0; 3],
        };
        assert!(proportionality_check(&PerronVector::new(vec![0.5, 0.25, 0.25]).unwrap(), &h, 1e-12));
        assert!(!proportionality_check(&PerronVector::new(vec![0.55, 0.25, 0.2]).unwrap(), &h, 1e-12));
        let eq = HypothesisClassification { t_nc: vec![-1.0, -1.0, -1.0], ..h };
        assert!(proportionality_check(&PerronVector::uniform(3), &eq, 1e-12));
    }

    #[test]
    fn membership_examples() {
        let task = presets::noisy_gaussian_task().unwrap();
        let opts = DesignOptions::default();
        let d = optimal_design(&task, &opts).unwrap();
        assert!(pi1_member(&task, &d.pi, 1, &opts).unwrap());

        // Almost all weight on one agent that only informs on theta_3: its
        // exponent against theta_3 collapses towards that agent's own.
        let mut w = [0.1; 10];
        w[6] = 5.0;
        let s: f64 = w.iter().sum();
        let pi = PerronVector::new(w.iter().map(|x| x / s).collect()).unwrap();
        assert!(pi1_member(&task, &pi, 2, &opts).unwrap());
        assert!(!pi1_member(&task, &pi, 1, &opts).unwrap());

        let two = presets::illustrative_task().unwrap();
        let pi = PerronVector::new(vec![0.1, 0.6, 0.1, 0.2]).unwrap();
        assert!(pi1_member(&two, &pi, 1, &opts).unwrap());
    }
}
