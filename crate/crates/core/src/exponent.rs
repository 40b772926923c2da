//! Error exponents of the adaptive social learning strategy.
//!
//! For a Perron vector `pi` and a wrong hypothesis `theta`, the network
//! statistic has LMGF `Lambda_ave(t) = sum_k Lambda_k(pi_k t)`. The exponent
//! `Phi(pi, theta)` is `-phi(t*)` where `phi(t) = int_0^t Lambda_ave(s)/s ds`
//! and `t*` is the negative zero of `Lambda_ave`.

use serde::{Deserialize, Serialize};

use crate::error::{AslError, Result};
use crate::lmgf::{self, ClassifyOptions, HypothesisClassification, LearningTask};
use crate::network::PerronVector;
use crate::quadrature;
use crate::roots;

pub const INTEGRATION_TOL: f64 = 1e-10;
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_CAP: f64 = 1e6;
pub const FEASIBILITY_MARGIN: f64 = 1e-12;
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentOptions {
    pub integration_tol: f64,
    pub root_tol: f64,
    pub root_cap: f64,
    pub feasibility_margin: f64,
    pub tie_tol: f64,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        Self {
            integration_tol: INTEGRATION_TOL,
            root_tol: ROOT_TOL,
            root_cap: ROOT_CAP,
            feasibility_margin: FEASIBILITY_MARGIN,
            tie_tol: TIE_TOL,
        }
    }
}

/// `phi(t) = int_0^t lambda(s)/s ds`, with the integrand continued by
/// `slope_at_zero` at the origin.
pub fn phi_integral<F>(mut lambda: F, slope_at_zero: f64, t: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut integrand = |s: f64| -> Result<f64> {
        if s == 0.0 {
            Ok(slope_at_zero)
        } else {
            Ok(lambda(s)? / s)
        }
    };
    let (a, b, sign) = if t < 0.0 { (t, 0.0, -1.0) } else { (0.0, t, 1.0) };
    let r = quadrature::integrate_fallible(&mut integrand, a, b, tol, 1e-12)?;
    Ok(sign * r.value)
}

/// `m_ave(pi, theta) = sum_k pi_k d_k(theta)`.
pub fn m_ave(task: &LearningTask, pi: &PerronVector, theta: usize) -> Result<f64> {
    task.check_perron(pi)?;
    Ok(task.evaluators(theta).iter().zip(pi.as_slice()).map(|(e, p)| p * e.mean()).sum())
}

/// `c_ave(pi, theta) = sum_k pi_k^2 rho_k(theta)`.
pub fn c_ave(task: &LearningTask, pi: &PerronVector, theta: usize) -> Result<f64> {
    task.check_perron(pi)?;
    Ok(task.evaluators(theta).iter().zip(pi.as_slice()).map(|(e, p)| p * p * e.variance()).sum())
}

/// Second-order approximation `(t_hat, Phi_hat) = (-2 m / c, m^2 / c)`.
pub fn parabolic_approx(task: &LearningTask, pi: &PerronVector, theta: usize) -> Result<(f64, f64)> {
    let m = m_ave(task, pi, theta)?;
    let c = c_ave(task, pi, theta)?;
    if c <= 0.0 {
        return Err(AslError::DegenerateVariance);
    }
    if m <= 0.0 {
        return Err(AslError::NoNegativeRoot { m_ave: m });
    }
    Ok((-2.0 * m / c, m * m / c))
}

/// `t*_theta(pi)`: the negative zero of `Lambda_ave`.
pub fn critical_t(task: &LearningTask, pi: &PerronVector, theta: usize, opts: &ExponentOptions) -> Result<f64> {
    let m = m_ave(task, pi, theta)?;
    if m <= opts.feasibility_margin {
        return Err(AslError::NoNegativeRoot { m_ave: m });
    }
    let c = c_ave(task, pi, theta)?;
    let guess = if c > 0.0 { -2.0 * m / c } else { -1.0 };
    roots::negative_zero(|t| task.lmgf_ave(pi, theta, t), guess, opts.root_cap, opts.root_tol)
}

/// `phi(t; pi, theta)` for the network LMGF.
pub fn network_phi(task: &LearningTask, pi: &PerronVector, theta: usize, t: f64, tol: f64) -> Result<f64> {
    let m = m_ave(task, pi, theta)?;
    phi_integral(|s| task.lmgf_ave(pi, theta, s), m, t, tol)
}

fn all_trivially_zero(task: &LearningTask, theta: usize) -> bool {
    task.evaluators(theta).iter().all(|e| e.is_trivially_zero())
}

/// `Phi(pi, theta)` together with its critical point.
pub fn theta_exponent_with_root(
    task: &LearningTask,
    pi: &PerronVector,
    theta: usize,
    opts: &ExponentOptions,
) -> Result<(f64, f64)> {
    if all_trivially_zero(task, theta) {
        return Ok((0.0, 0.0));
    }
    let t = critical_t(task, pi, theta, opts)?;
    let phi = network_phi(task, pi, theta, t, opts.integration_tol)?;
    Ok(((-phi).max(0.0), t))
}

pub fn theta_exponent(task: &LearningTask, pi: &PerronVector, theta: usize, opts: &ExponentOptions) -> Result<f64> {
    theta_exponent_with_root(task, pi, theta, opts).map(|(phi, _)| phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaExponent {
    pub theta: usize,
    pub label: String,
    pub feasible: bool,
    pub m_ave: f64,
    pub c_ave: f64,
    pub phi_theta: Option<f64>,
    pub t_star: Option<f64>,
    pub t_hat: Option<f64>,
    pub phi_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub per_hypothesis: Vec<ThetaExponent>,
    pub feasible: bool,
    /// `Phi(pi)`; absent when `pi` is infeasible.
    pub phi: Option<f64>,
    /// Canonical minimizing hypothesis (lowest index among ties).
    pub argmin: Option<usize>,
    pub tied: Vec<usize>,
}

impl ExponentReport {
    pub fn for_theta(&self, theta: usize) -> &ThetaExponent {
        &self.per_hypothesis[theta - 1]
    }
}

fn evaluate_theta(task: &LearningTask, pi: &PerronVector, theta: usize, opts: &ExponentOptions) -> Result<ThetaExponent> {
    let m = m_ave(task, pi, theta)?;
    let c = c_ave(task, pi, theta)?;
    let feasible = m > opts.feasibility_margin;
    let (phi_theta, t_star) = if feasible {
        let (phi, t) = theta_exponent_with_root(task, pi, theta, opts)?;
        (Some(phi), Some(t))
    } else {
        (None, None)
    };
    let (t_hat, phi_hat) = if feasible && c > 0.0 { (Some(-2.0 * m / c), Some(m * m / c)) } else { (None, None) };
    Ok(ThetaExponent {
        theta,
        label: task.hypotheses().label(theta).to_string(),
        feasible,
        m_ave: m,
        c_ave: c,
        phi_theta,
        t_star,
        t_hat,
        phi_hat,
    })
}

/// `Phi(pi) = min_theta Phi(pi, theta)` with per-hypothesis detail.
///
/// An infeasible `pi` is reported through the `feasible` flag rather than an
/// error.
pub fn error_exponent(task: &LearningTask, pi: &PerronVector, opts: &ExponentOptions) -> Result<ExponentReport> {
    task.check_perron(pi)?;
    let thetas: Vec<usize> = task.wrong_hypotheses().collect();
    #[cfg(feature = "parallel")]
    let per: Vec<ThetaExponent> = {
        use rayon::prelude::*;
        thetas.par_iter().map(|&th| evaluate_theta(task, pi, th, opts)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per: Vec<ThetaExponent> = thetas.iter().map(|&th| evaluate_theta(task, pi, th, opts)).collect::<Result<_>>()?;

    let feasible = per.iter().all(|p| p.feasible);
    let (phi, argmin, tied) = if feasible {
        let min = per.iter().filter_map(|p| p.phi_theta).fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> =
            per.iter().filter(|p| p.phi_theta.is_some_and(|v| v - min <= opts.tie_tol)).map(|p| p.theta).collect();
        (Some(min), tied.first().copied(), tied)
    } else {
        (None, None, Vec::new())
    };
    Ok(ExponentReport { per_hypothesis: per, feasible, phi, argmin, tied })
}

/// `(min_k Phi_k^nc(theta), sum_k Phi_k^nc(theta))`.
pub fn exponent_bounds(task: &LearningTask, theta: usize, opts: &ClassifyOptions) -> Result<(f64, f64)> {
    let c = lmgf::classify_hypothesis(task, theta, opts)?;
    Ok((c.phi_min(), c.phi_sum()))
}

/// `(sum_k min_theta Phi_k^nc(theta), min_theta sum_k Phi_k^nc(theta))`; the
/// first never exceeds the second.
pub fn aggregate_bounds(per_hypothesis: &[HypothesisClassification]) -> (f64, f64) {
    let n = per_hypothesis.first().map_or(0, |h| h.phi_nc.len());
    let sum_of_mins: f64 = (0..n)
        .map(|k| per_hypothesis.iter().map(|h| h.phi_nc[k]).fold(f64::INFINITY, f64::min))
        .sum();
    let min_of_sums = per_hypothesis.iter().map(|h| h.phi_sum()).fold(f64::INFINITY, f64::min);
    (sum_of_mins, min_of_sums)
}
