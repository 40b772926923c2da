//! Log moment generating functions of the log-likelihood ratios, agent
//! classification and non-cooperative critical points.

use serde::{Deserialize, Serialize};

use crate::error::{AslError, Result};
use crate::exponent;
use crate::models::{self, AgentModel, DistributionModel, HypothesisSet, LlrKernel};
use crate::network::PerronVector;
use crate::quadrature;
use crate::roots;

pub const PROBE_GRID: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
pub const CLASSIFY_TOL: f64 = 1e-10;
pub const DEFAULT_PLACEHOLDER: f64 = 1.0;
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_CAP: f64 = 1e6;
pub const INTEGRATION_TOL: f64 = 1e-10;

/// Log of the relative level at which the tilted integrand is cut off.
const TRUNCATION_LOG_RATIO: f64 = -36.841_361_487_904_734;
const MAX_WIDENINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmgfMethod {
    ClosedFormGaussian,
    Quadrature,
    ExactSum,
}

/// Evaluator of `t -> log E[exp(t x_k(theta))]` for one agent and hypothesis.
#[derive(Debug, Clone)]
pub struct LmgfEvaluator {
    theta: usize,
    method: LmgfMethod,
    mean: f64,
    variance: f64,
    kernel: LlrKernel,
    signal: DistributionModel,
    breakpoints: Vec<f64>,
    /// `(mass, llr)` pairs over the support for finite alphabets.
    atoms: Vec<(f64, f64)>,
}

impl LmgfEvaluator {
    pub fn new(agent: &AgentModel, theta: usize) -> Result<Self> {
        let kernel = LlrKernel::new(agent, theta);
        let signal = agent.effective_signal();
        let method = match (&kernel, &signal) {
            (LlrKernel::Zero, _) => LmgfMethod::ClosedFormGaussian,
            (LlrKernel::Linear { .. }, DistributionModel::Gaussian { .. }) => LmgfMethod::ClosedFormGaussian,
            (_, DistributionModel::FinitePmf { .. }) => LmgfMethod::ExactSum,
            _ => LmgfMethod::Quadrature,
        };
        Self::with_method(agent, theta, method)
    }

    /// Build with an explicit evaluation method. Closed form requires a
    /// Gaussian signal with equal-variance Gaussian likelihoods; exact sum
    /// requires a finite alphabet.
    pub fn with_method(agent: &AgentModel, theta: usize, method: LmgfMethod) -> Result<Self> {
        agent.validate()?;
        let mean = models::expected_llr(agent, theta)?;
        let variance = models::llr_variance(agent, theta)?;
        let kernel = LlrKernel::new(agent, theta);
        let signal = agent.effective_signal();
        let closed_ok = matches!(kernel, LlrKernel::Zero)
            || matches!((&kernel, &signal), (LlrKernel::Linear { .. }, DistributionModel::Gaussian { .. }));
        if method == LmgfMethod::ClosedFormGaussian && !closed_ok {
            return Err(AslError::InvalidModel("closed form needs equal-variance Gaussian models".into()));
        }
        let mut atoms = Vec::new();
        let mut breakpoints = Vec::new();
        if let DistributionModel::FinitePmf { probabilities } = &signal {
            for (j, &p) in probabilities.iter().enumerate() {
                if p > 0.0 {
                    let x = kernel.eval(j as f64);
                    if !x.is_finite() {
                        return Err(AslError::SupportViolation { observation: j as f64 });
                    }
                    atoms.push((p, x));
                }
            }
        } else {
            if method == LmgfMethod::ExactSum {
                return Err(AslError::InvalidModel("exact sum needs a finite alphabet".into()));
            }
            let (lo, hi) = signal.truncation();
            breakpoints.push(lo);
            breakpoints.push(hi);
            for k in models::llr_kinks(agent, theta).into_iter().chain(signal.kinks()) {
                if k > lo && k < hi {
                    breakpoints.push(k);
                }
            }
            breakpoints.sort_by(f64::total_cmp);
            breakpoints.dedup();
        }
        Ok(Self { theta, method, mean, variance, kernel, signal, breakpoints, atoms })
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn method(&self) -> LmgfMethod {
        self.method
    }

    /// `d_k(theta)`: slope of the LMGF at the origin.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `rho_k(theta)`: curvature of the LMGF at the origin.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// True when the log-likelihood ratio vanishes identically by construction.
    pub fn is_trivially_zero(&self) -> bool {
        matches!(self.kernel, LlrKernel::Zero)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t == 0.0 || self.is_trivially_zero() {
            return Ok(0.0);
        }
        if !t.is_finite() {
            return Err(AslError::Divergent { t });
        }
        match self.method {
            LmgfMethod::ClosedFormGaussian => Ok(self.mean * t + 0.5 * self.variance * t * t),
            LmgfMethod::ExactSum => {
                let max = self.atoms.iter().map(|(_, x)| t * x).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = self.atoms.iter().map(|(p, x)| p * (t * x - max).exp()).sum();
                Ok(max + s.ln())
            }
            LmgfMethod::Quadrature if !self.atoms.is_empty() => {
                let s: f64 = self.atoms.iter().map(|(p, x)| p * (t * x).exp_m1()).sum();
                Ok(s.ln_1p())
            }
            LmgfMethod::Quadrature => self.eval_quadrature(t),
        }
    }

    fn eval_quadrature(&self, t: f64) -> Result<f64> {
        // The tilted density f(x) exp(t x(xi)) can have heavier tails than f;
        // widen the range until it is negligible or clearly not decaying.
        let log_g = |x: f64| self.signal.log_density(x) + t * self.kernel.eval(x);
        let center = self.signal.mean();
        let peak = self.breakpoints.iter().copied().chain([center]).map(log_g).fold(f64::NEG_INFINITY, f64::max);
        let cutoff = peak + TRUNCATION_LOG_RATIO;
        let mut points = self.breakpoints.clone();
        let widen = |mut edge: f64| -> Result<f64> {
            for _ in 0..MAX_WIDENINGS {
                let current = log_g(edge);
                if current <= cutoff {
                    return Ok(edge);
                }
                let next = center + 2.0 * (edge - center);
                if log_g(next) >= current {
                    return Err(AslError::Divergent { t });
                }
                edge = next;
            }
            Err(AslError::Divergent { t })
        };
        let last = points.len() - 1;
        points[0] = widen(points[0])?;
        points[last] = widen(points[last])?;
        let mut integrand = |x: f64| -> Result<f64> {
            let w = self.signal.density(x);
            if w == 0.0 {
                return Ok(0.0);
            }
            let v = w * (t * self.kernel.eval(x)).exp_m1();
            if !v.is_finite() {
                return Err(AslError::Divergent { t });
            }
            Ok(v)
        };
        let r = quadrature::integrate_pieces_fallible(&mut integrand, &points, 1e-14, 1e-13)?;
        if r.value <= -1.0 {
            return Err(AslError::IntegrationFailure(format!("moment generating function not positive at t = {t}")));
        }
        Ok(r.value.ln_1p())
    }
}

/// Agents together with their hypothesis set and cached LMGF evaluators.
#[derive(Debug, Clone)]
pub struct LearningTask {
    agents: Vec<AgentModel>,
    hypotheses: HypothesisSet,
    /// `evaluators[theta][k]`.
    evaluators: Vec<Vec<LmgfEvaluator>>,
}

impl LearningTask {
    /// Internally the true hypothesis always sits at index 0; a set with a
    /// different `true_index` is reordered by swapping it to the front.
    pub fn new(mut agents: Vec<AgentModel>, mut hypotheses: HypothesisSet) -> Result<Self> {
        hypotheses.validate()?;
        if agents.is_empty() {
            return Err(AslError::Config("at least one agent is required".into()));
        }
        for (k, a) in agents.iter().enumerate() {
            a.validate()?;
            if a.hypotheses() != hypotheses.len() {
                return Err(AslError::Config(format!(
                    "agent {} has {} likelihoods, expected {}",
                    k + 1,
                    a.hypotheses(),
                    hypotheses.len()
                )));
            }
        }
        let truth = hypotheses.true_index;
        if truth != 0 {
            hypotheses.labels.swap(0, truth);
            hypotheses.true_index = 0;
            for a in &mut agents {
                a.likelihoods.swap(0, truth);
            }
        }
        let evaluators = (0..hypotheses.len())
            .map(|theta| agents.iter().map(|a| LmgfEvaluator::new(a, theta)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { agents, hypotheses, evaluators })
    }

    pub fn from_agents(agents: Vec<AgentModel>) -> Result<Self> {
        let h = agents.first().map_or(0, AgentModel::hypotheses);
        Self::new(agents, HypothesisSet::numbered(h))
    }

    /// Rebuild every evaluator with the given method, e.g. to cross-check
    /// closed forms against quadrature.
    pub fn with_lmgf_method(mut self, method: LmgfMethod) -> Result<Self> {
        self.evaluators = (0..self.hypotheses.len())
            .map(|theta| {
                self.agents.iter().map(|a| LmgfEvaluator::with_method(a, theta, method)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self)
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    /// Hypotheses other than the truth.
    pub fn wrong_hypotheses(&self) -> std::ops::Range<usize> {
        1..self.hypotheses.len()
    }

    pub fn evaluator(&self, k: usize, theta: usize) -> &LmgfEvaluator {
        &self.evaluators[theta][k]
    }

    pub fn evaluators(&self, theta: usize) -> &[LmgfEvaluator] {
        &self.evaluators[theta]
    }

    pub fn check_perron(&self, pi: &PerronVector) -> Result<()> {
        if pi.len() != self.num_agents() {
            return Err(AslError::DomainError(format!(
                "Perron vector has {} entries for {} agents",
                pi.len(),
                self.num_agents()
            )));
        }
        Ok(())
    }

    /// `Lambda_ave(t; pi, theta) = sum_k Lambda_k(pi_k t; theta)`.
    pub fn lmgf_ave(&self, pi: &PerronVector, theta: usize, t: f64) -> Result<f64> {
        self.check_perron(pi)?;
        self.evaluators[theta].iter().zip(pi.as_slice()).map(|(e, &p)| e.eval(p * t)).sum()
    }
}

/// Single-agent LMGF.
pub fn lmgf(eval: &LmgfEvaluator, t: f64) -> Result<f64> {
    eval.eval(t)
}

pub fn lmgf_ave(task: &LearningTask, pi: &PerronVector, theta: usize, t: f64) -> Result<f64> {
    task.lmgf_ave(pi, theta, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Uninformative,
    Informative,
    Conflicting,
}

impl AgentClass {
    pub fn letter(self) -> char {
        match self {
            Self::Uninformative => 'U',
            Self::Informative => 'I',
            Self::Conflicting => 'C',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    pub tol: f64,
    /// Magnitude of the critical point assigned to uninformative agents.
    pub placeholder: f64,
    pub root_tol: f64,
    pub integration_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { tol: CLASSIFY_TOL, placeholder: DEFAULT_PLACEHOLDER, root_tol: ROOT_TOL, integration_tol: INTEGRATION_TOL }
    }
}

/// Classification of every agent against one wrong hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClassification {
    pub theta: usize,
    pub classes: Vec<AgentClass>,
    pub uninformative: Vec<usize>,
    pub informative: Vec<usize>,
    pub conflicting: Vec<usize>,
    pub d: Vec<f64>,
    pub rho: Vec<f64>,
    pub t_nc: Vec<f64>,
    pub phi_nc: Vec<f64>,
}

impl HypothesisClassification {
    /// `sum_k Phi_k^nc(theta)`.
    pub fn phi_sum(&self) -> f64 {
        self.phi_nc.iter().sum()
    }

    pub fn phi_min(&self) -> f64 {
        self.phi_nc.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentClassification {
    /// One entry per wrong hypothesis, in hypothesis order.
    pub per_hypothesis: Vec<HypothesisClassification>,
    /// Agents whose locally closest hypotheses include the truth.
    pub truth_consistent: Vec<usize>,
}

impl AgentClassification {
    pub fn for_theta(&self, theta: usize) -> &HypothesisClassification {
        &self.per_hypothesis[theta - 1]
    }
}

pub fn classify_agent(eval: &LmgfEvaluator, tol: f64) -> Result<AgentClass> {
    if eval.is_trivially_zero() {
        return Ok(AgentClass::Uninformative);
    }
    let mut zero = true;
    for &t in &PROBE_GRID {
        let nonzero = match eval.eval(t) {
            Ok(v) => v.abs() > tol,
            Err(AslError::Divergent { .. }) => true,
            Err(e) => return Err(e),
        };
        if nonzero {
            zero = false;
            break;
        }
    }
    Ok(if zero {
        AgentClass::Uninformative
    } else if eval.mean() > tol {
        AgentClass::Informative
    } else {
        AgentClass::Conflicting
    })
}

/// `t_k^nc(theta)`: negative zero of the agent's LMGF when informative, 0 when
/// conflicting and `-placeholder` when uninformative.
pub fn noncoop_critical_t(eval: &LmgfEvaluator, class: AgentClass, opts: &ClassifyOptions) -> Result<f64> {
    match class {
        AgentClass::Conflicting => Ok(0.0),
        AgentClass::Uninformative => Ok(-opts.placeholder),
        AgentClass::Informative => {
            let guess = if eval.variance() > 0.0 { -2.0 * eval.mean() / eval.variance() } else { -1.0 };
            roots::negative_zero(|t| eval.eval(t), guess, ROOT_CAP, opts.root_tol)
        }
    }
}

/// `Phi_k^nc(theta)`: positive for informative agents, 0 otherwise.
pub fn noncoop_exponent(eval: &LmgfEvaluator, class: AgentClass, t_nc: f64, opts: &ClassifyOptions) -> Result<f64> {
    match class {
        AgentClass::Informative => {
            let phi = exponent::phi_integral(|t| eval.eval(t), eval.mean(), t_nc, opts.integration_tol)?;
            Ok((-phi).max(0.0))
        }
        _ => Ok(0.0),
    }
}

pub fn classify_hypothesis(task: &LearningTask, theta: usize, opts: &ClassifyOptions) -> Result<HypothesisClassification> {
    if theta == 0 || theta >= task.num_hypotheses() {
        return Err(AslError::DomainError(format!("{theta} is not a wrong hypothesis index")));
    }
    let evals = task.evaluators(theta);
    let mut out = HypothesisClassification {
        theta,
        classes: Vec::with_capacity(evals.len()),
        uninformative: Vec::new(),
        informative: Vec::new(),
        conflicting: Vec::new(),
        d: Vec::with_capacity(evals.len()),
        rho: Vec::with_capacity(evals.len()),
        t_nc: Vec::with_capacity(evals.len()),
        phi_nc: Vec::with_capacity(evals.len()),
    };
    for (k, e) in evals.iter().enumerate() {
        let class = classify_agent(e, opts.tol)?;
        match class {
            AgentClass::Uninformative => out.uninformative.push(k),
            AgentClass::Informative => out.informative.push(k),
            AgentClass::Conflicting => out.conflicting.push(k),
        }
        let t = noncoop_critical_t(e, class, opts)?;
        out.phi_nc.push(noncoop_exponent(e, class, t, opts)?);
        out.classes.push(class);
        out.d.push(e.mean());
        out.rho.push(e.variance());
        out.t_nc.push(t);
    }
    Ok(out)
}

pub fn classify_agents(task: &LearningTask, opts: &ClassifyOptions) -> Result<AgentClassification> {
    let per_hypothesis = task
        .wrong_hypotheses()
        .map(|theta| classify_hypothesis(task, theta, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut truth_consistent = Vec::new();
    for (k, a) in task.agents().iter().enumerate() {
        if models::local_truth_set(a, models::LOCAL_TRUTH_TOL)?.contains(&0) {
            truth_consistent.push(k);
        }
    }
    Ok(AgentClassification { per_hypothesis, truth_consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tagged_stream;
    use proptest::prelude::*;

    fn g(m: f64, v: f64) -> DistributionModel {
        DistributionModel::gaussian(m, v)
    }

    /// Four agents observing N(0,1); truth hypothesis N(0.1,1) for everybody.
    pub(crate) fn illustrative_task() -> LearningTask {
        let f = g(0.0, 1.0);
        let agents = [-0.1, 0.2, 0.0, 0.1]
            .iter()
            .map(|&m| AgentModel::new(f.clone(), vec![g(0.1, 1.0), g(m, 1.0)]).unwrap())
            .collect();
        LearningTask::from_agents(agents).unwrap()
    }

    fn laplace_agent(signal_shift: f64) -> AgentModel {
        AgentModel::new(
            DistributionModel::laplace(signal_shift, 1.0),
            vec![
                DistributionModel::laplace(0.0, 1.0),
                DistributionModel::laplace(0.1, 1.0),
                DistributionModel::laplace(0.2, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_at_origin() {
        let task = illustrative_task();
        for k in 0..4 {
            assert_eq!(task.evaluator(k, 1).eval(0.0).unwrap(), 0.0);
        }
        let e = LmgfEvaluator::new(&laplace_agent(0.0), 2).unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_closed_form_example() {
        let task = illustrative_task();
        let e = task.evaluator(1, 1);
        assert_eq!(e.method(), LmgfMethod::ClosedFormGaussian);
        assert!((e.mean() - 0.015).abs() < 1e-15);
        assert!((e.variance() - 0.01).abs() < 1e-15);
        assert!(e.eval(-3.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn illustrative_classification() {
        let task = illustrative_task();
        let c = classify_hypothesis(&task, 1, &ClassifyOptions::default()).unwrap();
        assert_eq!(c.uninformative, vec![3]);
        assert_eq!(c.informative, vec![1]);
        assert_eq!(c.conflicting, vec![0, 2]);
        assert!((c.t_nc[1] + 3.0).abs() < 1e-8);
        assert_eq!(c.t_nc[0], 0.0);
        assert_eq!(c.t_nc[3], -1.0);
        assert!((c.phi_nc[1] - 0.0225).abs() < 1e-10);
        assert_eq!(c.phi_nc[0], 0.0);
        assert_eq!(c.phi_nc[2], 0.0);
    }

    #[test]
    fn accurate_model_has_no_conflicts_and_unit_roots() {
        let agents = vec![laplace_agent(0.0), laplace_agent(0.0)];
        let task = LearningTask::from_agents(agents).unwrap();
        let c = classify_agents(&task, &ClassifyOptions::default()).unwrap();
        for h in &c.per_hypothesis {
            assert!(h.conflicting.is_empty());
            for &k in &h.informative {
                assert!((h.t_nc[k] + 1.0).abs() < 1e-8, "{}", h.t_nc[k]);
            }
        }
        assert_eq!(c.truth_consistent, vec![0, 1]);
    }

    #[test]
    fn noisy_gaussian_root() {
        for eps in [0.0033, 0.1, 1.0] {
            let a = AgentModel::noisy_gaussian(&[0.3, 0.3, 0.0], 3.0, eps).unwrap();
            let e = LmgfEvaluator::new(&a, 2).unwrap();
            let t = noncoop_critical_t(&e, AgentClass::Informative, &ClassifyOptions::default()).unwrap();
            assert!((t + 1.0 / (1.0 + eps)).abs() < 1e-10);
            let phi = noncoop_exponent(&e, AgentClass::Informative, t, &ClassifyOptions::default()).unwrap();
            assert!((phi - 0.09 / (12.0 * (1.0 + eps))).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_likelihoods_are_uninformative() {
        let a = AgentModel::accurate(vec![g(0.0, 1.0), g(0.0, 1.0)]).unwrap();
        let e = LmgfEvaluator::new(&a, 1).unwrap();
        assert_eq!(classify_agent(&e, CLASSIFY_TOL).unwrap(), AgentClass::Uninformative);
    }

    #[test]
    fn pmf_paths_agree() {
        let a = AgentModel::new(
            DistributionModel::pmf(vec![0.2, 0.5, 0.3]),
            vec![DistributionModel::pmf(vec![0.3, 0.4, 0.3]), DistributionModel::pmf(vec![0.1, 0.6, 0.3])],
        )
        .unwrap();
        let exact = LmgfEvaluator::new(&a, 1).unwrap();
        assert_eq!(exact.method(), LmgfMethod::ExactSum);
        let quad = LmgfEvaluator::with_method(&a, 1, LmgfMethod::Quadrature).unwrap();
        for t in [-5.0, -2.0, -0.3, 0.7, 3.0] {
            assert!((exact.eval(t).unwrap() - quad.eval(t).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_matches_gaussian_closed_form() {
        let a = AgentModel::new(g(0.05, 1.3), vec![g(0.1, 1.0), g(-0.3, 1.0)]).unwrap();
        let closed = LmgfEvaluator::new(&a, 1).unwrap();
        let quad = LmgfEvaluator::with_method(&a, 1, LmgfMethod::Quadrature).unwrap();
        for t in [-4.0, -1.0, -0.1, 0.2, 2.0] {
            let (c, q) = (closed.eval(t).unwrap(), quad.eval(t).unwrap());
            // Truncating the signal support at 1e-16 of its peak costs a few
            // 1e-12 once the tilted density drifts towards the cut.
            assert!((c - q).abs() < 1e-10 * c.abs().max(1e-3), "t={t}: {c} vs {q}");
        }
    }

    #[test]
    fn unequal_variance_gaussian_diverges() {
        // x = log N(0, 1) - log N(0, 4) = ln 2 - 3 xi^2 / 8, so the moment
        // generating function under N(0, 1) is infinite for t <= -4/3.
        let a = AgentModel::accurate(vec![g(0.0, 1.0), g(0.0, 4.0)]).unwrap();
        let e = LmgfEvaluator::new(&a, 1).unwrap();
        assert!(matches!(e.eval(-2.0), Err(AslError::Divergent { .. })));
        // E exp(t (ln 2 - 3 xi^2 / 8)) = 2^t / sqrt(1 + 3t/4)
        let t = -0.5;
        let exact = t * 2f64.ln() - 0.5 * (1.0 + 0.75 * t).ln();
        assert!((e.eval(t).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn laplace_quadrature_matches_monte_carlo() {
        let a = laplace_agent(0.05);
        let mut rng = tagged_stream(3, 9);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| models::log_likelihood_ratio(&a, 2, models::sample_signal(&a, &mut rng)).unwrap())
            .collect();
        let e = LmgfEvaluator::new(&a, 2).unwrap();
        for t in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
            let w: Vec<f64> = xs.iter().map(|x| (t * x).exp()).collect();
            let m = w.iter().sum::<f64>() / n as f64;
            let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            // Delta method: se(log mean) = se(mean) / mean.
            let se = (var / n as f64).sqrt() / m;
            let q = e.eval(t).unwrap();
            assert!((q - m.ln()).abs() < 3.0 * se, "t={t}: {q} vs {} (se {se})", m.ln());
        }
    }

    #[test]
    fn lmgf_ave_single_agent_and_additivity() {
        let task = illustrative_task();
        let pi = PerronVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for t in [-3.0, -0.4, 1.1] {
            let direct = task.lmgf_ave(&pi, 1, t).unwrap();
            let summed: f64 = (0..4).map(|k| lmgf(task.evaluator(k, 1), pi[k] * t).unwrap()).sum();
            assert!((direct - summed).abs() < 1e-12);
        }
        let single = LearningTask::from_agents(vec![laplace_agent(0.0)]).unwrap();
        let one = PerronVector::new(vec![1.0]).unwrap();
        assert_eq!(single.lmgf_ave(&one, 2, -0.7).unwrap(), single.evaluator(0, 2).eval(-0.7).unwrap());
    }

    fn check_shape(e: &LmgfEvaluator) {
        let ts: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| e.eval(t).unwrap()).collect();
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
        for h in [1e-6, -1e-6] {
            assert!((e.eval(h).unwrap() / h - e.mean()).abs() < 1e-4);
        }
    }

    #[test]
    fn convexity_and_slope_at_origin() {
        check_shape(&LmgfEvaluator::new(&laplace_agent(0.05), 1).unwrap());
        check_shape(&LmgfEvaluator::new(&laplace_agent(-0.3), 2).unwrap());
        let task = illustrative_task();
        for k in 0..4 {
            check_shape(task.evaluator(k, 1));
        }
    }

    #[test]
    fn root_sign_follows_mean() {
        // Conflicting agent with d < 0 has its nonzero root at positive t.
        let task = illustrative_task();
        let e = task.evaluator(2, 1);
        assert!(e.mean() < 0.0);
        let root = -2.0 * e.mean() / e.variance();
        assert!(root > 0.0);
        assert!(e.eval(root).unwrap().abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn laplace_lmgf_convex(shift in -0.5f64..0.5, scale in 0.5f64..2.0) {
            let a = AgentModel::new(
                DistributionModel::laplace(shift, scale),
                vec![DistributionModel::laplace(0.0, 1.0), DistributionModel::laplace(0.3, 1.2)],
            ).unwrap();
            let e = LmgfEvaluator::new(&a, 1).unwrap();
            let ts = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
            let v: Vec<f64> = ts.iter().map(|&t| e.eval(t).unwrap()).collect();
            for w in v.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
        }
    }
}
