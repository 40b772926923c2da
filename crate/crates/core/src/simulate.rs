//! Monte Carlo simulation of the adaptive social learning recursion.
//!
//! Beliefs are tracked through the log-ratios
//! `lambda_k(theta) = log mu_k(theta_1) / mu_k(theta)` for every wrong
//! hypothesis. One step adapts with the fresh log-likelihood ratio and then
//! combines over neighbors:
//!
//! ```text
//! nu_k     = (1 - delta) lambda_k + delta x_k
//! lambda_k = sum_l a_lk nu_l
//! ```
//!
//! Each (replication, agent) pair draws from its own seeded stream, so
//! results do not depend on how replications are scheduled across threads.

use std::io::{self, Write};

use log::warn;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AslError, Result};
use crate::lmgf::LearningTask;
use crate::models::{self, DistributionModel, LlrKernel};
use crate::network::CombinationMatrix;
use crate::rng::{agent_stream, StreamRng};

/// Curves longer than this are recorded with a stride.
pub const MAX_RECORDED_STEPS: usize = 5000;
pub const MAX_SIMULATED_HYPOTHESES: usize = 40;
const BELIEF_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthChange {
    /// First step whose observations follow `truth`.
    pub start: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBeliefs {
    Uniform,
    /// One belief vector per agent.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub delta: f64,
    pub horizon: usize,
    pub replications: usize,
    #[serde(default = "default_schedule")]
    pub truth_schedule: Vec<TruthChange>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beliefs")]
    pub initial_beliefs: InitialBeliefs,
}

fn default_schedule() -> Vec<TruthChange> {
    vec![TruthChange { start: 0, truth: 0 }]
}

fn default_beliefs() -> InitialBeliefs {
    InitialBeliefs::Uniform
}

impl SimulationConfig {
    pub fn stationary(delta: f64, horizon: usize, replications: usize, seed: u64) -> Self {
        Self {
            delta,
            horizon,
            replications,
            truth_schedule: default_schedule(),
            seed,
            initial_beliefs: InitialBeliefs::Uniform,
        }
    }

    pub fn validate(&self, n: usize, h: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AslError::Config(format!("step size must lie in (0, 1), got {}", self.delta)));
        }
        if self.replications == 0 {
            return Err(AslError::Config("at least one replication is required".into()));
        }
        if h > MAX_SIMULATED_HYPOTHESES {
            return Err(AslError::Config(format!("simulation supports at most {MAX_SIMULATED_HYPOTHESES} hypotheses")));
        }
        match self.truth_schedule.first() {
            Some(c) if c.start == 0 => {}
            _ => return Err(AslError::Config("truth schedule must start at step 0".into())),
        }
        for w in self.truth_schedule.windows(2) {
            if w[1].start <= w[0].start {
                return Err(AslError::Config("truth schedule steps must increase".into()));
            }
        }
        if let Some(c) = self.truth_schedule.iter().find(|c| c.truth >= h) {
            return Err(AslError::Config(format!("scheduled truth {} out of range", c.truth)));
        }
        if let InitialBeliefs::Explicit(b) = &self.initial_beliefs {
            BeliefState::from_beliefs(b).and_then(|s| {
                if s.agents() == n && s.hypotheses() == h {
                    Ok(())
                } else {
                    Err(AslError::Config("initial beliefs have the wrong shape".into()))
                }
            })?;
        }
        Ok(())
    }

    pub fn truth_at(&self, step: usize) -> usize {
        self.truth_schedule.iter().take_while(|c| c.start <= step).last().map_or(0, |c| c.truth)
    }

    /// Steps at which curves are recorded: every step up to
    /// `MAX_RECORDED_STEPS`, otherwise a uniform stride plus the horizon.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let stride = if self.horizon <= MAX_RECORDED_STEPS { 1 } else { self.horizon.div_ceil(MAX_RECORDED_STEPS) };
        let mut steps: Vec<usize> = (0..=self.horizon).step_by(stride).collect();
        if *steps.last().expect("step 0") != self.horizon {
            steps.push(self.horizon);
        }
        steps
    }

    fn initial_state(&self, n: usize, h: usize) -> Result<BeliefState> {
        match &self.initial_beliefs {
            InitialBeliefs::Uniform => Ok(BeliefState::uniform(n, h)),
            InitialBeliefs::Explicit(b) => BeliefState::from_beliefs(b),
        }
    }
}

/// Log-belief ratios of every agent, `lambda[k * (H - 1) + theta - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    n: usize,
    h: usize,
    lambda: Vec<f64>,
}

impl BeliefState {
    pub fn uniform(n: usize, h: usize) -> Self {
        Self { n, h, lambda: vec![0.0; n * (h - 1)] }
    }

    pub fn from_beliefs(beliefs: &[Vec<f64>]) -> Result<Self> {
        let n = beliefs.len();
        let h = beliefs.first().map_or(0, Vec::len);
        if n == 0 || h < 2 {
            return Err(AslError::Config("beliefs need at least one agent and two hypotheses".into()));
        }
        let mut lambda = Vec::with_capacity(n * (h - 1));
        for (k, mu) in beliefs.iter().enumerate() {
            let s: f64 = mu.iter().sum();
            if mu.len() != h || mu.iter().any(|p| !(p.is_finite() && *p > 0.0)) || (s - 1.0).abs() > BELIEF_SUM_TOL {
                return Err(AslError::Config(format!("belief of agent {} must be a positive probability vector", k + 1)));
            }
            lambda.extend(mu[1..].iter().map(|p| mu[0].ln() - p.ln()));
        }
        Ok(Self { n, h, lambda })
    }

    pub fn from_lambda(n: usize, h: usize, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != n * (h - 1) {
            return Err(AslError::DomainError("log-ratio vector has the wrong length".into()));
        }
        Ok(Self { n, h, lambda })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn hypotheses(&self) -> usize {
        self.h
    }

    /// `lambda_k(theta)` for `theta >= 1`; 0 for the truth.
    pub fn lambda(&self, k: usize, theta: usize) -> f64 {
        if theta == 0 {
            0.0
        } else {
            self.lambda[k * (self.h - 1) + theta - 1]
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Beliefs `mu_k` reconstructed from the log-ratios.
    pub fn beliefs(&self, k: usize) -> Vec<f64> {
        let neg: Vec<f64> = (0..self.h).map(|th| -self.lambda(k, th)).collect();
        let max = neg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = neg.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    /// Belief argmax, lowest index among ties.
    pub fn decision(&self, k: usize) -> usize {
        decision(&self.lambda[k * (self.h - 1)..(k + 1) * (self.h - 1)])
    }
}

fn decision(lam: &[f64]) -> usize {
    let mut best = 0;
    let mut min = 0.0;
    for (i, &v) in lam.iter().enumerate() {
        if v < min {
            min = v;
            best = i + 1;
        }
    }
    best
}

/// Error contribution of one agent in units of `1 / unit`. Ties between
/// maximizers are broken uniformly at random and counted in expectation.
/// `shares[0]` is a full error; `shares[m]` the expected error with the
/// truth among `m` tied maximizers.
#[inline]
fn error_units(lam: &[f64], truth: usize, shares: &[u128]) -> u128 {
    let mut min = 0.0;
    let mut ties = 1;
    for &v in lam {
        if v < min {
            min = v;
            ties = 1;
        } else if v == min {
            ties += 1;
        }
    }
    let truth_v = if truth == 0 { 0.0 } else { lam[truth - 1] };
    if truth_v != min {
        return shares[0];
    }
    shares[ties]
}

fn tie_shares(h: usize) -> Vec<u128> {
    let unit = tie_unit(h);
    std::iter::once(unit).chain((1..=h as u128).map(|m| unit - unit / m)).collect()
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Least common multiple of `1..=h`.
fn tie_unit(h: usize) -> u128 {
    (1..=h as u128).fold(1, |acc, m| acc / gcd(acc, m) * m)
}

/// One recursion step in log-ratio form.
pub fn asl_step(
    task: &LearningTask,
    a: &CombinationMatrix,
    state: &BeliefState,
    signals: &[f64],
    delta: f64,
) -> Result<BeliefState> {
    let n = task.num_agents();
    let hm1 = task.num_hypotheses() - 1;
    if a.n() != n || signals.len() != n || state.n != n || state.h != hm1 + 1 {
        return Err(AslError::DomainError("dimension mismatch in recursion step".into()));
    }
    let mut nu = vec![0.0; n * hm1];
    for (k, agent) in task.agents().iter().enumerate() {
        for th in 1..=hm1 {
            let x = models::log_likelihood_ratio(agent, th, signals[k])?;
            nu[k * hm1 + th - 1] = (1.0 - delta) * state.lambda(k, th) + delta * x;
        }
    }
    let mut lambda = vec![0.0; n * hm1];
    for (k, inw) in a.in_weights().iter().enumerate() {
        for &(l, w) in inw {
            for j in 0..hm1 {
                lambda[k * hm1 + j] += w * nu[l * hm1 + j];
            }
        }
    }
    BeliefState::from_lambda(n, hm1 + 1, lambda)
}

/// One recursion step on the beliefs themselves: geometric adaptation
/// `psi ~ mu^(1 - delta) L^delta` followed by geometric combination.
pub fn belief_step(
    task: &LearningTask,
    a: &CombinationMatrix,
    beliefs: &[Vec<f64>],
    signals: &[f64],
    delta: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = task.num_agents();
    let h = task.num_hypotheses();
    if a.n() != n || signals.len() != n || beliefs.len() != n {
        return Err(AslError::DomainError("dimension mismatch in recursion step".into()));
    }
    let mut log_psi = vec![vec![0.0; h]; n];
    for (k, agent) in task.agents().iter().enumerate() {
        for th in 0..h {
            let ll = agent.likelihoods[th].log_density(signals[k]);
            if ll == f64::NEG_INFINITY {
                return Err(AslError::SupportViolation { observation: signals[k] });
            }
            log_psi[k][th] = (1.0 - delta) * beliefs[k][th].ln() + delta * ll;
        }
        let max = log_psi[k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm = max + log_psi[k].iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        log_psi[k].iter_mut().for_each(|v| *v -= norm);
    }
    let mut out = Vec::with_capacity(n);
    for inw in a.in_weights() {
        let mut log_mu = vec![0.0; h];
        for &(l, w) in &inw {
            for th in 0..h {
                log_mu[th] += w * log_psi[l][th];
            }
        }
        let max = log_mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut mu: Vec<f64> = log_mu.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|v| *v /= s);
        out.push(mu);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Sampler {
    Gaussian { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
    Pmf { cumulative: Vec<f64> },
}

impl Sampler {
    /// Additive Gaussian noise on a Gaussian signal is folded into a single
    /// draw with the summed variance, which has the same distribution.
    fn new(d: &DistributionModel) -> Self {
        match d {
            DistributionModel::Gaussian { mean, variance } => Self::Gaussian { mean: *mean, sd: variance.sqrt() },
            DistributionModel::Laplace { location, scale } => Self::Laplace { location: *location, scale: *scale },
            DistributionModel::FinitePmf { probabilities } => {
                let mut acc = 0.0;
                let mut cumulative: Vec<f64> = probabilities
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                let last = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                for c in cumulative.iter_mut().skip(last) {
                    *c = f64::INFINITY;
                }
                Self::Pmf { cumulative }
            }
        }
    }

    #[inline]
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Self::Laplace { location, scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::Pmf { cumulative } => {
                let u: f64 = rng.random();
                cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1) as f64
            }
        }
    }
}

/// Log-likelihood ratios of every (hypothesis, agent) pair, stored
/// hypothesis-major: index `j * n + k` for hypothesis `j + 1`.
enum KernelBank {
    /// `slope * x + intercept`; zero kernels have both set to 0.
    Linear { slope: Vec<f64>, intercept: Vec<f64> },
    General(Vec<LlrKernel>),
}

impl KernelBank {
    fn new(task: &LearningTask) -> Self {
        let (n, h) = (task.num_agents(), task.num_hypotheses());
        let kernels: Vec<LlrKernel> =
            (1..h).flat_map(|th| task.agents().iter().map(move |ag| LlrKernel::new(ag, th))).collect();
        let mut slope = vec![0.0; kernels.len()];
        let mut intercept = vec![0.0; kernels.len()];
        for (i, k) in kernels.iter().enumerate() {
            match k {
                LlrKernel::Zero => {}
                LlrKernel::Linear { slope: s, intercept: c } => {
                    slope[i] = *s;
                    intercept[i] = *c;
                }
                _ => return Self::General(kernels),
            }
        }
        debug_assert_eq!(slope.len(), n * (h - 1));
        Self::Linear { slope, intercept }
    }
}

enum Combiner {
    /// Row-major `a[l][k]`.
    Dense(Vec<f64>),
    /// Incoming `(l, a[l][k])` per receiving agent.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// Precomputed kernels, samplers and combination weights.
struct Engine {
    n: usize,
    hm1: usize,
    kernels: KernelBank,
    /// `samplers[truth][k]`.
    samplers: Vec<Vec<Sampler>>,
    combiner: Combiner,
}

impl Engine {
    fn new(task: &LearningTask, a: &CombinationMatrix) -> Result<Self> {
        let n = task.num_agents();
        let h = task.num_hypotheses();
        if a.n() != n {
            return Err(AslError::DomainError(format!("matrix is {0}x{0} but there are {n} agents", a.n())));
        }
        a.validate()?;
        let samplers =
            (0..h).map(|truth| task.agents().iter().map(|ag| Sampler::new(&ag.observed_signal(truth))).collect()).collect();
        let in_weights = a.in_weights();
        let nnz: usize = in_weights.iter().map(Vec::len).sum();
        let combiner = if 2 * nnz >= n * n {
            Combiner::Dense(a.rows().concat())
        } else {
            Combiner::Sparse(in_weights)
        };
        Ok(Self { n, hm1: h - 1, kernels: KernelBank::new(task), samplers, combiner })
    }

    /// Run one replication, calling `observe(record_index, step, truth, lambda)`
    /// at every recorded step with `lambda` in agent-major order.
    fn replicate<F>(&self, cfg: &SimulationConfig, init: &[f64], steps: &[usize], rep: u64, mut observe: F)
    where
        F: FnMut(usize, usize, usize, &[f64]),
    {
        let (n, hm1) = (self.n, self.hm1);
        let mut rngs: Vec<StreamRng> = (0..n).map(|k| agent_stream(cfg.seed, rep, k as u64)).collect();
        // Hypothesis-major working copies.
        let mut lambda = vec![0.0; n * hm1];
        for k in 0..n {
            for j in 0..hm1 {
                lambda[j * n + k] = init[k * hm1 + j];
            }
        }
        let mut report = init.to_vec();
        let mut nu = vec![0.0; n * hm1];
        let mut xi = vec![0.0; n];
        let mut next_record = 0;
        let mut schedule = cfg.truth_schedule.iter().peekable();
        let mut truth = schedule.next().map_or(0, |c| c.truth);
        if steps.first() == Some(&0) {
            observe(0, 0, truth, &report);
            next_record = 1;
        }
        let keep = 1.0 - cfg.delta;
        let delta = cfg.delta;
        for i in 1..=cfg.horizon {
            while let Some(c) = schedule.next_if(|c| c.start <= i) {
                truth = c.truth;
            }
            for ((x, s), r) in xi.iter_mut().zip(&self.samplers[truth]).zip(rngs.iter_mut()) {
                *x = s.sample(r);
            }
            match &self.kernels {
                KernelBank::Linear { slope, intercept } => {
                    for j in 0..hm1 {
                        let r = j * n..(j + 1) * n;
                        for ((((v, l), s), c), x) in
                            nu[r.clone()].iter_mut().zip(&lambda[r.clone()]).zip(&slope[r.clone()]).zip(&intercept[r]).zip(&xi)
                        {
                            *v = keep * l + delta * (s * x + c);
                        }
                    }
                }
                KernelBank::General(kernels) => {
                    for j in 0..hm1 {
                        let r = j * n..(j + 1) * n;
                        for (((v, l), kern), &x) in nu[r.clone()].iter_mut().zip(&lambda[r.clone()]).zip(&kernels[r]).zip(&xi) {
                            *v = keep * l + delta * kern.eval(x);
                        }
                    }
                }
            }
            match &self.combiner {
                Combiner::Dense(rows) => {
                    // Accumulate row by row so the inner loop runs over
                    // contiguous receivers.
                    for j in 0..hm1 {
                        let src = &nu[j * n..(j + 1) * n];
                        let out = &mut lambda[j * n..(j + 1) * n];
                        out.fill(0.0);
                        for (&v, row) in src.iter().zip(rows.chunks_exact(n)) {
                            for (o, w) in out.iter_mut().zip(row) {
                                *o += w * v;
                            }
                        }
                    }
                }
                Combiner::Sparse(in_weights) => {
                    for j in 0..hm1 {
                        let src = &nu[j * n..(j + 1) * n];
                        let out = &mut lambda[j * n..(j + 1) * n];
                        for (o, inw) in out.iter_mut().zip(in_weights) {
                            *o = inw.iter().map(|&(l, w)| w * src[l]).sum();
                        }
                    }
                }
            }
            if next_record < steps.len() && steps[next_record] == i {
                for k in 0..n {
                    for j in 0..hm1 {
                        report[k * hm1 + j] = lambda[j * n + k];
                    }
                }
                observe(next_record, i, truth, &report);
                next_record += 1;
            }
        }
    }
}

/// Decisions and log-ratios of one replication at the recorded steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub steps: Vec<usize>,
    /// `decisions[record][k]`: belief argmax (lowest index among ties).
    pub decisions: Vec<Vec<usize>>,
    /// `lambda[record][k * (H - 1) + theta - 1]`.
    pub lambda: Vec<Vec<f64>>,
    pub truth: Vec<usize>,
}

impl Replication {
    /// CSV with columns `step,agent,theta,lambda` (1-based agent numbers,
    /// hypothesis labels).
    pub fn write_csv<W: Write>(&self, labels: &[String], mut w: W) -> io::Result<()> {
        writeln!(w, "step,agent,theta,lambda")?;
        let hm1 = labels.len() - 1;
        for (r, &step) in self.steps.iter().enumerate() {
            for (idx, v) in self.lambda[r].iter().enumerate() {
                let (k, j) = (idx / hm1, idx % hm1);
                writeln!(w, "{step},{},{},{v}", k + 1, labels[j + 1])?;
            }
        }
        Ok(())
    }
}

pub fn run_replication(
    task: &LearningTask,
    a: &CombinationMatrix,
    cfg: &SimulationConfig,
    replication: u64,
) -> Result<Replication> {
    let (n, h) = (task.num_agents(), task.num_hypotheses());
    cfg.validate(n, h)?;
    let engine = Engine::new(task, a)?;
    let init = cfg.initial_state(n, h)?;
    let steps = cfg.recorded_steps();
    let mut out = Replication {
        steps: Vec::with_capacity(steps.len()),
        decisions: Vec::with_capacity(steps.len()),
        lambda: Vec::with_capacity(steps.len()),
        truth: Vec::with_capacity(steps.len()),
    };
    if cfg.horizon == 0 {
        return Ok(out);
    }
    engine.replicate(cfg, init.lambdas(), &steps, replication, |_, step, truth, lam| {
        out.steps.push(step);
        out.truth.push(truth);
        out.decisions.push(lam.chunks(h - 1).map(decision).collect());
        out.lambda.push(lam.to_vec());
    });
    Ok(out)
}

/// Estimated error probabilities at the recorded steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub delta: f64,
    pub replications: usize,
    pub steps: Vec<usize>,
    /// `agent_p[record][k]`.
    pub agent_p: Vec<Vec<f64>>,
    pub agent_stderr: Vec<Vec<f64>>,
    pub average: Vec<f64>,
    pub average_stderr: Vec<f64>,
}

fn stderr(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

impl ErrorCurve {
    pub fn terminal_agent(&self) -> &[f64] {
        self.agent_p.last().map_or(&[], Vec::as_slice)
    }

    pub fn terminal_average(&self) -> f64 {
        self.average.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with columns `step,agent,p_hat,stderr`; `agent` is 1-based or `ave`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,agent,p_hat,stderr")?;
        for (r, &step) in self.steps.iter().enumerate() {
            for (k, (p, s)) in self.agent_p[r].iter().zip(&self.agent_stderr[r]).enumerate() {
                writeln!(w, "{step},{},{p},{s}", k + 1)?;
            }
            writeln!(w, "{step},ave,{},{}", self.average[r], self.average_stderr[r])?;
        }
        Ok(())
    }
}

/// Monte Carlo output: error curve and, optionally, terminal log-ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub curve: ErrorCurve,
    /// `terminal_lambda[rep][k * (H - 1) + theta - 1]`, when collected.
    pub terminal_lambda: Option<Vec<Vec<f64>>>,
}

/// Sample mean and standard error of terminal `lambda_k(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    /// `mean[k][theta - 1]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl MonteCarlo {
    pub fn lambda_summary(&self, hypotheses: usize) -> Option<LambdaSummary> {
        let samples = self.terminal_lambda.as_ref()?;
        let hm1 = hypotheses - 1;
        let cells = samples.first()?.len();
        let r = samples.len() as f64;
        let mut mean = vec![0.0; cells];
        for s in samples {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= r);
        let mut var = vec![0.0; cells];
        for s in samples {
            var.iter_mut().zip(s).zip(&mean).for_each(|((acc, v), m)| *acc += (v - m).powi(2));
        }
        let se: Vec<f64> = var.iter().map(|v| (v / (r - 1.0).max(1.0) / r).sqrt()).collect();
        Some(LambdaSummary {
            mean: mean.chunks(hm1).map(<[f64]>::to_vec).collect(),
            stderr: se.chunks(hm1).map(<[f64]>::to_vec).collect(),
        })
    }
}

pub fn run_monte_carlo(
    task: &LearningTask,
    a: &CombinationMatrix,
    cfg: &SimulationConfig,
    collect_terminal_lambda: bool,
) -> Result<MonteCarlo> {
    monte_carlo_at(task, a, cfg, cfg.recorded_steps(), collect_terminal_lambda)
}

fn monte_carlo_at(
    task: &LearningTask,
    a: &CombinationMatrix,
    cfg: &SimulationConfig,
    steps: Vec<usize>,
    collect_terminal_lambda: bool,
) -> Result<MonteCarlo> {
    let (n, h) = (task.num_agents(), task.num_hypotheses());
    cfg.validate(n, h)?;
    let engine = Engine::new(task, a)?;
    let init = cfg.initial_state(n, h)?;
    let unit = tie_unit(h);
    let shares = tie_shares(h);
    let cells = steps.len() * n;
    let hm1 = h - 1;

    let run = |rep: usize, acc: &mut Vec<u128>, terminal: Option<&mut [f64]>| {
        let mut terminal = terminal;
        engine.replicate(cfg, init.lambdas(), &steps, rep as u64, |r, step, truth, lam| {
            let row = &mut acc[r * n..(r + 1) * n];
            for (k, cell) in row.iter_mut().enumerate() {
                *cell += error_units(&lam[k * hm1..(k + 1) * hm1], truth, &shares);
            }
            if step == cfg.horizon {
                if let Some(t) = terminal.as_deref_mut() {
                    t.copy_from_slice(lam);
                }
            }
        });
        if cfg.horizon == 0 {
            if let Some(t) = terminal {
                t.copy_from_slice(init.lambdas());
            }
        }
    };

    let mut terminal_flat = if collect_terminal_lambda { vec![0.0; cfg.replications * n * hm1] } else { Vec::new() };

    #[cfg(feature = "parallel")]
    let counts: Vec<u128> = {
        use rayon::prelude::*;
        let add = |mut a: Vec<u128>, b: Vec<u128>| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        };
        if collect_terminal_lambda {
            terminal_flat
                .par_chunks_mut(n * hm1)
                .enumerate()
                .fold(|| vec![0u128; cells], |mut acc, (rep, chunk)| {
                    run(rep, &mut acc, Some(chunk));
                    acc
                })
                .reduce(|| vec![0u128; cells], add)
        } else {
            (0..cfg.replications)
                .into_par_iter()
                .fold(|| vec![0u128; cells], |mut acc, rep| {
                    run(rep, &mut acc, None);
                    acc
                })
                .reduce(|| vec![0u128; cells], add)
        }
    };
    #[cfg(not(feature = "parallel"))]
    let counts: Vec<u128> = {
        let mut acc = vec![0u128; cells];
        if collect_terminal_lambda {
            for (rep, chunk) in terminal_flat.chunks_mut(n * hm1).enumerate() {
                run(rep, &mut acc, Some(chunk));
            }
        } else {
            for rep in 0..cfg.replications {
                run(rep, &mut acc, None);
            }
        }
        acc
    };

    let denom = unit as f64 * cfg.replications as f64;
    let mut agent_p = Vec::with_capacity(steps.len());
    let mut agent_stderr = Vec::with_capacity(steps.len());
    let mut average = Vec::with_capacity(steps.len());
    let mut average_stderr = Vec::with_capacity(steps.len());
    for row in counts.chunks(n) {
        let p: Vec<f64> = row.iter().map(|&c| c as f64 / denom).collect();
        let ave = row.iter().sum::<u128>() as f64 / (denom * n as f64);
        agent_stderr.push(p.iter().map(|&x| stderr(x, cfg.replications)).collect());
        agent_p.push(p);
        average_stderr.push(stderr(ave, cfg.replications));
        average.push(ave);
    }
    let curve = ErrorCurve {
        delta: cfg.delta,
        replications: cfg.replications,
        steps,
        agent_p,
        agent_stderr,
        average,
        average_stderr,
    };
    let terminal_lambda =
        collect_terminal_lambda.then(|| terminal_flat.chunks(n * hm1).map(<[f64]>::to_vec).collect());
    Ok(MonteCarlo { curve, terminal_lambda })
}

pub fn estimate_error_prob(task: &LearningTask, a: &CombinationMatrix, cfg: &SimulationConfig) -> Result<ErrorCurve> {
    run_monte_carlo(task, a, cfg, false).map(|m| m.curve)
}

/// Error curve holding only the terminal step.
pub fn terminal_error(task: &LearningTask, a: &CombinationMatrix, cfg: &SimulationConfig) -> Result<ErrorCurve> {
    let memory = (1.0 - cfg.delta).powf(cfg.horizon as f64);
    if memory >= 1e-3 {
        warn!("horizon {} is short for step size {}: (1 - delta)^horizon = {memory:.3e}", cfg.horizon, cfg.delta);
    }
    monte_carlo_at(task, a, cfg, vec![cfg.horizon], false).map(|m| m.curve)
}

/// Per-agent error probability at the horizon.
pub fn steady_state_error(task: &LearningTask, a: &CombinationMatrix, cfg: &SimulationConfig) -> Result<Vec<f64>> {
    Ok(terminal_error(task, a, cfg)?.terminal_agent().to_vec())
}

/// `log(1 - sqrt(1 - omega)) / log(1 - delta)`.
pub fn adaptation_time_theory(omega: f64, delta: f64) -> Result<f64> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(AslError::DomainError(format!("omega must lie in (0, 1], got {omega}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AslError::DomainError(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok((1.0 - (1.0 - omega).sqrt()).ln() / (1.0 - delta).ln())
}

/// `[1 - (1 - delta)^i]^2`.
pub fn eta(delta: f64, i: usize) -> f64 {
    let r = 1.0 - (1.0 - delta).powf(i as f64);
    r * r
}

/// First recorded step after which `log p_ave,i <= (1 - omega) log p_ave`
/// holds for the rest of the curve, with `p_ave` the terminal average.
pub fn adaptation_time_simulated(curve: &ErrorCurve, omega: f64) -> Result<usize> {
    adaptation_time_against(curve, omega, curve.terminal_average())
}

/// As [`adaptation_time_simulated`] with an externally supplied steady-state
/// error probability.
pub fn adaptation_time_against(curve: &ErrorCurve, omega: f64, steady: f64) -> Result<usize> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(AslError::DomainError(format!("omega must lie in (0, 1), got {omega}")));
    }
    if !(steady > 0.0 && steady < 1.0) {
        return Err(AslError::DomainError(format!("steady-state error {steady} must lie in (0, 1)")));
    }
    let threshold = (1.0 - omega) * steady.ln();
    let mut first = None;
    for (r, &p) in curve.average.iter().enumerate().rev() {
        if p.ln() <= threshold {
            first = Some(curve.steps[r]);
        } else {
            break;
        }
    }
    first.ok_or(AslError::NotReached)
}

/// Negated least-squares slope of `log p` on `1/delta`; estimates the
/// error exponent from `(delta, p)` pairs.
pub fn ldp_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(AslError::DomainError("slope fit needs at least two step sizes".into()));
    }
    if let Some(&(d, p)) = points.iter().find(|(d, p)| !(*d > 0.0 && *p > 0.0 && *p < 1.0)) {
        return Err(AslError::DomainError(format!("cannot fit log error at delta {d} with p = {p}")));
    }
    let xs: Vec<f64> = points.iter().map(|(d, _)| 1.0 / d).collect();
    let ys: Vec<f64> = points.iter().map(|(_, p)| p.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AslError::DomainError("step sizes must differ".into()));
    }
    Ok(-sxy / sxx)
}
