//! JSON experiment description shared by the CLI subcommands.
//!
//! One file fully specifies an experiment: agents, hypotheses, network,
//! the Perron vector to analyze, tolerances and simulation parameters.
//! Unknown keys are rejected. Relative file paths resolve against the
//! directory of the config file.
//!
//! Hypothesis indices in the file (`true_index`, truth schedules, belief
//! columns) refer to the order of `likelihoods`. Internally the truth is
//! moved to index 0; [`Experiment`] performs that remapping.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{optimal_design, DesignOptions, EigenvectorDesign, DEFAULT_EPSILON, MEMBERSHIP_TOL};
use crate::error::{AslError, Result};
use crate::exponent::ExponentOptions;
use crate::lmgf::{ClassifyOptions, LearningTask};
use crate::models::{AgentModel, DistributionModel, HypothesisSet};
use crate::network::{self, Adjacency, CombinationMatrix, PerronVector, PERRON_MAX_ITER, PERRON_TOL, SINKHORN_TOL};
use crate::rng::tagged_stream;
use crate::simulate::{InitialBeliefs, SimulationConfig, TruthChange};

const TOPOLOGY_TAG: u64 = 1;
const COMBINATION_TAG: u64 = 2;
const SINKHORN_MAX_ITER: usize = 100_000;

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// `count` identical agents. Without `signal` the model is accurate: data
/// follow the likelihood of the true hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentGroup {
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<DistributionModel>,
    pub likelihoods: Vec<DistributionModel>,
    #[serde(default)]
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Complete graph with self-loops.
    #[default]
    Complete,
    /// Agent 1 is the hub.
    Star,
    DirectedCycle {
        #[serde(default = "yes")]
        self_loops: bool,
    },
    /// Undirected random graph with self-loops, redrawn until connected.
    ErdosRenyi { p: f64 },
    /// Dense 0/1 matrix, `rows[l][k] = 1` for an edge `l -> k`.
    Explicit { rows: Vec<Vec<u8>> },
    /// Plain-text matrix file with 0/1 entries.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CombinationSpec {
    /// `a[l][k] = 1 / |N_k|`.
    #[default]
    UniformAveraging,
    /// Random weights normalized per column.
    LeftStochastic,
    /// Random weights balanced to unit row and column sums.
    DoublyStochastic,
    /// Matrix on the topology whose Perron vector is the optimal design.
    Designed,
    Matrix { rows: Vec<Vec<f64>> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub combination: CombinationSpec,
}

/// Where the Perron vector analyzed by `exponent` comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PiSource {
    /// Perron eigenvector of the configured combination matrix.
    #[default]
    Network,
    Uniform,
    Design,
    Explicit { weights: Vec<f64> },
    /// Whitespace-separated weights.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignParams {
    pub epsilon: f64,
    pub membership_tol: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, membership_tol: MEMBERSHIP_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Step sizes; one Monte Carlo run each, all with the same seed.
    pub deltas: Vec<f64>,
    pub horizon: usize,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_schedule: Option<Vec<TruthChange>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_beliefs: Option<Vec<Vec<f64>>>,
    /// Adaptation-time levels in (0, 1).
    #[serde(default)]
    pub omegas: Vec<f64>,
    /// Also write one replication's log-ratio trajectory per step size.
    #[serde(default)]
    pub trajectory: bool,
    /// Also write SVG plots of the curves.
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agents: Vec<AgentGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisSet>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub pi: PiSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default)]
    pub exponent: ExponentOptions,
    #[serde(default)]
    pub design: DesignParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AslError::Parse { line: e.line(), message: e.to_string() })
    }

    /// Canonical form: pretty JSON with every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_agents(&self) -> usize {
        self.agents.iter().map(|g| g.count).sum()
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            epsilon: self.design.epsilon,
            membership_tol: self.design.membership_tol,
            classify: self.classify,
            exponent: self.exponent,
        }
    }
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    task: LearningTask,
    adjacency: Adjacency,
    /// Maps a hypothesis index of the file to the internal index.
    index_map: Vec<usize>,
    base_dir: PathBuf,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| AslError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = ExperimentConfig::from_json(&text)?;
        Self::new(cfg, path.parent().unwrap_or(Path::new(".")))
    }

    /// Validate every section and resolve agents, hypotheses and topology.
    pub fn new(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        let base_dir = base_dir.to_path_buf();
        if config.agents.is_empty() {
            return Err(AslError::Config("agent list is empty".into()));
        }
        let h = config.agents[0].likelihoods.len();
        let hypotheses = config.hypotheses.clone().unwrap_or_else(|| HypothesisSet::numbered(h));
        hypotheses.validate()?;
        let truth = hypotheses.true_index;
        let mut agents = Vec::with_capacity(config.num_agents());
        for (g, group) in config.agents.iter().enumerate() {
            if group.count == 0 {
                return Err(AslError::Config(format!("agent group {} has count 0", g + 1)));
            }
            let signal = match (&group.signal, group.likelihoods.get(truth)) {
                (Some(s), _) => s.clone(),
                (None, Some(l)) => l.clone(),
                (None, None) => {
                    return Err(AslError::Config(format!("agent group {} has too few likelihoods", g + 1)))
                }
            };
            let model = AgentModel { signal, likelihoods: group.likelihoods.clone(), noise_variance: group.noise_variance };
            model.validate()?;
            agents.extend(std::iter::repeat_n(model, group.count));
        }
        let task = LearningTask::new(agents, hypotheses)?;
        let n = task.num_agents();
        let index_map = (0..h).map(|i| if i == truth { 0 } else if i == 0 { truth } else { i }).collect();
        let adjacency = resolve_topology(&config.network.topology, n, config.seed, &base_dir)?;
        let exp = Self { config, task, adjacency, index_map, base_dir };
        exp.validate_sections()?;
        Ok(exp)
    }

    fn validate_sections(&self) -> Result<()> {
        let n = self.task.num_agents();
        match &self.config.network.combination {
            CombinationSpec::Matrix { rows } => check_matrix_size(&CombinationMatrix::from_rows(rows)?, n)?,
            CombinationSpec::Designed
                if (!self.adjacency.is_symmetric() || !(0..n).all(|k| self.adjacency.self_loop(k))) => {
                    return Err(AslError::TopologyInvalid(
                        "designed combination needs an undirected topology with self-loops".into(),
                    ));
                }
            _ => {}
        }
        if let PiSource::Explicit { weights } = &self.config.pi {
            self.task.check_perron(&PerronVector::new(weights.clone())?)?;
        }
        let d = &self.config.design;
        if !(d.epsilon > 0.0) {
            return Err(AslError::Config(format!("epsilon must be positive, got {}", d.epsilon)));
        }
        if !(self.config.classify.placeholder > 0.0) {
            return Err(AslError::Config("uninformative placeholder must be positive".into()));
        }
        if let Some(sim) = &self.config.simulate {
            if sim.deltas.is_empty() {
                return Err(AslError::Config("simulate.deltas is empty".into()));
            }
            if let Some(w) = sim.omegas.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
                return Err(AslError::Config(format!("omega {w} must lie in (0, 1)")));
            }
            for cfg in self.simulation_configs()? {
                cfg.validate(n, self.task.num_hypotheses())?;
            }
        }
        Ok(())
    }

    pub fn task(&self) -> &LearningTask {
        &self.task
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.output_dir)
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.config.output_dir = dir;
    }

    pub fn design(&self) -> Result<EigenvectorDesign> {
        optimal_design(&self.task, &self.config.design_options())
    }

    /// The combination matrix; random generators draw from a stream keyed
    /// by the master seed.
    pub fn combination(&self) -> Result<CombinationMatrix> {
        let mut rng = tagged_stream(self.config.seed, COMBINATION_TAG);
        let a = match &self.config.network.combination {
            CombinationSpec::UniformAveraging => network::uniform_averaging(&self.adjacency)?,
            CombinationSpec::LeftStochastic => network::gen_left_stochastic(&self.adjacency, &mut rng)?,
            CombinationSpec::DoublyStochastic => {
                network::gen_doubly_stochastic(&self.adjacency, &mut rng, SINKHORN_TOL, SINKHORN_MAX_ITER)?
            }
            CombinationSpec::Designed => network::matrix_from_eigenvector(&self.adjacency, &self.design()?.pi)?,
            CombinationSpec::Matrix { rows } => CombinationMatrix::from_rows(rows)?,
            CombinationSpec::File { path } => CombinationMatrix::from_text(&self.read(path)?)?,
        };
        check_matrix_size(&a, self.task.num_agents())?;
        Ok(a)
    }

    pub fn perron_vector(&self) -> Result<PerronVector> {
        let pi = match &self.config.pi {
            PiSource::Network => network::perron_eigenvector(&self.combination()?, PERRON_TOL, PERRON_MAX_ITER)?,
            PiSource::Uniform => PerronVector::uniform(self.task.num_agents()),
            PiSource::Design => self.design()?.pi,
            PiSource::Explicit { weights } => PerronVector::new(weights.clone())?,
            PiSource::File { path } => PerronVector::new(parse_weights(&self.read(path)?)?)?,
        };
        self.task.check_perron(&pi)?;
        Ok(pi)
    }

    /// One simulation config per step size, in file order.
    pub fn simulation_configs(&self) -> Result<Vec<SimulationConfig>> {
        let sim = self
            .config
            .simulate
            .as_ref()
            .ok_or_else(|| AslError::Config("missing simulate section".into()))?;
        let h = self.task.num_hypotheses();
        let schedule = match &sim.truth_schedule {
            None => vec![TruthChange { start: 0, truth: 0 }],
            Some(s) => s
                .iter()
                .map(|c| {
                    let truth = *self
                        .index_map
                        .get(c.truth)
                        .ok_or_else(|| AslError::Config(format!("scheduled truth {} out of range", c.truth)))?;
                    Ok(TruthChange { start: c.start, truth })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let beliefs = match &sim.initial_beliefs {
            None => InitialBeliefs::Uniform,
            Some(rows) => {
                let mut mapped = Vec::with_capacity(rows.len());
                for row in rows {
                    if row.len() != h {
                        return Err(AslError::Config("initial beliefs have the wrong shape".into()));
                    }
                    let mut m = vec![0.0; h];
                    for (i, &p) in row.iter().enumerate() {
                        m[self.index_map[i]] = p;
                    }
                    mapped.push(m);
                }
                InitialBeliefs::Explicit(mapped)
            }
        };
        Ok(sim
            .deltas
            .iter()
            .map(|&delta| SimulationConfig {
                delta,
                horizon: sim.horizon,
                replications: sim.replications,
                truth_schedule: schedule.clone(),
                seed: self.config.seed,
                initial_beliefs: beliefs.clone(),
            })
            .collect())
    }

    fn read(&self, path: &Path) -> Result<String> {
        read_relative(&self.base_dir, path)
    }
}

fn read_relative(base: &Path, path: &Path) -> Result<String> {
    let full = base.join(path);
    fs::read_to_string(&full).map_err(|e| AslError::Config(format!("cannot read {}: {e}", full.display())))
}

fn check_matrix_size(a: &CombinationMatrix, n: usize) -> Result<()> {
    if a.n() != n {
        return Err(AslError::InvalidMatrix(format!("matrix is {0}x{0} but there are {n} agents", a.n())));
    }
    Ok(())
}

fn resolve_topology(spec: &TopologySpec, n: usize, seed: u64, base: &Path) -> Result<Adjacency> {
    let adj = match spec {
        TopologySpec::Complete => Adjacency::complete(n)?,
        TopologySpec::Star => Adjacency::star(n)?,
        TopologySpec::DirectedCycle { self_loops } => Adjacency::directed_cycle(n, *self_loops)?,
        TopologySpec::ErdosRenyi { p } => network::gen_erdos_renyi(n, *p, &mut tagged_stream(seed, TOPOLOGY_TAG))?,
        TopologySpec::Explicit { rows } => {
            if rows.iter().flatten().any(|&x| x > 1) {
                return Err(AslError::Config("adjacency entries must be 0 or 1".into()));
            }
            Adjacency::from_rows(&rows.iter().map(|r| r.iter().map(|&x| x == 1).collect()).collect::<Vec<_>>())?
        }
        TopologySpec::File { path } => Adjacency::from_text(&read_relative(base, path)?)?,
    };
    if adj.n() != n {
        return Err(AslError::TopologyInvalid(format!("topology has {} agents, config has {n}", adj.n())));
    }
    Ok(adj)
}

/// Whitespace-separated numbers, one Perron weight each.
pub fn parse_weights(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            out.push(
                tok.parse()
                    .map_err(|_| AslError::Parse { line: i + 1, message: format!("not a number: {tok}") })?,
            );
        }
    }
    Ok(out)
}
