//! Reference learning tasks used by the tests, the CLI and the demo.

use crate::error::Result;
use crate::lmgf::LearningTask;
use crate::models::{AgentModel, DistributionModel, HypothesisSet};

/// One group of identical agents in the noisy shift-in-mean Gaussian network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGroup {
    pub count: usize,
    /// Likelihood means under the three hypotheses.
    pub means: [f64; 3],
    pub variance: f64,
    /// Noise variance relative to the likelihood variance.
    pub noise_level: f64,
}

pub const NOISY_GAUSSIAN_GROUPS: [GaussianGroup; 3] = [
    GaussianGroup { count: 3, means: [0.0, 0.1, 0.1], variance: 1.0, noise_level: 1.0 },
    GaussianGroup { count: 3, means: [0.2, 0.0, 0.2], variance: 2.0, noise_level: 0.1 },
    GaussianGroup { count: 4, means: [0.3, 0.3, 0.0], variance: 3.0, noise_level: 0.0033 },
];

pub fn gaussian_group_agents(groups: &[GaussianGroup]) -> Result<Vec<AgentModel>> {
    let mut agents = Vec::new();
    for g in groups {
        let a = AgentModel::noisy_gaussian(&g.means, g.variance, g.noise_level)?;
        agents.extend(std::iter::repeat_n(a, g.count));
    }
    Ok(agents)
}

/// Ten agents in three groups with noisy Gaussian observations.
pub fn noisy_gaussian_task() -> Result<LearningTask> {
    LearningTask::from_agents(gaussian_group_agents(&NOISY_GAUSSIAN_GROUPS)?)
}

/// Laplace likelihood `F_h` with location `0.1 h` and unit scale.
pub fn laplace_component(h: usize) -> DistributionModel {
    DistributionModel::laplace(0.1 * h as f64, 1.0)
}

/// Per-agent component indices `(theta1, theta2, theta3)` of the Laplace
/// network. Agents 1-7 separate the first two hypotheses, agents 1-4 and
/// 8-10 the first and third.
pub const LAPLACE_ASSIGNMENT: [[usize; 3]; 10] = [
    [0, 2, 2],
    [0, 2, 2],
    [0, 2, 2],
    [0, 2, 2],
    [0, 2, 0],
    [0, 2, 0],
    [0, 2, 0],
    [1, 1, 0],
    [1, 1, 0],
    [1, 1, 0],
];

pub fn laplace_agents(assignment: &[[usize; 3]]) -> Result<Vec<AgentModel>> {
    assignment
        .iter()
        .map(|row| AgentModel::accurate(row.iter().map(|&h| laplace_component(h)).collect()))
        .collect()
}

/// Ten accurate-model Laplace agents with three hypotheses.
pub fn laplace_task() -> Result<LearningTask> {
    LearningTask::from_agents(laplace_agents(&LAPLACE_ASSIGNMENT)?)
}

/// Four agents observing `N(0, 1)` whose truth likelihood is `N(0.1, 1)`;
/// under the wrong hypothesis they use means -0.1, 0.2, 0 and 0.1.
pub fn illustrative_task() -> Result<LearningTask> {
    let f = DistributionModel::gaussian(0.0, 1.0);
    let agents = [-0.1, 0.2, 0.0, 0.1]
        .iter()
        .map(|&m| {
            AgentModel::new(f.clone(), vec![DistributionModel::gaussian(0.1, 1.0), DistributionModel::gaussian(m, 1.0)])
        })
        .collect::<Result<Vec<_>>>()?;
    LearningTask::new(agents, HypothesisSet::numbered(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(noisy_gaussian_task().unwrap().num_agents(), 10);
        let l = laplace_task().unwrap();
        assert_eq!((l.num_agents(), l.num_hypotheses()), (10, 3));
        assert_eq!(illustrative_task().unwrap().num_agents(), 4);
    }
}
