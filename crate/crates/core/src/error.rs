use thiserror::Error;

pub type Result<T> = std::result::Result<T, AslError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AslError {
    #[error("iteration did not converge within {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("combination matrix is not primitive: {0}")]
    NotPrimitive(String),

    #[error("invalid topology: {0}")]
    TopologyInvalid(String),

    #[error("Perron eigenvector incompatible with topology at agents {agents:?}")]
    EigenvectorIncompatible { agents: Vec<usize> },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("observation {observation} outside the support of the likelihood models")]
    SupportViolation { observation: f64 },

    #[error("moment generating function diverges at t = {t}")]
    Divergent { t: f64 },

    #[error("could not bracket root: {0}")]
    RootNotBracketed(String),

    #[error("no negative root: m_ave = {m_ave:e} is not positive")]
    NoNegativeRoot { m_ave: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("variance of the network log-likelihood ratio vanishes")]
    DegenerateVariance,

    #[error("no conflicting agents for the selected hypothesis")]
    NoConflictingAgents,

    #[error("conflicting agents present: {agents:?}")]
    ConflictingAgentsPresent { agents: Vec<usize> },

    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("argument out of domain: {0}")]
    DomainError(String),

    #[error("adaptation threshold not reached within the horizon")]
    NotReached,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl AslError {
    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            AslError::Config(_)
                | AslError::Parse { .. }
                | AslError::InvalidModel(_)
                | AslError::InvalidMatrix(_)
                | AslError::TopologyInvalid(_)
                | AslError::DomainError(_)
                | AslError::EigenvectorIncompatible { .. }
        )
    }
}
