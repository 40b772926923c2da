//! Adaptive social learning over graphs.
//!
//! The crate covers the full pipeline around the adaptive social learning
//! recursion: graph topologies and combination matrices ([`network`]),
//! signal and likelihood models ([`models`]), log-moment generating
//! functions and agent classification ([`lmgf`]), steady-state error
//! exponents ([`exponent`]), synthesis of optimal Perron eigenvectors
//! ([`design`]) and seeded Monte Carlo simulation of the recursion
//! ([`simulate`]). [`config`] ties them together behind a single JSON
//! experiment description.

pub mod config;
pub mod design;
pub mod error;
pub mod exponent;
pub mod lmgf;
pub mod models;
pub mod network;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod simulate;
mod roots;

pub use error::{AslError, Result};
pub use lmgf::LearningTask;
pub use models::{AgentModel, DistributionModel, HypothesisSet};
pub use network::{Adjacency, CombinationMatrix, PerronVector};
