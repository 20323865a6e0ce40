//! Swarm-intelligence neural architecture search.
//!
//! Particle swarm ([`pso`]) and ant colony ([`aco`]) searches over sequential
//! CNN layer spaces ([`arch`], [`space`]), scored through the [`eval`]
//! contract by deterministic surrogates or an external trainer process.
//! [`engine`] runs seeded multi-run experiments and aggregates statistics.

pub mod aco;
pub mod arch;
pub mod baseline;
pub mod engine;
pub mod eval;
pub mod pso;
pub mod rng;
pub mod search;
pub mod space;
pub mod stats;

pub use aco::{aco_run, AcoConfig, PheromoneGraph};
pub use arch::{Architecture, LayerKind, LayerSpec, Shape};
pub use eval::{Dataset, EvalError, EvalRequest, Evaluator, FitnessReport};
pub use pso::{pso_run, PsoConfig};
pub use search::{History, SearchContext, SearchError, SearchResult};
pub use space::{sample_random, validate, SpaceConfig, ValidationReport};
