//! Asymptotic variance of additive functionals of finite-state Markov chains.
//!
//! The crate computes the CLT variance sigma^2_f by three independent analytic
//! routes (Poisson equation, regeneration-cycle moments, spectral
//! decomposition for reversible kernels), instantiates two finite-memory
//! Elephant Random Walk models with their closed-form answers, and verifies
//! everything with seeded regenerative Monte Carlo.

pub mod chain_file;
pub mod erw;
pub mod error;
pub mod markov;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod variance;

pub use chain_file::ChainFile;
pub use error::{ChainError, Result};
pub use markov::{Observable, PoissonSolution, ProbabilityVector, TransitionMatrix};
pub use variance::{Route, VarianceReport};
