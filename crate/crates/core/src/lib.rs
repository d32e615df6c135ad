//! Resource estimation for post-quench dynamics of Rydberg-atom Ising
//! models: exact and MPS-TDVP simulation, register preparation statistics,
//! shot budgets, scaling-law fits and quantum/classical crossovers.

pub mod budget;
pub mod config;
pub mod convergence;
pub mod costfit;
pub mod error;
pub mod krylov;
pub mod manifest;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracle;
pub mod register;
pub mod symmetry;

pub use error::{Error, Result};
