//! Safe Bayesian optimization on a discrete grid when the objective's
//! Lipschitz constant is unknown.
//!
//! The SafeSlope search models the objective as a Gaussian process and
//! replaces the Lipschitz constant with per-edge confidence bounds on
//! finite-difference slopes, which are themselves linear images of the GP.
//! An AR-1 two-fidelity extension conditions the search on a cheap sweep of
//! an approximate model. The crate also carries the accompanying theory
//! toolkit (information-gain bounds, convergence-time scans, reachability
//! closures), an LQR controller-tuning benchmark, and a self-contained
//! oracle suite that cross-checks the numerics against brute-force
//! implementations.

pub mod analysis;
pub mod error;
pub mod gp;
pub mod grid;
pub mod kernel;
mod linalg;
pub mod lqr;
pub mod mfgp;
pub mod search;
pub mod slope;
pub mod verify;

pub use error::{Error, Result};
pub use gp::{GpDataset, GpPosterior, GridPrior};
pub use grid::{GridDomain, IncidenceMatrix};
pub use kernel::{eigenvalues_descending, KernelFamily, KernelSpec};
pub use mfgp::Ar1Model;
pub use search::{
    run_search, Algorithm, RunOptions, SearchMode, SearchModel, SearchSetup, StopReason,
    TrialRecord,
};
pub use slope::{SlopeField, SlopeUpperBounds};
