//! Transfer-matrix lower bounds for the critical parameter of Stavskaya's
//! process.
//!
//! The pipeline for a level `n`:
//!
//! 1. [`patterns::build_forbidden_set`] enumerates the primitive balanced
//!    loops of order `<= n` together with the degenerate pair `13`, `31`.
//! 2. [`statespace::build_state_space`] collects the length-`3n-1` walk
//!    histories avoiding the level `n-1` set, and
//!    [`statespace::build_transitions`] links them by single appended steps.
//! 3. [`spectral`] applies the weighted operator and certifies
//!    `rho(M_n(p, q, alpha)) < 1` with Collatz–Wielandt bounds.
//! 4. [`search::alpha_sup`] bisects in `alpha`; [`search::optimize_p`]
//!    scans `p` at fixed `q`.

pub mod bruteforce;
pub mod cache;
pub mod cli;
pub mod error;
pub mod level;
pub mod params;
pub mod patterns;
pub mod search;
pub mod spectral;
pub mod statespace;

pub use error::{Error, Result};
pub use level::{CacheStatus, Level};
pub use params::Parameters;
pub use patterns::{build_forbidden_set, enumerate_primitive_loops, ForbiddenSet, Pattern, Step};
pub use search::{alpha_sup, optimize_p, BisectionResult, OptimizationResult, PGrid};
pub use spectral::{power_iteration, SpectralEstimate, WeightVector};
pub use statespace::{build_state_space, build_transitions, PathWord, StateSpace, TransitionTable};
