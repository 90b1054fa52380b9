//! Laboratory for the smallest singular value of structured random matrices.
//!
//! A structured random matrix is `M = A∘X + B`: an iid noise matrix `X` scaled
//! entrywise by a standard-deviation profile `A` (entries in `[0,1]`) and
//! shifted by a deterministic mean profile `B`. This crate provides
//!
//! * profiles, atom distributions and their moment/spread diagnostics
//!   ([`profile`]),
//! * graph-theoretic connectivity checkers on thresholded profiles
//!   ([`graph`]),
//! * an algorithmic regularity partitioner and the bad/free/cyclic index
//!   decomposition it induces ([`regularity`]),
//! * compressible/incompressible sphere geometry, nets and restricted
//!   invertibility ([`sphere`]),
//! * concentration-function estimation for scalar walks and matrix images
//!   ([`anticonc`]),
//! * seeded sampling and Monte Carlo tail experiments ([`ensemble`]),
//! * deterministic lower-bound certificates for `s_min` built from Schur
//!   complements ([`certify`]).
//!
//! Everything that loops over independent trials, subsets or grid chunks runs
//! on rayon when the default `parallel` feature is enabled and falls back to
//! plain iterators without it. Results are identical either way: every trial
//! derives its own RNG stream from `(seed, index)` and reductions are
//! associative.

pub mod anticonc;
pub mod certify;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod profile;
pub mod regularity;
pub mod sphere;

mod bits;
mod exec;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Environment variable consulted by the CLI for a default seed override.
pub const SEED_ENV_VAR: &str = "SVLAB_SEED";
