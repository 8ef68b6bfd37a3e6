//! Explicit finite-difference solver for widely degenerate anisotropic
//! parabolic equations
//!
//! ```text
//! d_t u = sum_i d_i [ a_i (|d_i u| - delta_i)_+^(p_i - 1) sign(d_i u) ]
//! ```
//!
//! together with numerical probes for the local estimates such solutions
//! satisfy: energy inequalities, anisotropic embeddings, cut-off bounds,
//! De Giorgi level-set iterations, sup bounds, the critical-mass lemma and
//! lower semicontinuous regularization.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod cutoff;
pub mod degiorgi;
pub mod error;
pub mod flux;
pub mod geometry;
pub mod quad;
pub mod report;
pub mod runner;
pub mod solver;

pub use error::{Error, Result};
