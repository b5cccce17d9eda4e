//! Convergence of long compositions of near-parabolic Möbius maps.
//!
//! The composition `f_N ∘ ... ∘ f_1` of `f_k(z) = rho_k z / (1 - z) + eps_k^2`
//! is tracked through three-term recurrences; the schedules, labs and skew
//! products here measure how fast it approaches the identity as `N` grows.

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod lab;
pub mod mobius;
pub mod random_lab;
pub mod recurrences;
pub mod schedules;
pub mod skew;

pub use error::{Error, Result};
pub use mobius::{Complex, EvalRegion, MoebiusCoeffs};
pub use recurrences::{PerturbationSequences, QrsTriple};
pub use schedules::ScheduleSpec;
