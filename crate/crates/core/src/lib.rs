//! Wiener-Hopf factors, overshoots and occupation times for Lévy processes
//! whose jumps on at least one side are matrix-exponential.

pub mod catalog;
pub mod error;
pub mod factorization;
pub mod invert;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod occupation;
pub mod overshoot;
pub mod poly;
pub mod quad;
pub mod roots;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    Case, Classification, ErlangComponent, GeneralJumpSpec, Jumps, LevyModel, MeJumpSpec, PartialFraction, Side,
};
pub use roots::{cumulant_polynomial, limiting_roots, solve_all_roots, solve_roots, LimitingRoots, RootSet};
