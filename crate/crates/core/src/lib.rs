//! H2-optimal reduction of linear systems with a quadratic output.
// `!(x > 0.0)` is deliberate throughout: NaN must fail the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod bt;
pub mod checks;
pub mod error;
pub mod gramians;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod optimizer;
pub mod random;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use manifold::{EuclideanGradient, Metric, Step, TangentVector};
pub use model::{LqoSystem, Realization, RomPoint, StateSpaceRom};
