//! The intrinsic functional `A_beta` and the square functions built on it.

mod cache;
mod testclass;

pub use cache::{
    grid_hash, ABetaCache, CacheHeader, ConeQuadrature, TailConstants, TailEstimate, TailOp,
};
pub use testclass::{Evaluation, TestClassGrid, TestClassParams};

use crate::error::Result;
use crate::grid::GridFunction;

/// `A_beta(f)(y, t) = sup_{phi in C_beta} |f * phi_t(y)|` over the
/// discretized test class.
pub fn a_beta(f: &GridFunction, y: &[f64], t: f64, tc: &TestClassGrid) -> Result<f64> {
    Ok(tc.evaluate(f, y, t)?.value)
}
