//! Numerical workbench for intrinsic square functions on weighted Herz spaces.

// negated comparisons reject NaN on purpose; the last two would raise the MSRV
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of,
    clippy::unnecessary_map_or
)]

pub mod atoms;
pub mod error;
pub mod grid;
pub mod harness;
pub mod herz;
pub mod intrinsic;
pub mod lpsolve;
pub mod numerics;
pub mod weights;

pub use atoms::{Atom, AtomParams, Generator};
pub use error::{Error, Result};
pub use grid::{GridFunction, Region, ShellMap};
pub use herz::{HerzNormReport, HerzParams};
pub use lpsolve::{LinearProgram, LpSolution, LpStatus};
pub use weights::{ApReport, Ball, BallFamily, PowerWeight};
