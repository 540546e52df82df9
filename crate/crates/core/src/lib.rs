//! Graphical models for circular random variables on the torus.
//!
//! Three model families are provided, each with its own structure learner:
//!
//! * [`sine`]: the multivariate sine von Mises distribution and the
//!   conditional von Mises DAG model, fitted node by node with likelihood
//!   ratio edge selection.
//! * [`wrapped`]: the multivariate wrapped Normal distribution, its marginal
//!   and conditional laws, a truncated-winding profile likelihood fit and
//!   Holm-corrected edge selection for the unwrapped Normal graph.
//! * [`stereo`]: the inverse stereographic Normal and nonparanormal
//!   distributions, with adaptive graphical lasso and repeated cross
//!   validation stability selection.
//!
//! The crate is `no_std` compatible (it needs `alloc`). The `std` feature is
//! on by default; `parallel` additionally spreads independent work (CV
//! repeats, per-node fits, likelihood rows) over a rayon pool. Results do not
//! depend on the number of threads.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod par;
mod prelude;

pub mod angle;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod optim;
pub mod sine;
pub mod special;
pub mod stereo;
pub mod wrapped;

pub use angle::{
    circular_mean, circular_summary, complex_moments, inverse_stereographic, stereographic, wrap_angle, Angle,
    AngleMatrix, CircularSummary, ComplexMoments,
};
pub use error::{Error, Result};
pub use graph::{Dag, EdgeRecord, EdgeReport, UndirectedGraph};
pub use special::{bessel_i0, log_bessel_i0};
