//! Radial diffusions on evolving constant-curvature model spaces.
//!
//! The crate is `no_std` (it needs `alloc` for sample storage) and contains
//! only the numerical core:
//!
//! * [`special_fn`]: generalized Laguerre polynomials, Gamma ratios, the
//!   accumulated growth factor `Λ(t)` and Gaussian moment identities.
//! * [`bounds`]: moment, exponential, concentration and exit-time bounds
//!   driven by a Lyapunov [`Certificate`](bounds::Certificate).
//! * [`geometry`]: sphere / Euclidean / hyperbolic models with a conformal
//!   scale schedule (static, Ricci flow or tabulated) and a radial drift.
//! * [`simulate`]: deterministic per-path Monte Carlo engines and the
//!   estimators used to compare samples against bounds.
//!
//! IO, configuration files, parallel execution and the command-line tool
//! live in the `evoflow` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod math;

pub mod bounds;
pub mod geometry;
pub mod simulate;
pub mod special_fn;

pub use error::{Error, Result};
