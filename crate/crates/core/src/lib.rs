//! Heat kernel of the unit sphere `S^d`.
//!
//! Three independent evaluation paths are provided: the periodized
//! Gauss-Weierstrass kernel lifted through odd dimensions by the operator
//! `-(1/sin z) d/dz`, a reduction integral for even dimensions, and the
//! spectral (Gegenbauer) series. Values are carried in log form so that
//! kernels like `exp(-pi^2/4t)` at `t = 1e-6` stay representable.

pub mod bm_sampler;
pub mod bounds;
pub mod error;
mod fixed;
pub mod logvalue;
pub mod series_oracle;
pub mod sphere_kernel;
pub mod theta_kernel;
pub mod trig_algebra;
pub mod verify;

pub use error::{Error, Result};
pub use logvalue::{LogSum, LogValue, Sign};
