//! Numerical core for scalar SDEs driven by fractional Brownian motion with
//! Hurst exponent `H > 1/2` whose solutions explode in finite time.
//!
//! The pieces, bottom up:
//!
//! - [`fbm_kernels`]: covariance, Volterra kernel, exact Gaussian sampling and
//!   conditioning;
//! - [`prediction`]: the conditional law of a future fBm value given the
//!   sampled past, used to draw noise over random step sizes;
//! - [`lamperti`]: model families, the Lamperti transform and its inverse,
//!   the transformed drift, the Osgood test and assumption checks;
//! - [`scheme`]: the adaptive Euler scheme with steps `h / g(Y)`, stopping,
//!   explosion-time brackets and diagnostics.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod fbm_kernels;
pub mod lamperti;
pub mod prediction;
pub mod quad;
pub mod rng;
pub mod scheme;

pub use error::{Error, Result};
pub use fbm_kernels::{FbmKernels, HurstParam, SampledPath, TimeGrid};
