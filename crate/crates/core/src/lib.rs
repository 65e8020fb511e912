//! Allocation-only core of gdrkit.
//!
//! Everything in this crate is a pure function of its inputs plus an explicit
//! [`rng::RngStream`]: raster math and the fundus augmentation engine, the
//! hybrid supervised/contrastive loss with analytic gradients, domain-class
//! re-balancing weights, a small trainable network, and the DG/ESDG evaluation
//! protocols. File formats, the CLI, and anything touching the filesystem live
//! in the `gdrkit` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod augment;
pub mod data;
pub mod gradcheck;
pub mod bench;
pub mod dcr;
pub mod error;
pub mod image;
pub mod losses;
pub mod model;
pub mod rng;

mod math;

pub use error::{Error, Result};
pub use image::{HsvPixel, ImageRgb};
pub use rng::RngStream;
