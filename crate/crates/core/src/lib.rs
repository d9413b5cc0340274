//! Filtered B-spline (FBS) feedforward compensation for coupled,
//! linear-parameter-varying two-axis motion stages such as H-frame printers.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, timing and the
//! command-line front end live in the companion `hfbs` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fbs;
pub mod linalg;
pub mod lpfbs;
pub mod metrics;
pub mod splines;
pub mod sysmodel;
pub mod trajgen;

pub use error::{Error, Result};
