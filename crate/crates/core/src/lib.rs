//! Rare-event tabular classification with synthetic minority augmentation.
//!
//! The crate needs only `alloc`. File formats, the command line and reporting
//! live in the `rarebreak` companion crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod classifiers;
pub mod ctgan;
pub mod data;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod smote;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;
