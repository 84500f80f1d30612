//! Lens-array AoA estimation, error bounds and cooperative vehicle
//! localization. `no_std` with `alloc`.

#![no_std]

extern crate alloc;

pub mod array_model;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod localization;
pub mod math;
pub mod metrics;
pub mod scenario;
pub mod signal;

pub use array_model::{ArrayConfig, ArrayKind};
pub use error::{Error, Result};
