#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod assignment;

pub mod error;
pub mod filterbank;
pub mod linalg;
pub mod masking;
pub mod metrics;
pub mod phase;
pub mod pit;
pub mod signal;
pub mod transform;

pub use error::CoreError;
