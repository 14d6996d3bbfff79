#![no_std]
extern crate alloc;

pub mod confsets;
pub mod data;
pub mod error;
pub mod estimators;
pub mod ivtests;
pub mod numerics;
pub mod simulation;

#[cfg(test)]
mod testutil;

pub use data::{Dataset, Observation};
pub use error::{Error, Result};
