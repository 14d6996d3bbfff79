//! Command-line front end for riviv-core: CSV ingestion, study configuration,
//! parallel Monte Carlo drivers and JSON/CSV reports.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod parallel;
pub mod report;

pub use error::{AppError, AppResult};
