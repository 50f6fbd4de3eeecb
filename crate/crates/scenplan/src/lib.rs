//! IO, file formats and the command line around [`scenplan_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod parallel;
pub mod program_text;
pub mod report;

pub use error::{AppError, Result};
