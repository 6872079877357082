//! Files, command line and benchmark harness around `looplc-core`.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod format;
pub mod selftest;

pub use error::{AppError, AppResult};
