//! Command-line pipeline around `visionseg_core`: segmentation, synthetic
//! corpora, evaluation, dataset export and the review API.

pub mod args;
pub mod commands;
pub mod review;
pub mod server;

pub use args::Cli;
pub use commands::UsageError;
