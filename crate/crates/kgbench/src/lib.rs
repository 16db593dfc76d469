//! File formats, configuration, synthetic corpora, the external scorer
//! protocol and the stage pipeline behind the `kgbench` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod formats;
pub mod pipeline;
pub mod protocol;
pub mod synth;

pub use error::{Error, Result};
