//! Command-line companion to the detection library: file formats for
//! tensors, scenes and checkpoints, CSV reporting, PGM rendering, and
//! the staged pipeline the `sarad` binary drives.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod kv;
pub mod pgm;
pub mod pipeline;
pub mod report;
pub mod scene_file;
pub mod tensor_io;

pub use error::{CliError, Result};
