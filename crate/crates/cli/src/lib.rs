//! Track, evaluate and generate commands over the core library.

pub mod commands;
pub mod config;

pub use commands::{cmd_eval, cmd_generate, cmd_track};
pub use config::RunConfig;
