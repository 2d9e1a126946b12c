//! Command-line front end for the ring-noon engine.
//!
//! Each subcommand resolves a strict TOML configuration (file, then
//! `--set` overrides, then defaults), runs one protocol, and leaves two
//! artifacts in the output directory: a CSV with a fixed byte-level format
//! and a JSON sidecar carrying the schema version, the resolved
//! configuration, the settled closed-form conventions, and the full
//! report. Reruns of the same build reproduce both files byte for byte.
//!
//! Exit codes: 0 on success, 1 when a run fails numerically or cannot
//! write its outputs, 2 when the configuration is unusable.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod sidecar;
pub mod table;

pub use error::CliError;
