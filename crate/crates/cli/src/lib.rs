// SPDX-License-Identifier: Apache-2.0

//! Command-line surface of the simulator: run configuration, subcommands and
//! verification suites.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{run, Cli};
pub use output::CliError;
