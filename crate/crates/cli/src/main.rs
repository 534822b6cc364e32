// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;

use qlitho_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qlitho: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
