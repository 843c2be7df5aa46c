use std::process::ExitCode;

use clap::Parser;

use stopgame_cli::{run, Cli};
use stopgame_core::Guards;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli, &Guards::from_env()) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
