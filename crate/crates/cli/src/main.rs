use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spt_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spt: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
