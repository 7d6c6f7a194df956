use std::io::Write;
use std::process::ExitCode;

use syssamp::cli::{parse_args, run, CliError};

fn main() -> ExitCode {
    let result = parse_args(std::env::args_os()).and_then(|config| {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        run(&config, &mut out)?;
        out.flush().map_err(|e| CliError::Run(e.into()))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
