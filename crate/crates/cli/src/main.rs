use std::process::ExitCode;

use spinsim_cli::{execute, parse_cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = parse_cli(std::env::args_os().skip(1)).and_then(|m| execute(&m));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(CliError::Clap(e).exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
