use std::process::ExitCode;

use clap::Parser;

mod commands;

use commands::Cli;

/// 1 for bad input or configuration, 2 for failures while running.
fn exit_code(err: &anyhow::Error) -> u8 {
    use mre_core::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::Shape(_) | Error::Format(_) | Error::Json(_) | Error::RankDeficient { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            eprint!("{}", e.render().ansi());
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
