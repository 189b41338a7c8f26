use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rmcst_cli::{init_threads, run, write_artifact, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let msg: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            return fail(&CliError::Usage(msg.join(" ").trim_start_matches("error: ").to_string()));
        }
    };
    let result = init_threads(cli.threads)
        .and_then(|_| run(&cli))
        .and_then(|art| write_artifact(&art, cli.format, cli.output.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_line());
    ExitCode::from(e.exit_code() as u8)
}
