//! Command-line driver for `rmcst`: estimation on user data, simulation
//! studies, true values and table reproduction.

pub mod args;
pub mod commands;
pub mod output;
pub mod reference;

use std::path::{Path, PathBuf};

use rmcst::WeightScheme;

pub use args::{Cli, Command};
pub use output::{Artifact, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rmcst::Error),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: rmcst::Error },
    #[error("scheme {scheme}: {source}")]
    Scheme { scheme: WeightScheme, source: rmcst::Error },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 2 for invalid invocations, 1 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Usage(_) => "Usage".into(),
            CliError::Core(e) | CliError::Scheme { source: e, .. } | CliError::Input { source: e, .. } => e.kind(),
            CliError::Io { .. } => "Io".into(),
            CliError::Pool(_) => "Pool".into(),
        }
    }

    /// Single-line JSON description for stderr.
    pub fn to_line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        serde_json::json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": msg }).to_string()
    }
}

/// Runs the parsed command and returns its artifact.
pub fn run(cli: &Cli) -> Result<Artifact, CliError> {
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Truth(a) => commands::truth(a),
        Command::Reproduce(a) => commands::reproduce(a),
    }
}

pub fn write_artifact(art: &Artifact, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = art.render(format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Sizes the global worker pool; `None` keeps the default of one worker per core.
pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => {
            rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Pool(e.to_string()))
        }
        None => Ok(()),
    }
}
