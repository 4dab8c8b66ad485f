//! `histoftree` command-line driver.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<histoftree::Error> for Failure {
    fn from(e: histoftree::Error) -> Self {
        use histoftree::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Parameter(_) | E::Capacity(_) => Failure::Usage(msg),
            E::Io { .. }
            | E::Parse { .. }
            | E::Csv(_)
            | E::Json(_)
            | E::Toml(_)
            | E::EmptyData(_)
            | E::Domain(_) => Failure::Data(msg),
            E::UndefinedTest(_) | E::Unsupported(_) => Failure::Internal(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
