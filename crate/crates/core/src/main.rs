use std::io;
use std::process::ExitCode;

use clap::Parser;
use fuzzrank_core::cli::{execute, init_logging, Cli};

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let code = execute(&cli, &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code)
}
