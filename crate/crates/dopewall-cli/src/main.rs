mod args;
mod error;
mod manifest;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;

/// Parses arguments given without the program name.
pub(crate) fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("dopewall".to_string()).chain(argv.iter().cloned()))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            });
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("usage: --jobs must be at least 1");
            return ExitCode::from(64);
        }
        // Only the thread count changes; batches are seeded per member.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match run::execute(&cli, &argv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
