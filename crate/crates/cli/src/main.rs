mod args;
mod checkpoint;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> graphcal::Result<()> {
    match &cli.command {
        Command::Train(cmd) => commands::train(cmd),
        Command::Calibrate(cmd) => commands::calibrate(cmd),
        Command::Selftrain(cmd) => commands::selftrain(cmd),
        Command::Report(cmd) => commands::report(cmd),
        Command::GenSbm(cmd) => commands::gen_sbm(cmd),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
