use clap::Parser;
use fluidsched_cli::app::{run, Cli};

fn main() {
    if let Err(failure) = run(Cli::parse()) {
        eprintln!("fluidsched: {}", failure.message);
        std::process::exit(failure.code);
    }
}
