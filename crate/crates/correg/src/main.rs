use clap::Parser;

use correg::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
