use clap::Parser;
use limitdecide::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
