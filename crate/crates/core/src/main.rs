use clap::Parser;

fn main() {
    std::process::exit(bctsim::cli::run(bctsim::cli::Cli::parse()));
}
