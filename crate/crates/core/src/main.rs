use clap::Parser;

fn main() {
    let cli = fcbc::cli::Cli::parse();
    std::process::exit(fcbc::cli::run(cli));
}
