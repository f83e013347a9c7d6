use clap::Parser;

fn main() {
    let cli = kalman_harness::cli::Cli::parse();
    std::process::exit(kalman_harness::cli::run(&cli));
}
