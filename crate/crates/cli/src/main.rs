use clap::Parser;

fn main() {
    let cli = fnn_cli::Cli::parse();
    std::process::exit(fnn_cli::run(&cli));
}
