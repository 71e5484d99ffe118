use clap::Parser;

fn main() {
    let cli = pseudoaka_cli::Cli::parse();
    std::process::exit(pseudoaka_cli::execute(cli));
}
