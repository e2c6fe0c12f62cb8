use clap::Parser;

fn main() {
    let cli = critdelay_cli::Cli::parse();
    if let Err(err) = critdelay_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(critdelay_cli::commands::exit_code(&err));
    }
}
