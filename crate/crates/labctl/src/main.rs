use clap::Parser;

fn main() {
    let cli = labctl::cli::Cli::parse();
    if let Err(e) = labctl::commands::run(cli) {
        eprintln!("labctl: {e}");
        std::process::exit(e.exit_code());
    }
}
