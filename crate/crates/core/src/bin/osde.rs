use clap::Parser;

fn main() {
    let cli = osde::cli::Cli::parse();
    if let Err(e) = osde::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
