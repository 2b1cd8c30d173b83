use clap::Parser;

fn main() {
    let cli = disorder_cli::Cli::parse();
    if let Err(e) = disorder_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
