use clap::Parser;

fn main() {
    let cli = altc_cli::args::Cli::parse();
    if let Err(e) = altc_cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
