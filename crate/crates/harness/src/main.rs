use clap::Parser;

fn main() {
    let cli = ddfas::cli::Cli::parse();
    if let Err(e) = ddfas::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
