use clap::Parser;

fn main() {
    let cli = rme::cli::Cli::parse();
    if let Err(e) = rme::cli::run(cli) {
        eprintln!("rme: {e}");
        std::process::exit(1);
    }
}
