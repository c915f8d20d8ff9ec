use clap::Parser;
use hnmt::experiment::{cli, configure_threads};

fn main() {
    configure_threads();
    let args = cli::Cli::parse();
    match cli::run(&args) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
