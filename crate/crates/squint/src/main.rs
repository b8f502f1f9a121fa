use clap::Parser;

use squint::cli::{exit_code, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Prints help/version at exit 0 and usage errors at exit 2.
        Err(err) => err.exit(),
    };
    if let Err(err) = cli.run() {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
