use clap::Parser;

use aol_cli::args::Cli;
use aol_cli::commands;

/// Environment variable capping internal parallelism.
const THREADS_VAR: &str = "AOL_THREADS";

fn configure_threads() {
    if let Ok(value) = std::env::var(THREADS_VAR) {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring {THREADS_VAR}={value} (want a positive integer)"),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    configure_threads();
    if let Err(err) = commands::run(cli) {
        let code = err.exit_code();
        if code == 4 {
            eprintln!("warning: {err}");
        } else {
            eprintln!("error: {err}");
        }
        std::process::exit(code);
    }
}
