use clap::Parser;

use couplap::cli::{error_json, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("{}", error_json(&err));
        std::process::exit(err.exit_code());
    }
}
