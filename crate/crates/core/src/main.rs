use clap::Parser;

use asso::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASSO_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("asso: {e}");
        std::process::exit(e.exit_code());
    }
}
