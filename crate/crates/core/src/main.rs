use clap::Parser;

use ovcd::cli::{dispatch, Cli};
use ovcd::components::Registry;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    std::process::exit(dispatch(cli, &Registry::with_builtin()));
}
