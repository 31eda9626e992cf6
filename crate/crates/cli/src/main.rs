mod commands;
mod config;

use clap::Parser;

fn env_seed() -> Result<Option<u64>, config::CliError> {
    match std::env::var("TCLEVY_SEED") {
        Ok(raw) => raw.parse::<u64>().map(Some).map_err(|_| {
            config::CliError(format!(
                "TCLEVY_SEED must be an unsigned integer, got \"{raw}\""
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn main() {
    let cli = config::Cli::parse();
    let result = env_seed()
        .map_err(|e| Box::new(e) as Box<dyn std::error::Error>)
        .and_then(|seed| {
            config::resolve(cli.command.kind(), cli.command.args(), seed)
                .map_err(|e| Box::new(e) as Box<dyn std::error::Error>)
        })
        .and_then(|run_config| commands::run(&run_config));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
