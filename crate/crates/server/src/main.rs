use std::process::ExitCode;

use clap::Parser;
use modelforge_server::config::{Cli, Command};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let Command::Serve(args) = Cli::parse().command;
    let config = match args.resolve(|k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("modelforge: {e}");
            return ExitCode::from(2);
        }
    };
    let filter = EnvFilter::try_new(&config.log_level).unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("modelforge: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    runtime.block_on(async {
        let server = match modelforge_server::start(&config).await {
            Ok(s) => s,
            Err(e) => {
                eprintln!("modelforge: {e}");
                return ExitCode::FAILURE;
            }
        };
        println!("modelforge listening on http://{}{}", server.addr(), config.base_path);
        let _ = tokio::signal::ctrl_c().await;
        match server.shutdown().await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("modelforge: {e}");
                ExitCode::FAILURE
            }
        }
    })
}
