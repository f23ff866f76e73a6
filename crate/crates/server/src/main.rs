use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use hypotree::cli::{self, CliError, Format};
use hypotree::{ApiConfig, AppState};

#[derive(Parser)]
#[command(name = "hypotree", version, about = "Hypothesis-tree exploration service and analysis tools")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        /// TOML config file.
        #[arg(long, env = "HYPOTREE_CONFIG")]
        config: Option<PathBuf>,
        /// Deterministic offline generation and retrieval.
        #[arg(long)]
        mock: bool,
        #[arg(long)]
        port: Option<u16>,
        /// Session store directory.
        #[arg(long, env = "HYPOTREE_STORE")]
        store: Option<PathBuf>,
    },
    /// Print the session report and per-session tables of session directories.
    Analyze {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Rebuild a session from its event log and check it against diagram.json.
    Replay { dir: PathBuf },
    /// Write the diagram and report of a session to one JSON file.
    Export { dir: PathBuf, out: PathBuf },
}

fn serve(config: Option<PathBuf>, mock: bool, port: Option<u16>, store: Option<PathBuf>) -> anyhow::Result<()> {
    let mut cfg = match &config {
        Some(path) => ApiConfig::load(path)?,
        None => ApiConfig::default(),
    };
    cfg.apply_env();
    cfg.mock_mode |= mock;
    if let Some(store) = store {
        cfg.store_root = store;
    }
    if let Some(port) = port {
        let host = cfg.bind_address.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h).to_owned();
        cfg.bind_address = format!("{host}:{port}");
    }
    let bind = cfg.bind_address.clone();
    let state = Arc::new(AppState::new(cfg)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        tracing::info!(address = %listener.local_addr()?, "listening");
        axum::serve(listener, hypotree::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Args::parse().command {
        Command::Serve { config, mock, port, store } => match serve(config, mock, port, store) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{}", serde_json::json!({"error": "ServeFailed", "message": format!("{e:#}")}));
                ExitCode::FAILURE
            }
        },
        Command::Analyze { dirs, format } => match cli::analyze(&dirs, format) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Replay { dir } => match cli::replay(&dir) {
            Ok(summary) => {
                println!("{summary}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Export { dir, out } => match cli::export(&dir, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
    }
}
