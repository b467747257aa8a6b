use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use prefdesign_cli::{dataset, plot, runner, ErrorRecord, EXIT_CONFIG, OUTPUT_ROOT_ENV};
use prefdesign_service::AppState;

#[derive(Parser)]
#[command(name = "prefdesign", version, about = "Active preference-pair selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the strategy × batch size × pooling × seed product.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning curves and 2D panels from a run or sweep directory.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embedding dataset tools.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Serve live annotation sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Session directory; defaults to `$PREFDESIGN_OUTPUT_ROOT/sessions`.
        #[arg(long)]
        root: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    Validate { path: PathBuf },
    Convert { input: PathBuf, output: PathBuf },
}

fn session_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => Path::new(&root).join("sessions"),
        _ => PathBuf::from("sessions"),
    })
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!(error = %e, "cannot listen for ctrl-c");
        std::future::pending::<()>().await;
    }
    tracing::info!("shutting down");
}

fn serve(addr: SocketAddr, root: PathBuf) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async move {
        let state = Arc::new(AppState::open(&root).with_context(|| format!("opening {}", root.display()))?);
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        println!(
            "{}",
            serde_json::json!({ "listening": local.to_string(), "root": root, "sessions": state.session_ids().len() })
        );
        prefdesign_service::serve_until(listener, state, shutdown_signal()).await?;
        Ok(())
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => runner::cmd_run(&config, out.as_deref()).map(drop),
        Command::Sweep { config, jobs, out } => runner::cmd_sweep(&config, jobs, out.as_deref()).map(drop),
        Command::Plot { input, out } => plot::cmd_plot(&input, &out).map(drop),
        Command::Dataset { command } => match command {
            DatasetCommand::Validate { path } => dataset::cmd_validate(&path).map(drop),
            DatasetCommand::Convert { input, output } => dataset::cmd_convert(&input, &output).map(drop),
        },
        Command::Serve { addr, root } => serve(addr, session_root(root)),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let record = serde_json::json!({
                "error": "config",
                "exit_code": EXIT_CONFIG,
                "message": e.kind().to_string(),
                "causes": [],
            });
            eprintln!("{record}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = ErrorRecord::from_error(&err);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| err.to_string()));
            ExitCode::from(record.exit_code as u8)
        }
    }
}
