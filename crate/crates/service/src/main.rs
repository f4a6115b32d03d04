use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use oak_core::eval::run_named_benchmark;
use oak_service::{OakService, Providers, ServiceConfig, ServiceError};

#[derive(Parser)]
#[command(name = "oak", version, about = "Knowledge base service for guided defect inspection")]
struct Cli {
    /// JSON config file; OAK_DATA_DIR overrides its data_dir.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Ingest a defects catalog file into the data directory.
    Ingest { catalog: PathBuf },
    /// Run a synthetic retrieval benchmark.
    Bench {
        #[arg(long, value_enum)]
        dataset: Dataset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        top: Vec<usize>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Save or verify-and-load the snapshot in the data directory.
    Snapshot {
        #[arg(value_enum)]
        action: SnapshotAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Movie,
    Animal,
    Defect,
}

impl Dataset {
    fn name(self) -> &'static str {
        match self {
            Dataset::Movie => "movie",
            Dataset::Animal => "animal",
            Dataset::Defect => "defect",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SnapshotAction {
    Save,
    Load,
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => {
            let listen = config.listen.clone();
            // Opened before the runtime starts: opening may block on disk.
            let service = Arc::new(OakService::open(config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&listen).await?;
                eprintln!("oak listening on {}", listener.local_addr()?);
                oak_service::http::serve(service, listener).await
            })?;
        }
        Command::Ingest { catalog } => {
            let service = OakService::open(config)?;
            let report = service.ingest_catalog_file(&catalog)?;
            if !service.config().autosave {
                service.save_snapshot()?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench { dataset, seed, top, json } => {
            let providers = Providers::from_config(&config);
            let report = run_named_benchmark(dataset.name(), seed, providers.embedder.as_ref(), &top)
                .map_err(ServiceError::from)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Snapshot { action } => {
            let service = OakService::open(config)?;
            match action {
                SnapshotAction::Save => {
                    let manifest = service.save_snapshot()?;
                    println!("{}", serde_json::to_string_pretty(&manifest)?);
                }
                SnapshotAction::Load => {
                    service.load_snapshot()?;
                    println!("{}", serde_json::to_string_pretty(&service.health())?);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
