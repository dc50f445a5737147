use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use tableau_core::{demo, Bundle};
use tableau_service::batch::{self, BatchError};
use tableau_service::config::ProviderArgs;
use tableau_service::engine::TranslatePath;
use tableau_service::{AppState, Engine};

#[derive(Parser)]
#[command(name = "tableau", version, about = "Image-based robot instruction engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP session service.
    Serve {
        #[arg(long, env = "HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        /// Directory of bundle subdirectories; the built-in demos when absent.
        #[arg(long, env = "BUNDLE_DIR")]
        bundle_dir: Option<PathBuf>,
        /// Where session archives are kept between runs.
        #[arg(long, env = "DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Execute a JSON event script against a bundle and write the archive.
    Replay {
        script: PathBuf,
        bundle: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Compare a session archive against an oracle archive or bundle.
    Judge {
        session: PathBuf,
        oracle: PathBuf,
        #[arg(long, env = "BUNDLE_DIR")]
        bundle_dir: Option<PathBuf>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Print the policy program for a session archive.
    Codegen {
        session: PathBuf,
        #[arg(long, value_enum, default_value = "rule")]
        path: PathArg,
        #[arg(long, env = "BUNDLE_DIR")]
        bundle_dir: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Load a bundle directory and check its environment.
    Validate { bundle: PathBuf },
    /// Write the built-in demo bundles under a directory.
    Demo { out: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PathArg {
    Rule,
    Llm,
}

impl From<PathArg> for TranslatePath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Rule => TranslatePath::Rule,
            PathArg::Llm => TranslatePath::Llm,
        }
    }
}

fn provider_err(e: impl std::fmt::Display) -> BatchError {
    BatchError::Provider(e.to_string())
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), BatchError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| BatchError::Other(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn serve(
    host: String,
    port: u16,
    bundle_dir: Option<PathBuf>,
    data_dir: Option<PathBuf>,
    provider: ProviderArgs,
) -> Result<(), BatchError> {
    let bundles: Vec<Bundle> = batch::bundles(bundle_dir.as_deref())?.into_values().collect();
    let provider = provider.build().map_err(provider_err)?;
    let engine = Engine::new(bundles, provider, data_dir);
    let rt = tokio::runtime::Runtime::new().map_err(|e| BatchError::Other(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .map_err(|e| BatchError::Other(format!("bind {host}:{port}: {e}")))?;
        tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "listening");
        tableau_service::api::serve(listener, AppState::new(engine))
            .await
            .map_err(|e| BatchError::Other(e.to_string()))
    })
}

fn run(cli: Cli) -> Result<(), BatchError> {
    match cli.command {
        Command::Serve {
            host,
            port,
            bundle_dir,
            data_dir,
            provider,
        } => serve(host, port, bundle_dir, data_dir, provider),
        Command::Replay {
            script,
            bundle,
            out,
            provider,
        } => {
            let p = provider.build().map_err(provider_err)?;
            let archive = batch::replay_files(&script, &bundle, p)?;
            write_out(out.as_deref(), &archive.to_text())
        }
        Command::Judge {
            session,
            oracle,
            bundle_dir,
            json,
        } => {
            let report = batch::judge_files(&session, &oracle, bundle_dir.as_deref())?;
            if json {
                print!("{}", report.to_text());
            } else {
                println!("{report}");
            }
            Ok(())
        }
        Command::Codegen {
            session,
            path,
            bundle_dir,
            provider,
        } => {
            let text = match TranslatePath::from(path) {
                TranslatePath::Rule => batch::codegen_file(&session, bundle_dir.as_deref(), None)?,
                TranslatePath::Llm => {
                    let p = provider.build().map_err(provider_err)?;
                    batch::codegen_file(&session, bundle_dir.as_deref(), Some(p.as_ref()))?
                }
            };
            print!("{text}");
            Ok(())
        }
        Command::Validate { bundle } => {
            println!("{}", batch::validate_bundle(&bundle)?);
            Ok(())
        }
        Command::Demo { out } => Ok(demo::write_all(&out)?),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
