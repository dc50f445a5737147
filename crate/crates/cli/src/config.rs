//! Provider selection shared by `serve` and the batch commands.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, ValueEnum};

use tableau_core::llm::{LiveProvider, MockProvider, Provider, ProviderConfig, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ProviderMode {
    /// Recorded transcripts only; never touches the network.
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long = "provider", env = "PROVIDER_MODE", value_enum, default_value_t = ProviderMode::Mock)]
    pub mode: ProviderMode,
    /// Directory of recorded `<kind>-<digest>.txt` transcripts (mock mode).
    #[arg(long, env = "TRANSCRIPT_DIR")]
    pub transcript_dir: Option<PathBuf>,
    #[arg(long, env = "PROVIDER_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "PROVIDER_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "PROVIDER_TIMEOUT_SECS")]
    pub timeout_secs: Option<f64>,
    #[arg(long, env = "PROVIDER_MAX_RETRIES")]
    pub max_retries: Option<u32>,
    #[arg(long, env = "PROVIDER_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
}

impl Default for ProviderArgs {
    fn default() -> Self {
        ProviderArgs {
            mode: ProviderMode::Mock,
            transcript_dir: None,
            endpoint: None,
            model: None,
            timeout_secs: None,
            max_retries: None,
            api_key: None,
        }
    }
}

impl ProviderArgs {
    pub fn build(&self) -> Result<Arc<dyn Provider>, ProviderError> {
        match self.mode {
            ProviderMode::Mock => {
                let m = match &self.transcript_dir {
                    Some(dir) => MockProvider::from_dir(dir)?,
                    None => MockProvider::new(),
                };
                Ok(Arc::new(m))
            }
            ProviderMode::Live => {
                let d = ProviderConfig::default();
                let config = ProviderConfig {
                    endpoint: self.endpoint.clone().unwrap_or(d.endpoint),
                    model: self.model.clone().unwrap_or(d.model),
                    timeout_secs: self.timeout_secs.unwrap_or(d.timeout_secs),
                    max_retries: self.max_retries.unwrap_or(d.max_retries),
                    temperature: d.temperature,
                    api_key: self.api_key.clone(),
                };
                Ok(Arc::new(LiveProvider::http(config)?))
            }
        }
    }
}

/// How long a model-backed request may run before the caller gets a job id
/// to poll instead of the result.
pub const DEFAULT_PENDING_AFTER: Duration = Duration::from_secs(2);
