//! Headless commands: replay, judge, codegen, validate.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use tableau_core::env::bundle::{self, BundleError};
use tableau_core::judge::ErrorReport;
use tableau_core::llm::Provider;
use tableau_core::timeline::ArchiveError;
use tableau_core::{codegen, demo, judge, Bundle, Event, SessionArchive};

use crate::engine::Engine;
use crate::error::{ApiError, ErrorCode};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("{0}")]
    Other(String),
}

impl BatchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BatchError::Parse(_) => 2,
            BatchError::Validation(_) => 3,
            BatchError::Provider(_) => 4,
            BatchError::Other(_) => 1,
        }
    }
}

impl From<ApiError> for BatchError {
    fn from(e: ApiError) -> Self {
        match e.code {
            ErrorCode::BadRequest => BatchError::Parse(e.message),
            ErrorCode::ProviderError => BatchError::Provider(e.message),
            ErrorCode::Internal => BatchError::Other(e.message),
            _ => BatchError::Validation(e.message),
        }
    }
}

impl From<BundleError> for BatchError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io { .. } => BatchError::Other(e.to_string()),
            _ => BatchError::Parse(e.to_string()),
        }
    }
}

impl From<ArchiveError> for BatchError {
    fn from(e: ArchiveError) -> Self {
        match e {
            ArchiveError::Document(_) => BatchError::Parse(e.to_string()),
            _ => BatchError::Validation(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, BatchError> {
    std::fs::read_to_string(path).map_err(|e| BatchError::Other(format!("{}: {e}", path.display())))
}

pub fn parse_script(text: &str) -> Result<Vec<Event>, BatchError> {
    serde_json::from_str(text).map_err(|e| BatchError::Parse(format!("script: {e}")))
}

pub fn read_archive(path: &Path) -> Result<SessionArchive, BatchError> {
    SessionArchive::from_text(&read(path)?).map_err(|e| match e {
        ArchiveError::Document(d) => BatchError::Parse(format!("{}: {d}", path.display())),
        other => BatchError::Validation(format!("{}: {other}", path.display())),
    })
}

/// Bundles available to the batch commands: those under `root` when given,
/// else the built-in demos.
pub fn bundles(root: Option<&Path>) -> Result<BTreeMap<String, Bundle>, BatchError> {
    match root {
        Some(r) => Ok(bundle::load_all(r)?),
        None => Ok(demo::all().into_iter().map(|b| (b.id.clone(), b)).collect()),
    }
}

fn find<'a>(bundles: &'a BTreeMap<String, Bundle>, id: &str) -> Result<&'a Bundle, BatchError> {
    bundles
        .get(id)
        .ok_or_else(|| BatchError::Validation(format!("no bundle `{id}`")))
}

/// Runs `events` against a fresh session on `bundle`. Drag captions are
/// requested synchronously; a failed caption only leaves the step blank.
pub fn replay(
    bundle: Bundle,
    events: &[Event],
    provider: Arc<dyn Provider>,
) -> Result<SessionArchive, BatchError> {
    let id = bundle.id.clone();
    let engine = Engine::new([bundle], provider, None);
    let s = engine.create_session(&id)?;
    for (i, e) in events.iter().enumerate() {
        let (_, caption) = engine
            .apply_event(&s, s.revision(), e)
            .map_err(|err| BatchError::from(err).context(i))?;
        if let Some(req) = caption {
            engine.run_caption(&req);
        }
    }
    Ok(engine.archive(&s))
}

impl BatchError {
    fn context(self, event: usize) -> Self {
        let wrap = |m: String| format!("event {event}: {m}");
        match self {
            BatchError::Parse(m) => BatchError::Parse(wrap(m)),
            BatchError::Validation(m) => BatchError::Validation(wrap(m)),
            BatchError::Provider(m) => BatchError::Provider(wrap(m)),
            BatchError::Other(m) => BatchError::Other(wrap(m)),
        }
    }
}

pub fn replay_files(
    script: &Path,
    bundle_dir: &Path,
    provider: Arc<dyn Provider>,
) -> Result<SessionArchive, BatchError> {
    let events = parse_script(&read(script)?)?;
    let bundle = Bundle::load(bundle_dir)?;
    replay(bundle, &events, provider)
}

/// Compares two archives. `oracle` may be an archive file or a bundle
/// directory holding one.
pub fn judge_files(
    session: &Path,
    oracle: &Path,
    bundle_root: Option<&Path>,
) -> Result<ErrorReport, BatchError> {
    let participant = read_archive(session)?;
    let (oracle, env) = if oracle.is_dir() {
        let b = Bundle::load(oracle)?;
        let o = b
            .oracle
            .clone()
            .ok_or_else(|| BatchError::Validation(format!("{} has no oracle", oracle.display())))?;
        (o, b.environment)
    } else {
        let o = read_archive(oracle)?;
        let all = bundles(bundle_root)?;
        let env = find(&all, &participant.bundle)?.environment.clone();
        (o, env)
    };
    judge::judge_archives(&env, &participant, &oracle).map_err(|e| BatchError::Validation(e.to_string()))
}

/// Rule-based program text for an archive, or the model's with `llm`.
pub fn codegen_file(
    session: &Path,
    bundle_root: Option<&Path>,
    llm: Option<&dyn Provider>,
) -> Result<String, BatchError> {
    let archive = read_archive(session)?;
    let all = bundles(bundle_root)?;
    let env = &find(&all, &archive.bundle)?.environment;
    let tl = archive.to_timeline(env)?;
    let program = match llm {
        None => codegen::translate_timeline(env, &tl),
        Some(p) => codegen::translate_llm(p, env, &tl.states()),
    }
    .map_err(ApiError::from)?;
    Ok(codegen::emit(&program))
}

/// Loads a bundle and runs environment validation on it. Returns the
/// report text; any finding is an error.
pub fn validate_bundle(dir: &Path) -> Result<String, BatchError> {
    let b = Bundle::load(dir)?;
    let report = b.environment.validate();
    if report.is_valid() {
        Ok(format!("{}: ok", b.id))
    } else {
        Err(BatchError::Validation(format!("{}: {report}", b.id)))
    }
}
