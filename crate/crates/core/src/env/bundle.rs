//! Environment bundles on disk: a directory holding `environment.json`,
//! `initial_state.json`, an optional `oracle.json` session document, and
//! the PNG rasters the manifest references as `file:<name>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use thiserror::Error;

use super::{
    deserialize_environment, deserialize_state, serialize_environment, serialize_state,
    DocumentError, EnvState, Environment, ImageRef,
};
use crate::timeline::{ArchiveError, SessionArchive};

pub const ENVIRONMENT_FILE: &str = "environment.json";
pub const INITIAL_STATE_FILE: &str = "initial_state.json";
pub const ORACLE_FILE: &str = "oracle.json";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Document {
        path: PathBuf,
        source: DocumentError,
    },
    #[error("{}: {source}", path.display())]
    Archive {
        path: PathBuf,
        source: ArchiveError,
    },
    #[error("asset `{0}` escapes the bundle directory")]
    AssetPath(String),
}

impl BundleError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        BundleError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub id: String,
    pub environment: Environment,
    pub initial_state: EnvState,
    pub oracle: Option<SessionArchive>,
    /// Raster files keyed by their path relative to the bundle directory.
    pub assets: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Bundle, BundleError> {
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let read = |name: &str| -> Result<(PathBuf, String), BundleError> {
            let p = dir.join(name);
            fs::read_to_string(&p)
                .map(|t| (p.clone(), t))
                .map_err(|e| BundleError::io(&p, e))
        };
        let (env_path, env_text) = read(ENVIRONMENT_FILE)?;
        let environment = deserialize_environment(&env_text).map_err(|source| {
            BundleError::Document {
                path: env_path,
                source,
            }
        })?;
        let (state_path, state_text) = read(INITIAL_STATE_FILE)?;
        let initial_state = deserialize_state(&environment, &state_text).map_err(|source| {
            BundleError::Document {
                path: state_path,
                source,
            }
        })?;
        let oracle_path = dir.join(ORACLE_FILE);
        let oracle = if oracle_path.exists() {
            let text = fs::read_to_string(&oracle_path)
                .map_err(|e| BundleError::io(&oracle_path, e))?;
            Some(
                SessionArchive::from_text(&text).map_err(|source| BundleError::Archive {
                    path: oracle_path.clone(),
                    source,
                })?,
            )
        } else {
            None
        };

        let mut assets = BTreeMap::new();
        for r in referenced_files(&environment) {
            check_relative(&r)?;
            let p = dir.join(&r);
            let bytes = fs::read(&p).map_err(|e| BundleError::io(&p, e))?;
            assets.insert(r, bytes);
        }
        Ok(Bundle {
            id,
            environment,
            initial_state,
            oracle,
            assets,
        })
    }

    /// Writes the bundle into `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> Result<(), BundleError> {
        fs::create_dir_all(dir).map_err(|e| BundleError::io(dir, e))?;
        let write = |name: &str, bytes: &[u8]| -> Result<(), BundleError> {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| BundleError::io(&p, e))
        };
        write(ENVIRONMENT_FILE, serialize_environment(&self.environment).as_bytes())?;
        write(INITIAL_STATE_FILE, serialize_state(&self.initial_state).as_bytes())?;
        if let Some(oracle) = &self.oracle {
            write(ORACLE_FILE, oracle.to_text().as_bytes())?;
        }
        for (name, bytes) in &self.assets {
            check_relative(name)?;
            write(name, bytes)?;
        }
        Ok(())
    }

    /// The environment with every `file:` raster replaced by inline base64,
    /// for single-document transport.
    pub fn inlined_environment(&self) -> Environment {
        let inline = |r: &ImageRef| match r {
            ImageRef::File(path) => match self.assets.get(path) {
                Some(bytes) => {
                    ImageRef::Inline(base64::engine::general_purpose::STANDARD.encode(bytes))
                }
                None => r.clone(),
            },
            ImageRef::Inline(_) => r.clone(),
        };
        let mut env = self.environment.clone();
        for o in env.objects.values_mut() {
            o.image = inline(&o.image);
        }
        for bg in env.backgrounds.values_mut() {
            *bg = inline(bg);
        }
        env
    }
}

fn referenced_files(env: &Environment) -> Vec<String> {
    let mut out: Vec<String> = env
        .objects
        .values()
        .map(|o| &o.image)
        .chain(env.backgrounds.values())
        .filter_map(|r| match r {
            ImageRef::File(p) => Some(p.clone()),
            ImageRef::Inline(_) => None,
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn check_relative(name: &str) -> Result<(), BundleError> {
    let p = Path::new(name);
    if p.is_absolute()
        || p.components()
            .any(|c| !matches!(c, std::path::Component::Normal(_)))
    {
        return Err(BundleError::AssetPath(name.to_string()));
    }
    Ok(())
}

/// Loads every bundle directory directly under `root`, keyed by id.
pub fn load_all(root: &Path) -> Result<BTreeMap<String, Bundle>, BundleError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(root).map_err(|e| BundleError::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(ENVIRONMENT_FILE).is_file())
        .collect();
    dirs.sort();
    for d in dirs {
        let b = Bundle::load(&d)?;
        out.insert(b.id.clone(), b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let b = demo::kitchen();
        let path = dir.path().join(&b.id);
        b.write(&path).unwrap();
        let back = Bundle::load(&path).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn inlining_replaces_file_refs() {
        let b = demo::kitchen();
        let env = b.inlined_environment();
        assert!(env
            .backgrounds
            .values()
            .all(|r| matches!(r, ImageRef::Inline(_))));
    }

    #[test]
    fn asset_paths_must_stay_inside() {
        assert!(check_relative("bg.png").is_ok());
        assert!(check_relative("../x.png").is_err());
        assert!(check_relative("/etc/passwd").is_err());
    }
}
