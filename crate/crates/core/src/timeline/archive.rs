//! Session documents: a bundle reference plus the ordered step records.
//! Oracles are stored in the same shape.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Provenance, Step, Timeline};
use crate::env::{DocumentError, Environment};

pub const ARCHIVE_FORMAT: &str = "tableau.session/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("unsupported archive format `{0}`")]
    Format(String),
    #[error("invalid archive: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionArchive {
    pub format: String,
    /// Bundle id the steps were authored against.
    pub bundle: String,
    pub revision: u64,
    pub selected: usize,
    pub next_id: u64,
    pub steps: Vec<Step>,
}

impl SessionArchive {
    pub fn from_timeline(bundle: &str, tl: &Timeline) -> Self {
        SessionArchive {
            format: ARCHIVE_FORMAT.to_string(),
            bundle: bundle.to_string(),
            revision: tl.revision(),
            selected: tl.selected(),
            next_id: tl.next_id(),
            steps: tl.steps().to_vec(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archives always serialize");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ArchiveError> {
        let a: SessionArchive = crate::env::document_parse(text)?;
        if a.format != ARCHIVE_FORMAT {
            return Err(ArchiveError::Format(a.format));
        }
        Ok(a)
    }

    /// Rebuilds the timeline, checking every timeline invariant against `env`.
    pub fn to_timeline(&self, env: &Environment) -> Result<Timeline, ArchiveError> {
        let invalid = |m: String| Err(ArchiveError::Invalid(m));
        let Some(first) = self.steps.first() else {
            return invalid("no steps".into());
        };
        if first.provenance != Provenance::Initial {
            return invalid("first step is not the initial state".into());
        }
        let mut ids = BTreeSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 && step.provenance == Provenance::Initial {
                return invalid(format!("step {i} claims to be the initial state"));
            }
            if !ids.insert(step.id) {
                return invalid(format!("duplicate step id {}", step.id));
            }
            if let Err(e) = env.check_state(&step.state) {
                return invalid(format!("step {i}: {e}"));
            }
        }
        if self.selected >= self.steps.len() {
            return invalid(format!("selected index {} out of range", self.selected));
        }
        if ids.last().is_some_and(|max| *max >= self.next_id) {
            return invalid("nextId must exceed every step id".into());
        }
        Ok(Timeline::from_parts(
            self.steps.clone(),
            self.selected,
            self.next_id,
            self.revision,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::kitchen;

    #[test]
    fn round_trip_preserves_timeline() {
        let env = kitchen();
        let tl = Timeline::new(&env, &env.default_state())
            .unwrap()
            .record_toggle(&env, "cabinet")
            .unwrap()
            .record_drag(&env, "orange", 40.0, 50.0)
            .unwrap()
            .set_caption(2, "only after washing", false)
            .unwrap();
        let a = SessionArchive::from_timeline("kitchen", &tl);
        let text = a.to_text();
        let back = SessionArchive::from_text(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_timeline(&env).unwrap(), tl);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn broken_archives_are_rejected() {
        let env = kitchen();
        let tl = Timeline::new(&env, &env.default_state()).unwrap();
        let mut a = SessionArchive::from_timeline("kitchen", &tl);
        a.steps[0].provenance = Provenance::Drag;
        assert!(matches!(a.to_timeline(&env), Err(ArchiveError::Invalid(_))));

        let mut a = SessionArchive::from_timeline("kitchen", &tl);
        a.format = "other".into();
        assert!(matches!(
            SessionArchive::from_text(&a.to_text()),
            Err(ArchiveError::Format(_))
        ));
        assert!(matches!(
            SessionArchive::from_text("{"),
            Err(ArchiveError::Document(DocumentError::Parse { .. }))
        ));
    }
}
