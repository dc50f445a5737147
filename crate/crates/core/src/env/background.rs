use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Canonical `name=state` segments sorted by fixture name and joined by `;`.
///
/// Fixture names and states may not contain `=` or `;` (validation rejects
/// them), which keeps the encoding injective.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BackgroundKey(String);

impl BackgroundKey {
    /// Builds the key without checking names against an environment.
    pub fn from_states(states: &BTreeMap<String, String>) -> Self {
        let mut out = String::new();
        for (i, (name, state)) in states.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(name);
            out.push('=');
            out.push_str(state);
        }
        BackgroundKey(out)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Splits the key back into its assignment; `None` if malformed.
    pub fn parse(&self) -> Option<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        if self.0.is_empty() {
            return Some(out);
        }
        for seg in self.0.split(';') {
            let (name, state) = seg.split_once('=')?;
            if name.is_empty() || state.contains('=') {
                return None;
            }
            if out.insert(name.to_string(), state.to_string()).is_some() {
                return None;
            }
        }
        Some(out)
    }
}

impl From<&str> for BackgroundKey {
    fn from(s: &str) -> Self {
        BackgroundKey(s.to_string())
    }
}

impl fmt::Display for BackgroundKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_key_safe(s: &str) -> bool {
    !s.is_empty() && !s.contains(['=', ';'])
}
