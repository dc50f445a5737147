//! JSON documents for environments and states.
//!
//! Field names follow the interchange schema exactly: objects carry `class`,
//! `boundingBox`, `category`, `isReceptacle`, `width`, `height`, `image`;
//! fixtures add `x`, `y`, `possibleStates`; states are
//! `{caption, objects: {name: {x, y}}, fixtures: {name: {state}}, objectOrder}`.

use std::collections::BTreeMap;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use super::{EnvState, Environment};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("parse error at byte {offset} (field `{path}`): {message}")]
    Parse {
        offset: usize,
        path: String,
        message: String,
    },
    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },
}

impl DocumentError {
    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        DocumentError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    caption: String,
    objects: BTreeMap<String, Pose>,
    fixtures: BTreeMap<String, FixtureStateDoc>,
    #[serde(rename = "objectOrder")]
    object_order: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureStateDoc {
    state: String,
}

impl From<&EnvState> for StateDoc {
    fn from(s: &EnvState) -> Self {
        StateDoc {
            caption: s.caption.clone(),
            objects: s.object_poses.clone(),
            fixtures: s
                .fixture_states
                .iter()
                .map(|(k, v)| (k.clone(), FixtureStateDoc { state: v.clone() }))
                .collect(),
            object_order: s.object_order.clone(),
        }
    }
}

impl From<StateDoc> for EnvState {
    fn from(d: StateDoc) -> Self {
        EnvState {
            caption: d.caption,
            object_poses: d.objects,
            fixture_states: d.fixtures.into_iter().map(|(k, v)| (k, v.state)).collect(),
            object_order: d.object_order,
        }
    }
}

impl Serialize for EnvState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for EnvState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        StateDoc::deserialize(d).map(Into::into)
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("documents always serialize");
    out.push('\n');
    out
}

pub fn serialize_environment(env: &Environment) -> String {
    to_pretty(env)
}

pub fn serialize_state(state: &EnvState) -> String {
    to_pretty(state)
}

pub fn deserialize_environment(text: &str) -> Result<Environment, DocumentError> {
    parse_document(text)
}

/// Parses a state document and checks it against `env`.
pub fn deserialize_state(env: &Environment, text: &str) -> Result<EnvState, DocumentError> {
    let state: EnvState = parse_document(text)?;
    check_state_schema(env, &state)?;
    Ok(state)
}

/// Parses a state document without an environment to check against.
pub fn deserialize_state_unchecked(text: &str) -> Result<EnvState, DocumentError> {
    parse_document(text)
}

pub(crate) fn parse_document<T: DeserializeOwned>(text: &str) -> Result<T, DocumentError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        // `?` stands for a map key that was never read
        let path = e.path().to_string();
        let path = path.trim_end_matches(".?").to_string();
        let inner = e.into_inner();
        convert_json_error(text, path, &inner)
    })?;
    de.end()
        .map_err(|e| convert_json_error(text, String::from("."), &e))?;
    Ok(value)
}

fn convert_json_error(text: &str, path: String, e: &serde_json::Error) -> DocumentError {
    use serde_json::error::Category;
    let message = e.to_string();
    match e.classify() {
        Category::Data => {
            let mut field = if path == "." { String::new() } else { path };
            if let Some(name) = backticked_field(&message) {
                if !field.is_empty() {
                    field.push('.');
                }
                field.push_str(name);
            }
            if field.is_empty() {
                field.push('.');
            }
            DocumentError::Schema { field, message }
        }
        Category::Syntax | Category::Eof | Category::Io => DocumentError::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            path,
            message,
        },
    }
}

/// Field named in serde's "missing field `x`" / "unknown field `x`" messages.
fn backticked_field(message: &str) -> Option<&str> {
    let rest = message
        .strip_prefix("missing field `")
        .or_else(|| message.strip_prefix("unknown field `"))?;
    rest.split('`').next()
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn check_state_schema(env: &Environment, state: &EnvState) -> Result<(), DocumentError> {
    if let Some(extra) = state.object_poses.keys().find(|k| !env.objects.contains_key(*k)) {
        return Err(DocumentError::schema(
            format!("objects.{extra}"),
            "not an object of the environment",
        ));
    }
    if let Some(missing) = env.objects.keys().find(|k| !state.object_poses.contains_key(*k)) {
        return Err(DocumentError::schema(
            "objects",
            format!("missing pose for `{missing}`"),
        ));
    }
    if let Some(extra) = state.fixture_states.keys().find(|k| !env.fixtures.contains_key(*k)) {
        return Err(DocumentError::schema(
            format!("fixtures.{extra}"),
            "not a fixture of the environment",
        ));
    }
    if let Some(missing) = env.fixtures.keys().find(|k| !state.fixture_states.contains_key(*k)) {
        return Err(DocumentError::schema(
            "fixtures",
            format!("missing state for `{missing}`"),
        ));
    }
    for (name, s) in &state.fixture_states {
        if !env.fixtures[name].has_state(s) {
            return Err(DocumentError::schema(
                format!("fixtures.{name}.state"),
                format!("`{s}` is not one of the fixture's possibleStates"),
            ));
        }
    }
    for (name, p) in &state.object_poses {
        if !env.canvas.contains_point(p.x, p.y) {
            return Err(DocumentError::schema(
                format!("objects.{name}"),
                format!("position {p} is off the canvas"),
            ));
        }
    }
    let mut order = state.object_order.clone();
    order.sort();
    if !order.iter().eq(env.objects.keys()) {
        return Err(DocumentError::schema(
            "objectOrder",
            "not a permutation of the environment's objects",
        ));
    }
    Ok(())
}
