//! Total parsers for model responses. Every function returns a typed value
//! or a typed error for any input.

use serde_json::Value;
use thiserror::Error;

use super::literal;
use super::{ChangeNeeded, InstructionClass, PredictedAction};
use crate::env::{EnvState, Environment};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("response has no [Instruction] marker")]
    MissingInstructionMarker,
    #[error("[Instruction] marker is not followed by any text")]
    EmptyInstruction,
    #[error("response has no [Response] marker")]
    MissingResponseMarker,
    #[error("[Response] marker is not followed by any text")]
    EmptyResponse,
    #[error("could not read a list of dictionaries: {0}")]
    UnparseableList(String),
    #[error("change_needed must be \"Change background\" or \"Move objects\", got {0:?}")]
    BadChangeNeeded(String),
    #[error("could not classify response {0:?}")]
    UnparseableClass(String),
    #[error("could not read environment edits: {0}")]
    UnparseableDelta(String),
    #[error("unknown object or fixture `{0}`")]
    UnknownName(String),
    #[error("`{state}` is not a state of fixture `{fixture}`")]
    IllegalState { fixture: String, state: String },
    #[error("`{name}` placed off the canvas")]
    OutOfBounds { name: String },
    #[error("the edits do not change the scene")]
    NoEffect,
}

/// Drops code-fence lines and a leading `json` token.
fn unwrap_body(text: &str) -> String {
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let joined = kept.join("\n");
    let t = joined.trim_start();
    match t.get(..4) {
        Some(w) if w.eq_ignore_ascii_case("json") => t[4..].to_string(),
        _ => t.to_string(),
    }
}

fn after_last<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.rfind(marker).map(|i| &text[i + marker.len()..])
}

fn strip_colon(s: &str) -> &str {
    let s = s.trim_start();
    s.strip_prefix(':').unwrap_or(s)
}

const QUOTES: &[char] = &['"', '\'', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '`'];

/// First non-empty line after the last `[Instruction]` marker, unquoted.
pub fn parse_caption_response(text: &str) -> Result<String, ParseError> {
    let rest = after_last(text, "[Instruction]").ok_or(ParseError::MissingInstructionMarker)?;
    let rest = strip_colon(rest);
    let line = rest
        .lines()
        .map(|l| l.trim().trim_matches(QUOTES).trim())
        .find(|l| !l.is_empty())
        .ok_or(ParseError::EmptyInstruction)?;
    Ok(line.to_string())
}

/// Text after the last `[Response]` marker.
pub fn parse_program_summary(text: &str) -> Result<String, ParseError> {
    let rest = after_last(text, "[Response]").ok_or(ParseError::MissingResponseMarker)?;
    let rest = strip_colon(rest).trim();
    if rest.is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    Ok(rest.to_string())
}

pub fn parse_classify_response(text: &str) -> Result<InstructionClass, ParseError> {
    let norm: String = text
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    let fixture = norm.contains("fixturestatechange");
    let object = norm.contains("objectmanipulation");
    match (fixture, object) {
        (true, false) => Ok(InstructionClass::FixtureStateChange),
        (false, true) => Ok(InstructionClass::ObjectManipulation),
        _ => Err(ParseError::UnparseableClass(truncate(text, 80))),
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// Reads the list-of-dictionaries body of a response. Accepts a single list,
/// or a run of bare dictionaries (e.g. an enumerated list of dicts).
fn read_dicts(text: &str) -> Result<Vec<serde_json::Map<String, Value>>, String> {
    let body = unwrap_body(text);
    let body = match after_last(&body, "[Response]") {
        Some(r) => unwrap_body(strip_colon(r)),
        None => body,
    };
    let Some(start) = body.find(['[', '{']) else {
        return Err("no list or dictionary found".into());
    };
    let mut values = Vec::new();
    if body.as_bytes()[start] == b'[' {
        let (v, _) = literal::parse_at(&body, start)
            .map_err(|e| format!("at byte {}: {}", e.offset, e.message))?;
        match v {
            Value::Array(items) => values = items,
            _ => unreachable!("a literal starting with `[` is a list"),
        }
    } else {
        let mut at = start;
        loop {
            let (v, end) = literal::parse_at(&body, at)
                .map_err(|e| format!("at byte {}: {}", e.offset, e.message))?;
            values.push(v);
            match body[end..].find('{') {
                Some(next) => at = end + next,
                None => break,
            }
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::Object(m) => Ok(m),
            other => Err(format!("entry {} is not a dictionary: {other}", i + 1)),
        })
        .collect()
}

/// Predicted next steps, truncated to two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predictions {
    pub actions: Vec<PredictedAction>,
    pub warnings: Vec<String>,
}

pub fn parse_prediction_response(text: &str) -> Result<Predictions, ParseError> {
    let dicts = read_dicts(text).map_err(ParseError::UnparseableList)?;
    if dicts.is_empty() {
        return Err(ParseError::UnparseableList("the list is empty".into()));
    }
    let mut actions = Vec::new();
    for (i, d) in dicts.iter().enumerate() {
        let field = |k: &str| -> Result<&str, ParseError> {
            d.get(k).and_then(Value::as_str).ok_or_else(|| {
                ParseError::UnparseableList(format!("entry {} has no string `{k}`", i + 1))
            })
        };
        let action = field("action")?.trim().to_string();
        let raw = field("change_needed")?;
        let change_needed = ChangeNeeded::parse(raw.trim())
            .ok_or_else(|| ParseError::BadChangeNeeded(raw.to_string()))?;
        actions.push(PredictedAction {
            action,
            change_needed,
        });
    }
    let mut warnings = Vec::new();
    if actions.len() > 2 {
        warnings.push(format!(
            "model returned {} predictions; kept the first 2",
            actions.len()
        ));
        actions.truncate(2);
    }
    Ok(Predictions { actions, warnings })
}

/// Documented body shape for predictions; the inverse of
/// [`parse_prediction_response`].
pub fn emit_predictions(actions: &[PredictedAction]) -> String {
    let list: Vec<Value> = actions
        .iter()
        .map(|a| {
            serde_json::json!({
                "action": a.action,
                "change_needed": a.change_needed.as_str(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(list)).expect("values serialize")
}

/// One materialized step of a language edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditedStep {
    pub state: EnvState,
    pub caption: String,
}

fn coordinate(v: &Value, name: &str) -> Result<f64, ParseError> {
    v.as_f64()
        .ok_or_else(|| ParseError::UnparseableDelta(format!("coordinate of `{name}` is not a number")))
}

fn read_pose(env: &Environment, name: &str, v: &Value) -> Result<Pose, ParseError> {
    let (x, y) = match v {
        Value::Object(m) => {
            let x = m.get("x").ok_or_else(|| {
                ParseError::UnparseableDelta(format!("`{name}` has no x"))
            })?;
            let y = m.get("y").ok_or_else(|| {
                ParseError::UnparseableDelta(format!("`{name}` has no y"))
            })?;
            (coordinate(x, name)?, coordinate(y, name)?)
        }
        Value::Array(a) if a.len() == 2 => (coordinate(&a[0], name)?, coordinate(&a[1], name)?),
        _ => {
            return Err(ParseError::UnparseableDelta(format!(
                "position of `{name}` must be {{\"x\", \"y\"}}"
            )))
        }
    };
    let out_of_bounds = || ParseError::OutOfBounds {
        name: name.to_string(),
    };
    let pose = Pose::from_f64(x, y).ok_or_else(out_of_bounds)?;
    if !env.canvas.contains_point(pose.x, pose.y) {
        return Err(out_of_bounds());
    }
    Ok(pose)
}

fn apply_delta(
    env: &Environment,
    state: &EnvState,
    d: &serde_json::Map<String, Value>,
) -> Result<(EnvState, Option<String>), ParseError> {
    let mut next = state.clone();
    let mut caption = None;
    let mut touched = false;
    for (k, v) in d {
        match k.as_str() {
            "fixtures" => {
                let m = v.as_object().ok_or_else(|| {
                    ParseError::UnparseableDelta("'fixtures' must be a dictionary".into())
                })?;
                for (name, s) in m {
                    let f = env
                        .fixtures
                        .get(name)
                        .ok_or_else(|| ParseError::UnknownName(name.clone()))?;
                    let s = match s {
                        Value::String(s) => s.as_str(),
                        Value::Object(o) => o.get("state").and_then(Value::as_str).ok_or_else(
                            || ParseError::UnparseableDelta(format!("no state for `{name}`")),
                        )?,
                        _ => {
                            return Err(ParseError::UnparseableDelta(format!(
                                "state of `{name}` must be a string"
                            )))
                        }
                    };
                    if !f.has_state(s) {
                        return Err(ParseError::IllegalState {
                            fixture: name.clone(),
                            state: s.to_string(),
                        });
                    }
                    next.fixture_states.insert(name.clone(), s.to_string());
                    touched = true;
                }
            }
            "objects" => {
                let m = v.as_object().ok_or_else(|| {
                    ParseError::UnparseableDelta("'objects' must be a dictionary".into())
                })?;
                for (name, p) in m {
                    if !env.objects.contains_key(name) {
                        return Err(ParseError::UnknownName(name.clone()));
                    }
                    let pose = read_pose(env, name, p)?;
                    next.object_poses.insert(name.clone(), pose);
                    touched = true;
                }
            }
            "caption" => {
                let c = v.as_str().ok_or_else(|| {
                    ParseError::UnparseableDelta("'caption' must be a string".into())
                })?;
                caption = Some(c.trim().to_string()).filter(|c| !c.is_empty());
            }
            other => {
                return Err(ParseError::UnparseableDelta(format!("unexpected key '{other}'")))
            }
        }
    }
    if !touched {
        return Err(ParseError::UnparseableDelta(
            "a step names no fixtures or objects".into(),
        ));
    }
    Ok((next, caption))
}

/// Applies the edits in `text` cumulatively starting from `state`. Edits
/// that change nothing are dropped; captions default to the instruction.
pub fn parse_state_edit_response(
    env: &Environment,
    state: &EnvState,
    instruction: &str,
    text: &str,
) -> Result<Vec<EditedStep>, ParseError> {
    let dicts = read_dicts(text).map_err(ParseError::UnparseableDelta)?;
    let mut current = state.clone();
    let mut raw = Vec::new();
    for d in &dicts {
        let (next, caption) = apply_delta(env, &current, d)?;
        if next.same_configuration(&current) {
            continue;
        }
        current = next.clone();
        raw.push((next, caption));
    }
    if raw.is_empty() {
        return Err(ParseError::NoEffect);
    }
    let n = raw.len();
    let instruction = instruction.trim();
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (s, c))| {
            let caption = c.unwrap_or_else(|| {
                if n == 1 {
                    instruction.to_string()
                } else {
                    format!("{instruction} (step {} of {n})", i + 1)
                }
            });
            EditedStep {
                state: s.with_caption(caption.clone()),
                caption,
            }
        })
        .collect())
}
