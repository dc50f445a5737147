//! Language-model bridge: frozen prompts, response parsers and providers.

mod keyword;
pub(crate) mod literal;
pub mod parse;
pub mod prompts;
pub mod provider;
pub mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvState, Environment};

pub use keyword::keyword_class;
pub use parse::{
    emit_predictions, parse_caption_response, parse_classify_response, parse_prediction_response,
    parse_program_summary, parse_state_edit_response, EditedStep, ParseError, Predictions,
};
pub use prompts::{
    build_caption_prompt, build_classify_prompt, build_codegen_prompt, build_prediction_prompt,
    build_program_prompt, build_state_edit_prompt, Attachment, PromptBundle,
};
pub use provider::{
    Completion, HttpTransport, LiveProvider, MockProvider, Provider, ProviderConfig,
    ProviderError, Transport,
};
pub use templates::PromptKind;

/// Caption of a fixture toggle: the fixture followed by its new state.
pub fn fixture_caption(fixture: &str, state: &str) -> String {
    format!("{fixture} {state}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstructionClass {
    FixtureStateChange,
    ObjectManipulation,
}

impl InstructionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionClass::FixtureStateChange => "FixtureStateChange",
            InstructionClass::ObjectManipulation => "ObjectManipulation",
        }
    }

    pub fn change_needed(self) -> ChangeNeeded {
        match self {
            InstructionClass::FixtureStateChange => ChangeNeeded::ChangeBackground,
            InstructionClass::ObjectManipulation => ChangeNeeded::MoveObjects,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChangeNeeded {
    #[serde(rename = "Change background")]
    ChangeBackground,
    #[serde(rename = "Move objects")]
    MoveObjects,
}

impl ChangeNeeded {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeNeeded::ChangeBackground => "Change background",
            ChangeNeeded::MoveObjects => "Move objects",
        }
    }

    /// Exact match against the two literal strings.
    pub fn parse(s: &str) -> Option<ChangeNeeded> {
        match s {
            "Change background" => Some(ChangeNeeded::ChangeBackground),
            "Move objects" => Some(ChangeNeeded::MoveObjects),
            _ => None,
        }
    }

    pub fn class(self) -> InstructionClass {
        match self {
            ChangeNeeded::ChangeBackground => InstructionClass::FixtureStateChange,
            ChangeNeeded::MoveObjects => InstructionClass::ObjectManipulation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictedAction {
    pub action: String,
    pub change_needed: ChangeNeeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub fn caption_change(
    provider: &dyn Provider,
    env: &Environment,
    current: &EnvState,
    next: &EnvState,
) -> Result<String, BridgeError> {
    let c = provider.complete(&build_caption_prompt(env, current, next))?;
    Ok(parse_caption_response(&c.text)?)
}

pub fn classify_instruction(
    provider: &dyn Provider,
    env: &Environment,
    state: &EnvState,
    text: &str,
) -> Result<InstructionClass, BridgeError> {
    let c = provider.complete(&build_classify_prompt(env, state, text))?;
    Ok(parse_classify_response(&c.text)?)
}

pub fn edit_state(
    provider: &dyn Provider,
    env: &Environment,
    state: &EnvState,
    class: InstructionClass,
    text: &str,
) -> Result<Vec<EditedStep>, BridgeError> {
    let c = provider.complete(&build_state_edit_prompt(env, state, class, text))?;
    Ok(parse_state_edit_response(env, state, text, &c.text)?)
}

/// Classify, then edit: the steps a language instruction produces.
pub fn instruct(
    provider: &dyn Provider,
    env: &Environment,
    state: &EnvState,
    text: &str,
) -> Result<Vec<EditedStep>, BridgeError> {
    let class = classify_instruction(provider, env, state, text)?;
    edit_state(provider, env, state, class, text)
}

pub fn predict_next_actions(
    provider: &dyn Provider,
    env: &Environment,
    steps: &[EnvState],
) -> Result<Predictions, BridgeError> {
    let c = provider.complete(&build_prediction_prompt(env, steps))?;
    Ok(parse_prediction_response(&c.text)?)
}

pub fn summarize_program(
    provider: &dyn Provider,
    env: &Environment,
    steps: &[EnvState],
) -> Result<String, BridgeError> {
    let c = provider.complete(&build_program_prompt(env, steps))?;
    Ok(parse_program_summary(&c.text)?)
}
