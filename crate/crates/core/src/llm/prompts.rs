//! Prompt bundles: a frozen system template plus labeled attachments.

use serde::{Deserialize, Serialize};

use super::templates::{sha256_hex, PromptKind};
use super::InstructionClass;
use crate::env::{serialize_state, EnvState, Environment};

pub const ENVIRONMENT_LABEL: &str = "[Environment]";
pub const CURRENT_STATE_LABEL: &str = "[Current Environment State]";
pub const NEXT_STATE_LABEL: &str = "[Next Environment State]";
pub const INSTRUCTION_LABEL: &str = "[Instruction]";
pub const CHANGE_NEEDED_LABEL: &str = "[Change Needed]";

pub fn step_label(i: usize) -> String {
    format!("[Step ({i})]")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub label: String,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub system: String,
    pub template_hash: String,
    pub attachments: Vec<Attachment>,
}

impl PromptBundle {
    fn new(kind: PromptKind, attachments: Vec<(String, String)>) -> Self {
        PromptBundle {
            kind,
            system: kind.template().to_string(),
            template_hash: kind.template_hash(),
            attachments: attachments
                .into_iter()
                .map(|(label, payload)| Attachment { label, payload })
                .collect(),
        }
    }

    pub fn attachment(&self, label: &str) -> Option<&str> {
        self.attachments
            .iter()
            .find(|a| a.label == label)
            .map(|a| a.payload.as_str())
    }

    /// Attachments as the user message: `label: payload` blocks.
    pub fn render_attachments(&self) -> String {
        let mut out = String::new();
        for a in &self.attachments {
            out.push_str(&a.label);
            out.push_str(": ");
            out.push_str(&a.payload);
            if !a.payload.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }

    /// Lookup key for recorded transcripts: SHA-256 over the kind and every
    /// attachment. The system text is covered by the kind because templates
    /// are frozen.
    pub fn digest(&self) -> String {
        let mut buf = String::new();
        buf.push_str(self.kind.slug());
        buf.push('\n');
        for a in &self.attachments {
            buf.push_str(&a.label);
            buf.push('\n');
            buf.push_str(&a.payload);
            buf.push('\n');
        }
        sha256_hex(buf.as_bytes())
    }
}

/// The environment as the model sees it: geometry, classes and fixture
/// states, without rasters or backgrounds.
pub fn environment_view(env: &Environment) -> String {
    let mut v = serde_json::to_value(env).expect("environments serialize");
    if let Some(m) = v.as_object_mut() {
        m.remove("backgrounds");
        m.remove("goalLocations");
        if let Some(objects) = m.get_mut("objects").and_then(|o| o.as_object_mut()) {
            for o in objects.values_mut() {
                if let Some(o) = o.as_object_mut() {
                    o.remove("image");
                }
            }
        }
    }
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

fn env_attachment(env: &Environment) -> (String, String) {
    (ENVIRONMENT_LABEL.to_string(), environment_view(env))
}

fn step_attachments(env: &Environment, steps: &[EnvState]) -> Vec<(String, String)> {
    let mut out = vec![env_attachment(env)];
    for (i, s) in steps.iter().enumerate() {
        out.push((step_label(i + 1), serialize_state(s)));
    }
    out
}

pub fn build_caption_prompt(env: &Environment, current: &EnvState, next: &EnvState) -> PromptBundle {
    PromptBundle::new(
        PromptKind::Caption,
        vec![
            env_attachment(env),
            (CURRENT_STATE_LABEL.to_string(), serialize_state(current)),
            (NEXT_STATE_LABEL.to_string(), serialize_state(next)),
        ],
    )
}

pub fn build_classify_prompt(env: &Environment, state: &EnvState, text: &str) -> PromptBundle {
    PromptBundle::new(
        PromptKind::Classify,
        vec![
            env_attachment(env),
            (CURRENT_STATE_LABEL.to_string(), serialize_state(state)),
            (INSTRUCTION_LABEL.to_string(), text.to_string()),
        ],
    )
}

pub fn build_state_edit_prompt(
    env: &Environment,
    state: &EnvState,
    class: InstructionClass,
    text: &str,
) -> PromptBundle {
    PromptBundle::new(
        PromptKind::StateEdit,
        vec![
            env_attachment(env),
            (CURRENT_STATE_LABEL.to_string(), serialize_state(state)),
            (CHANGE_NEEDED_LABEL.to_string(), class.change_needed().as_str().to_string()),
            (INSTRUCTION_LABEL.to_string(), text.to_string()),
        ],
    )
}

pub fn build_prediction_prompt(env: &Environment, steps: &[EnvState]) -> PromptBundle {
    PromptBundle::new(PromptKind::PredictSteps, step_attachments(env, steps))
}

pub fn build_program_prompt(env: &Environment, steps: &[EnvState]) -> PromptBundle {
    PromptBundle::new(PromptKind::ProgramSummary, step_attachments(env, steps))
}

pub fn build_codegen_prompt(env: &Environment, steps: &[EnvState]) -> PromptBundle {
    PromptBundle::new(PromptKind::CodeGen, step_attachments(env, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::kitchen;

    #[test]
    fn caption_labels_in_order() {
        let env = kitchen();
        let a = env.default_state();
        let b = env.apply_fixture_toggle(&a, "cabinet").unwrap();
        let p = build_caption_prompt(&env, &a, &b);
        let labels: Vec<_> = p.attachments.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, [ENVIRONMENT_LABEL, CURRENT_STATE_LABEL, NEXT_STATE_LABEL]);
        assert_eq!(p.system, PromptKind::Caption.template());

        let swapped = build_caption_prompt(&env, &b, &a);
        assert_eq!(swapped.system, p.system);
        assert_eq!(swapped.template_hash, p.template_hash);
        assert_ne!(swapped.attachments, p.attachments);
        assert_ne!(swapped.digest(), p.digest());
    }

    #[test]
    fn environment_view_drops_rasters() {
        let env = kitchen();
        let v = environment_view(&env);
        assert!(!v.contains("backgrounds"));
        assert!(!v.contains("\"image\""));
        assert!(v.contains("possibleStates"));
        assert!(v.contains("isReceptacle"));
    }

    #[test]
    fn step_labels() {
        let env = kitchen();
        let s = env.default_state();
        let p = build_program_prompt(&env, &[s.clone(), s.clone(), s]);
        let labels: Vec<_> = p.attachments[1..].iter().map(|a| a.label.clone()).collect();
        assert_eq!(labels, ["[Step (1)]", "[Step (2)]", "[Step (3)]"]);
    }
}
