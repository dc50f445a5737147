//! Frozen prompt templates, content-addressed by SHA-256.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptKind {
    Caption,
    Classify,
    StateEdit,
    PredictSteps,
    ProgramSummary,
    CodeGen,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::Caption,
        PromptKind::Classify,
        PromptKind::StateEdit,
        PromptKind::PredictSteps,
        PromptKind::ProgramSummary,
        PromptKind::CodeGen,
    ];

    /// File stem of the template asset and transcript prefix.
    pub fn slug(self) -> &'static str {
        match self {
            PromptKind::Caption => "caption",
            PromptKind::Classify => "classify",
            PromptKind::StateEdit => "state_edit",
            PromptKind::PredictSteps => "predict_steps",
            PromptKind::ProgramSummary => "program_summary",
            PromptKind::CodeGen => "codegen",
        }
    }

    pub fn from_slug(s: &str) -> Option<PromptKind> {
        Self::ALL.into_iter().find(|k| k.slug() == s)
    }

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Caption => include_str!("../../prompts/caption.txt"),
            PromptKind::Classify => include_str!("../../prompts/classify.txt"),
            PromptKind::StateEdit => include_str!("../../prompts/state_edit.txt"),
            PromptKind::PredictSteps => include_str!("../../prompts/predict_steps.txt"),
            PromptKind::ProgramSummary => include_str!("../../prompts/program_summary.txt"),
            PromptKind::CodeGen => include_str!("../../prompts/codegen.txt"),
        }
    }

    pub fn template_hash(self) -> String {
        sha256_hex(self.template().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_round_trip() {
        for k in PromptKind::ALL {
            assert_eq!(PromptKind::from_slug(k.slug()), Some(k));
        }
        assert_eq!(PromptKind::from_slug("nope"), None);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
