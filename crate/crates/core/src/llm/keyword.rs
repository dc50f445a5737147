//! Keyword classification used by the offline provider.
//!
//! A fixture instruction names a fixture (by name or class) and one of that
//! fixture's states ("open", "on"; a verb prefix such as "close" for
//! "closed" also counts). Otherwise, naming any object makes it an object
//! manipulation. Fixtures are checked first.

use serde_json::Value;

use super::prompts::{ENVIRONMENT_LABEL, INSTRUCTION_LABEL};
use super::{InstructionClass, PromptBundle};
use crate::env::Environment;

struct Vocabulary {
    fixtures: Vec<(String, String, Vec<String>)>,
    objects: Vec<(String, String)>,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whether the word sequence `phrase` occurs in `ws`.
fn mentions(ws: &[String], phrase: &str) -> bool {
    let p = words(phrase);
    !p.is_empty() && ws.windows(p.len()).any(|w| w == p.as_slice())
}

fn state_word(w: &str, state: &str) -> bool {
    let state = state.to_lowercase();
    w == state || (w.len() >= 4 && state.starts_with(w))
}

fn classify(v: &Vocabulary, text: &str) -> Option<InstructionClass> {
    let ws = words(text);
    for (name, class, states) in &v.fixtures {
        if (mentions(&ws, name) || mentions(&ws, class))
            && ws.iter().any(|w| states.iter().any(|s| state_word(w, s)))
        {
            return Some(InstructionClass::FixtureStateChange);
        }
    }
    v.objects
        .iter()
        .any(|(name, class)| mentions(&ws, name) || mentions(&ws, class))
        .then_some(InstructionClass::ObjectManipulation)
}

/// Keyword rule over a loaded environment.
pub fn keyword_class(env: &Environment, text: &str) -> Option<InstructionClass> {
    let v = Vocabulary {
        fixtures: env
            .fixtures
            .values()
            .map(|f| (f.name.clone(), f.class.clone(), f.possible_states.clone()))
            .collect(),
        objects: env
            .objects
            .values()
            .map(|o| (o.name.clone(), o.class.clone()))
            .collect(),
    };
    classify(&v, text)
}

/// Answers a classification prompt from its attachments. `None` when the
/// attachments are missing or malformed.
pub(crate) fn classify_prompt(prompt: &PromptBundle) -> Option<String> {
    let env: Value = serde_json::from_str(prompt.attachment(ENVIRONMENT_LABEL)?).ok()?;
    let text = prompt.attachment(INSTRUCTION_LABEL)?;
    let str_of = |v: &Value, k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").to_string();
    let fixtures = env
        .get("fixtures")?
        .as_object()?
        .iter()
        .map(|(name, f)| {
            let states = f
                .get("possibleStates")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                .unwrap_or_default();
            (name.clone(), str_of(f, "class"), states)
        })
        .collect();
    let objects = env
        .get("objects")?
        .as_object()?
        .iter()
        .map(|(name, o)| (name.clone(), str_of(o, "class")))
        .collect();
    let v = Vocabulary { fixtures, objects };
    Some(match classify(&v, text) {
        Some(c) => c.as_str().to_string(),
        None => "Unknown".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::kitchen;
    use InstructionClass::*;

    #[test]
    fn hand_labels() {
        let env = kitchen();
        let cases = [
            ("open the cabinet", Some(FixtureStateChange)),
            ("Close the drawer please", Some(FixtureStateChange)),
            ("turn the stove to high", Some(FixtureStateChange)),
            ("move the orange into the bowl", Some(ObjectManipulation)),
            ("put the red apple in the cabinet", Some(ObjectManipulation)),
            ("open the orange", Some(ObjectManipulation)),
            ("dance", None),
        ];
        for (text, want) in cases {
            assert_eq!(keyword_class(&env, text), want, "{text}");
        }
    }

    #[test]
    fn short_prefixes_do_not_count() {
        assert!(!state_word("o", "open"));
        assert!(!state_word("clo", "closed"));
        assert!(state_word("close", "closed"));
    }
}
