use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::background::is_key_safe;
use super::{BackgroundKey, Environment};

/// One violated environment invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    MissingBackground { key: BackgroundKey },
    UnexpectedBackground { key: BackgroundKey },
    DuplicateName { name: String },
    ReservedCharacter { name: String },
    EmptyName,
    NonPositiveSize { name: String },
    SizeMismatch { name: String },
    BoxOutOfBounds { name: String },
    AnchorOutOfBounds { name: String },
    NoStates { fixture: String },
    DuplicateState { fixture: String, state: String },
    GoalForUnknownObject { name: String },
    GoalOutOfBounds { name: String, label: String },
    EmptyCanvas,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingBackground { key } => write!(f, "missing background `{key}`"),
            Violation::UnexpectedBackground { key } => {
                write!(f, "background `{key}` matches no fixture-state combination")
            }
            Violation::DuplicateName { name } => {
                write!(f, "`{name}` names both an object and a fixture")
            }
            Violation::ReservedCharacter { name } => {
                write!(f, "`{name}` contains `=` or `;`")
            }
            Violation::EmptyName => write!(f, "empty object or fixture name"),
            Violation::NonPositiveSize { name } => write!(f, "`{name}` has a zero-sized box"),
            Violation::SizeMismatch { name } => {
                write!(f, "`{name}` width/height disagree with its bounding box")
            }
            Violation::BoxOutOfBounds { name } => {
                write!(f, "bounding box of `{name}` leaves the canvas")
            }
            Violation::AnchorOutOfBounds { name } => {
                write!(f, "anchor of fixture `{name}` is off the canvas")
            }
            Violation::NoStates { fixture } => write!(f, "fixture `{fixture}` has no states"),
            Violation::DuplicateState { fixture, state } => {
                write!(f, "fixture `{fixture}` lists state `{state}` twice")
            }
            Violation::GoalForUnknownObject { name } => {
                write!(f, "goal locations given for unknown object `{name}`")
            }
            Violation::GoalOutOfBounds { name, label } => {
                write!(f, "goal `{label}` of `{name}` is off the canvas")
            }
            Violation::EmptyCanvas => write!(f, "canvas has zero size"),
        }
    }
}

/// Every invariant an [`Environment`] violates; empty iff valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

impl Environment {
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let canvas = self.canvas;
        if canvas.width == 0 || canvas.height == 0 {
            out.push(Violation::EmptyCanvas);
        }

        for name in self.objects.keys().filter(|n| self.fixtures.contains_key(*n)) {
            out.push(Violation::DuplicateName { name: name.clone() });
        }

        for (name, o) in &self.objects {
            check_name(name, &mut out);
            let b = o.bounding_box;
            if b.w == 0 || b.h == 0 {
                out.push(Violation::NonPositiveSize { name: name.clone() });
            }
            if o.width != b.w || o.height != b.h {
                out.push(Violation::SizeMismatch { name: name.clone() });
            }
            if !canvas.contains_box(&b) {
                out.push(Violation::BoxOutOfBounds { name: name.clone() });
            }
        }

        for (name, f) in &self.fixtures {
            check_name(name, &mut out);
            let b = f.bounding_box;
            if b.w == 0 || b.h == 0 {
                out.push(Violation::NonPositiveSize { name: name.clone() });
            }
            if f.width != b.w || f.height != b.h {
                out.push(Violation::SizeMismatch { name: name.clone() });
            }
            if !canvas.contains_box(&b) {
                out.push(Violation::BoxOutOfBounds { name: name.clone() });
            }
            if !canvas.contains_point(f.x, f.y) {
                out.push(Violation::AnchorOutOfBounds { name: name.clone() });
            }
            if f.possible_states.is_empty() {
                out.push(Violation::NoStates {
                    fixture: name.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            for s in &f.possible_states {
                if !is_key_safe(s) {
                    out.push(Violation::ReservedCharacter { name: s.clone() });
                }
                if !seen.insert(s) {
                    out.push(Violation::DuplicateState {
                        fixture: name.clone(),
                        state: s.clone(),
                    });
                }
            }
        }

        // Only enumerate combinations when every fixture has states; an
        // empty list already produced a violation above.
        if self.fixtures.values().all(|f| !f.possible_states.is_empty()) {
            let expected: BTreeSet<BackgroundKey> = self
                .all_fixture_assignments()
                .iter()
                .map(BackgroundKey::from_states)
                .collect();
            for key in expected.iter().filter(|k| !self.backgrounds.contains_key(*k)) {
                out.push(Violation::MissingBackground { key: key.clone() });
            }
            for key in self.backgrounds.keys().filter(|k| !expected.contains(*k)) {
                out.push(Violation::UnexpectedBackground { key: key.clone() });
            }
        }

        for (name, goals) in &self.goal_locations {
            if !self.objects.contains_key(name) {
                out.push(Violation::GoalForUnknownObject { name: name.clone() });
            }
            for g in goals {
                if !canvas.contains_point(g.x, g.y) {
                    out.push(Violation::GoalOutOfBounds {
                        name: name.clone(),
                        label: g.label.clone(),
                    });
                }
            }
        }

        ValidationReport { violations: out }
    }
}

fn check_name(name: &str, out: &mut Vec<Violation>) {
    if name.is_empty() {
        out.push(Violation::EmptyName);
    } else if !is_key_safe(name) {
        out.push(Violation::ReservedCharacter {
            name: name.to_string(),
        });
    }
}
