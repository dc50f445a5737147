//! The ordered instruction steps and the rules for creating, merging,
//! copying and deleting them.
//!
//! Every operation takes `&self` and returns a new [`Timeline`]; on error the
//! original is untouched, which is what makes service mutations atomic.

pub mod archive;
mod changeset;
mod event;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, EnvState, Environment};
use crate::geometry::Pose;
use crate::llm::fixture_caption;

pub use archive::{ArchiveError, SessionArchive};
pub use event::Event;
pub use changeset::{
    apply, compose, diff, ChangeSet, ChangeSetError, FixtureChange, ObjectMove, OrderChange,
};

pub const INITIAL_CAPTION: &str = "Initial state";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid initial state: {0}")]
    InvalidState(EnvError),
    #[error("the initial step cannot be deleted")]
    CannotDeleteInitial,
    #[error("the initial step cannot be edited")]
    CannotEditInitial,
    #[error("step index {index} out of range for {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    ChangeSet(#[from] ChangeSetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Initial,
    Drag,
    Toggle,
    Language,
    Predicted,
    Copy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub id: u64,
    pub state: EnvState,
    pub caption: String,
    /// Caption and image edit each other while linked.
    pub linked: bool,
    pub provenance: Provenance,
}

impl Step {
    /// Equality ignoring the step id.
    pub fn same_content(&self, other: &Step) -> bool {
        self.state == other.state
            && self.caption == other.caption
            && self.linked == other.linked
            && self.provenance == other.provenance
    }
}

/// Result of a drag against the selected step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DragOutcome {
    Inserted(usize),
    Coalesced(usize),
    /// The coalesced drag put the object back where the predecessor had it,
    /// so the step was dropped.
    Reverted,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    steps: Vec<Step>,
    selected: usize,
    next_id: u64,
    revision: u64,
}

/// A consistency problem left behind by mid-timeline edits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWarning {
    pub index: usize,
    pub message: String,
}

impl Timeline {
    pub fn new(env: &Environment, initial: &EnvState) -> Result<Timeline, TimelineError> {
        env.check_state(initial).map_err(TimelineError::InvalidState)?;
        let state = initial.clone().with_caption(INITIAL_CAPTION);
        Ok(Timeline {
            steps: vec![Step {
                id: 0,
                state,
                caption: INITIAL_CAPTION.to_string(),
                linked: true,
                provenance: Provenance::Initial,
            }],
            selected: 0,
            next_id: 1,
            revision: 0,
        })
    }

    pub(crate) fn from_parts(
        steps: Vec<Step>,
        selected: usize,
        next_id: u64,
        revision: u64,
    ) -> Timeline {
        Timeline {
            steps,
            selected,
            next_id,
            revision,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn selected(&self) -> usize {
        self.selected
    }

    pub fn selected_step(&self) -> &Step {
        &self.steps[self.selected]
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub(crate) fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn step(&self, index: usize) -> Result<&Step, TimelineError> {
        self.steps.get(index).ok_or(TimelineError::IndexOutOfRange {
            index,
            len: self.steps.len(),
        })
    }

    /// Change set of step `index` against its predecessor (empty for step 0).
    pub fn change_at(&self, index: usize) -> Result<ChangeSet, TimelineError> {
        let step = self.step(index)?;
        if index == 0 {
            return Ok(ChangeSet::default());
        }
        Ok(diff(&self.steps[index - 1].state, &step.state)?)
    }

    /// States of every step, initial first.
    pub fn states(&self) -> Vec<EnvState> {
        self.steps.iter().map(|s| s.state.clone()).collect()
    }

    fn bumped(mut self) -> Timeline {
        self.revision += 1;
        self
    }

    fn new_step(&mut self, state: EnvState, caption: String, provenance: Provenance) -> Step {
        let id = self.next_id;
        self.next_id += 1;
        Step {
            id,
            state: state.with_caption(caption.clone()),
            caption,
            linked: true,
            provenance,
        }
    }

    /// Drag of `name` dropped at sub-pixel `(x, y)`.
    pub fn record_drag(
        &self,
        env: &Environment,
        name: &str,
        x: f64,
        y: f64,
    ) -> Result<Timeline, TimelineError> {
        let pose = Pose::from_f64(x, y).ok_or(EnvError::OutOfBounds { x, y })?;
        self.record_drag_to(env, name, pose).map(|(tl, _)| tl)
    }

    /// Drag of `name` to `pose`. Consecutive drags of the same object refine
    /// the selected drag step instead of adding steps.
    pub fn record_drag_to(
        &self,
        env: &Environment,
        name: &str,
        pose: Pose,
    ) -> Result<(Timeline, DragOutcome), TimelineError> {
        let sel = self.selected_step();
        let moved = env.apply_object_move(&sel.state, name, pose)?;

        if sel.provenance == Provenance::Drag && self.selected > 0 {
            let pred = &self.steps[self.selected - 1];
            let current = diff(&pred.state, &sel.state)?;
            if current.single_move().is_some_and(|m| m.name == name) {
                if moved.same_configuration(&sel.state) {
                    return Ok((self.clone(), DragOutcome::Unchanged));
                }
                let mut tl = self.clone();
                let refined = diff(&pred.state, &moved)?;
                if refined.moved_objects.is_empty() && refined.fixture_changes.is_empty() {
                    let at = tl.selected;
                    tl.steps.remove(at);
                    tl.selected = at - 1;
                    return Ok((tl.bumped(), DragOutcome::Reverted));
                }
                let idx = tl.selected;
                let step = &mut tl.steps[idx];
                if step.linked {
                    // the old caption described the previous drop point
                    step.caption.clear();
                }
                step.state = moved.with_caption(step.caption.clone());
                return Ok((tl.bumped(), DragOutcome::Coalesced(idx)));
            }
        }

        if moved.same_configuration(&sel.state) {
            return Ok((self.clone(), DragOutcome::Unchanged));
        }
        let mut tl = self.clone();
        let step = tl.new_step(moved, String::new(), Provenance::Drag);
        let at = tl.selected + 1;
        tl.steps.insert(at, step);
        tl.selected = at;
        Ok((tl.bumped(), DragOutcome::Inserted(at)))
    }

    /// Inserts a step after the selection with fixture `name` cycled.
    pub fn record_toggle(&self, env: &Environment, name: &str) -> Result<Timeline, TimelineError> {
        let toggled = env.apply_fixture_toggle(&self.selected_step().state, name)?;
        let caption = fixture_caption(name, &toggled.fixture_states[name]);
        let mut tl = self.clone();
        let step = tl.new_step(toggled, caption, Provenance::Toggle);
        let at = tl.selected + 1;
        tl.steps.insert(at, step);
        tl.selected = at;
        Ok(tl.bumped())
    }

    pub fn copy_step(&self, index: usize) -> Result<Timeline, TimelineError> {
        let src = self.step(index)?.clone();
        let mut tl = self.clone();
        let mut step = tl.new_step(src.state, src.caption, Provenance::Copy);
        step.linked = src.linked;
        tl.steps.insert(index + 1, step);
        tl.selected = index + 1;
        Ok(tl.bumped())
    }

    pub fn delete_step(&self, index: usize) -> Result<Timeline, TimelineError> {
        self.step(index)?;
        if index == 0 {
            return Err(TimelineError::CannotDeleteInitial);
        }
        let mut tl = self.clone();
        tl.steps.remove(index);
        if tl.selected > index {
            tl.selected -= 1;
        }
        tl.selected = tl.selected.min(tl.steps.len() - 1);
        Ok(tl.bumped())
    }

    pub fn select(&self, index: usize) -> Result<Timeline, TimelineError> {
        self.step(index)?;
        if index == self.selected {
            return Ok(self.clone());
        }
        let mut tl = self.clone();
        tl.selected = index;
        Ok(tl.bumped())
    }

    /// Moves `name` within the selected step's draw order, in place.
    pub fn reorder(
        &self,
        env: &Environment,
        name: &str,
        position: usize,
    ) -> Result<Timeline, TimelineError> {
        if self.selected == 0 {
            return Err(TimelineError::CannotEditInitial);
        }
        let sel = self.selected_step();
        let reordered = env.apply_reorder(&sel.state, name, position)?;
        if reordered == sel.state {
            return Ok(self.clone());
        }
        let mut tl = self.clone();
        let idx = tl.selected;
        tl.steps[idx].state = reordered;
        Ok(tl.bumped())
    }

    pub fn set_caption(
        &self,
        index: usize,
        text: &str,
        linked: bool,
    ) -> Result<Timeline, TimelineError> {
        self.step(index)?;
        if index == 0 {
            return Err(TimelineError::CannotEditInitial);
        }
        let mut tl = self.clone();
        let step = &mut tl.steps[index];
        step.caption = text.to_string();
        step.state.caption = text.to_string();
        step.linked = linked;
        Ok(tl.bumped())
    }

    /// Fills in a generated caption for step `id`, provided the step still
    /// has no caption and still shows `expected`. Does not bump the revision:
    /// the caption was requested by the edit that made the step.
    pub fn fill_caption(&self, id: u64, expected: &EnvState, caption: &str) -> Option<Timeline> {
        let index = self.steps.iter().position(|s| s.id == id)?;
        let step = &self.steps[index];
        if index == 0 || !step.caption.is_empty() || !step.state.same_configuration(expected) {
            return None;
        }
        let mut tl = self.clone();
        let step = &mut tl.steps[index];
        step.caption = caption.to_string();
        step.state.caption = caption.to_string();
        Some(tl)
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    /// Replaces the state of step `index` (caption-driven edits).
    pub fn replace_state(
        &self,
        env: &Environment,
        index: usize,
        state: EnvState,
        caption: &str,
    ) -> Result<Timeline, TimelineError> {
        self.step(index)?;
        if index == 0 {
            return Err(TimelineError::CannotEditInitial);
        }
        env.check_state(&state)?;
        let mut tl = self.clone();
        let step = &mut tl.steps[index];
        step.caption = caption.to_string();
        step.state = state.with_caption(caption);
        step.linked = true;
        Ok(tl.bumped())
    }

    /// Inserts generated steps after the selection, in order, and selects
    /// the last one.
    pub fn insert_generated(
        &self,
        env: &Environment,
        states: Vec<(EnvState, String)>,
        provenance: Provenance,
    ) -> Result<Timeline, TimelineError> {
        if states.is_empty() {
            return Ok(self.clone());
        }
        let mut tl = self.clone();
        for (state, caption) in states {
            env.check_state(&state)?;
            let step = tl.new_step(state, caption, provenance);
            let at = tl.selected + 1;
            tl.steps.insert(at, step);
            tl.selected = at;
        }
        Ok(tl.bumped())
    }

    /// Inserts a previously removed step at `index` under a fresh id.
    pub fn restore_step(&self, index: usize, step: &Step) -> Result<Timeline, TimelineError> {
        if index == 0 {
            return Err(TimelineError::CannotEditInitial);
        }
        if index > self.steps.len() {
            return Err(TimelineError::IndexOutOfRange {
                index,
                len: self.steps.len(),
            });
        }
        let mut tl = self.clone();
        let mut step = step.clone();
        step.id = tl.next_id;
        tl.next_id += 1;
        tl.steps.insert(index, step);
        if tl.selected >= index {
            tl.selected += 1;
        }
        Ok(tl.bumped())
    }

    /// Steps whose change against the predecessor no longer looks like a
    /// single manual edit, typically after a mid-timeline insert or delete.
    /// States are never rebased automatically.
    pub fn consistency_warnings(&self) -> Vec<StepWarning> {
        let mut out = Vec::new();
        for (i, w) in self.steps.windows(2).enumerate() {
            let index = i + 1;
            let step = &w[1];
            let Ok(cs) = diff(&w[0].state, &step.state) else {
                out.push(StepWarning {
                    index,
                    message: "state does not match its predecessor's environment".into(),
                });
                continue;
            };
            let manual = matches!(step.provenance, Provenance::Drag | Provenance::Toggle);
            let edits = cs.moved_objects.len() + cs.fixture_changes.len();
            if manual && edits != 1 {
                out.push(StepWarning {
                    index,
                    message: format!(
                        "step {} changes {edits} items relative to its predecessor",
                        step.id
                    ),
                });
            }
        }
        out
    }
}
