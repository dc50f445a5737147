//! Goal-location autocomplete and model-proposed next steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvState, Environment, GoalLocation};
use crate::geometry::{BoundingBox, Pose};
use crate::llm::{self, BridgeError, ChangeNeeded, Provider};
use crate::timeline::{DragOutcome, Provenance, Timeline, TimelineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssistError {
    #[error("`{0}` has no goal locations")]
    NotManipulable(String),
    #[error("candidate {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("proposal was made at revision {proposed}, timeline is at {current}")]
    StaleProposal { proposed: u64, current: u64 },
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalProposal {
    pub object_name: String,
    pub candidates: Vec<GoalLocation>,
}

/// Region a goal candidate falls in: the receptacle or fixture holding the
/// candidate box's center, else the candidate box itself.
fn owning_region(env: &Environment, state: &EnvState, object: &str, candidate: &BoundingBox) -> BoundingBox {
    let (cx, cy) = candidate.center();
    let receptacle = env
        .objects
        .values()
        .filter(|o| o.is_receptacle && o.name != object)
        .filter_map(|o| env.object_box(state, &o.name).ok())
        .filter(|b| b.contains_point(cx, cy))
        .min_by_key(BoundingBox::area);
    if let Some(b) = receptacle {
        return b;
    }
    env.fixtures
        .values()
        .map(|f| f.bounding_box)
        .filter(|b| b.contains_point(cx, cy))
        .min_by_key(BoundingBox::area)
        .unwrap_or(*candidate)
}

/// Goal candidates for `object` in the selected step, without those the
/// object already occupies.
pub fn propose_goals(env: &Environment, tl: &Timeline, object: &str) -> Result<GoalProposal, AssistError> {
    let not_manipulable = || AssistError::NotManipulable(object.to_string());
    if !env.objects.contains_key(object) {
        return Err(not_manipulable());
    }
    let goals = env.goal_locations.get(object).ok_or_else(not_manipulable)?;
    let state = &tl.selected_step().state;
    let current = env.object_box(state, object).map_err(TimelineError::from)?;
    let candidates = goals
        .iter()
        .filter(|g| {
            let cand = BoundingBox::at(g.pose(), current.w, current.h);
            !current.mostly_inside(&owning_region(env, state, object, &cand))
        })
        .cloned()
        .collect();
    Ok(GoalProposal {
        object_name: object.to_string(),
        candidates,
    })
}

/// Performs candidate `index` as a drag of the object to its coordinates.
pub fn accept_goal(
    env: &Environment,
    tl: &Timeline,
    proposal: &GoalProposal,
    index: usize,
) -> Result<(Timeline, DragOutcome), AssistError> {
    let g = proposal
        .candidates
        .get(index)
        .ok_or(AssistError::IndexOutOfRange {
            index,
            len: proposal.candidates.len(),
        })?;
    Ok(tl.record_drag_to(env, &proposal.object_name, Pose::new(g.x, g.y))?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlausibleStep {
    pub action: String,
    pub change_needed: ChangeNeeded,
    pub state: EnvState,
}

/// Alternatives for the step after the selection, tied to the revision they
/// were computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Proposals {
    pub revision: u64,
    pub steps: Vec<PlausibleStep>,
    pub warnings: Vec<String>,
}

/// Asks the model for up to two next actions and materializes each one.
/// Actions that cannot be materialized are dropped with a warning.
pub fn propose_next_steps(
    env: &Environment,
    tl: &Timeline,
    provider: &dyn Provider,
) -> Result<Proposals, AssistError> {
    let history: Vec<EnvState> = tl.steps()[..=tl.selected()]
        .iter()
        .map(|s| s.state.clone())
        .collect();
    let current = &tl.selected_step().state;
    let predictions = llm::predict_next_actions(provider, env, &history)?;
    let mut warnings = predictions.warnings;
    let mut steps = Vec::new();
    for a in predictions.actions {
        let edited = match llm::instruct(provider, env, current, &a.action) {
            Ok(e) => e,
            Err(e) => {
                tracing::warn!(action = %a.action, error = %e, "dropping proposal");
                warnings.push(format!("dropped `{}`: {e}", a.action));
                continue;
            }
        };
        let Some(last) = edited.last() else {
            continue;
        };
        if last.state.same_configuration(current) {
            warnings.push(format!("dropped `{}`: no net change", a.action));
            continue;
        }
        steps.push(PlausibleStep {
            state: last.state.clone().with_caption(a.action.clone()),
            action: a.action,
            change_needed: a.change_needed,
        });
    }
    Ok(Proposals {
        revision: tl.revision(),
        steps,
        warnings,
    })
}

/// Adds proposal `index` after the selection.
pub fn accept_plausible(
    env: &Environment,
    tl: &Timeline,
    proposals: &Proposals,
    index: usize,
) -> Result<Timeline, AssistError> {
    if proposals.revision != tl.revision() {
        return Err(AssistError::StaleProposal {
            proposed: proposals.revision,
            current: tl.revision(),
        });
    }
    let p = proposals.steps.get(index).ok_or(AssistError::IndexOutOfRange {
        index,
        len: proposals.steps.len(),
    })?;
    Ok(tl.insert_generated(
        env,
        vec![(p.state.clone(), p.action.clone())],
        Provenance::Predicted,
    )?)
}

/// Rejection leaves the timeline alone; the caller forgets the proposal.
pub fn reject_plausible(tl: &Timeline) -> Timeline {
    tl.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::llm::{build_prediction_prompt, build_state_edit_prompt, InstructionClass, MockProvider};

    fn kitchen_tl() -> (Environment, Timeline) {
        let b = demo::kitchen();
        let tl = Timeline::new(&b.environment, &b.initial_state).unwrap();
        (b.environment, tl)
    }

    #[test]
    fn goal_candidates() {
        let (env, tl) = kitchen_tl();
        let p = propose_goals(&env, &tl, "orange").unwrap();
        assert_eq!(p.candidates.len(), 2);
        assert!(matches!(propose_goals(&env, &tl, "cabinet"), Err(AssistError::NotManipulable(_))));
        assert!(matches!(propose_goals(&env, &tl, "bowl"), Err(AssistError::NotManipulable(_))));

        let (tl2, _) = accept_goal(&env, &tl, &p, 0).unwrap();
        assert_eq!(tl2.len(), 2);
        let g = &p.candidates[0];
        assert_eq!(tl2.selected_step().state.object_poses["orange"], Pose::new(g.x, g.y));
        let after = propose_goals(&env, &tl2, "orange").unwrap();
        assert_eq!(after.candidates.len(), 1);
        assert_ne!(after.candidates[0].label, g.label);

        let (tl3, _) = accept_goal(&env, &tl2, &after, 0).unwrap();
        assert_eq!(tl3.len(), 2, "second accept coalesces");
        assert!(matches!(
            accept_goal(&env, &tl, &p, 5),
            Err(AssistError::IndexOutOfRange { index: 5, len: 2 })
        ));
    }

    #[test]
    fn only_goal_occupied_gives_empty() {
        let (env, tl) = kitchen_tl();
        let p = propose_goals(&env, &tl, "apple").unwrap();
        assert_eq!(p.candidates.len(), 1);
        let (tl, _) = accept_goal(&env, &tl, &p, 0).unwrap();
        assert!(propose_goals(&env, &tl, "apple").unwrap().candidates.is_empty());
    }

    fn mock_for(env: &Environment, tl: &Timeline, predictions: &str) -> MockProvider {
        let states = tl.states();
        let s = &states[0];
        let mut m = MockProvider::new();
        m.register_for(&build_prediction_prompt(env, &states), predictions);
        m.register_for(
            &build_state_edit_prompt(env, s, InstructionClass::FixtureStateChange, "open the cabinet"),
            "[{'fixtures': {'cabinet': 'open'}}]",
        );
        m.register_for(
            &build_state_edit_prompt(env, s, InstructionClass::ObjectManipulation, "put the orange in the bowl"),
            "[{'objects': {'orange': {'x': 325, 'y': 210}}}]",
        );
        m
    }

    #[test]
    fn proposals_accept_and_reject() {
        let (env, tl) = kitchen_tl();
        let m = mock_for(
            &env,
            &tl,
            "[{'action': 'open the cabinet', 'change_needed': 'Change background'},
              {'action': 'put the orange in the bowl', 'change_needed': 'Move objects'}]",
        );
        let p = propose_next_steps(&env, &tl, &m).unwrap();
        assert_eq!(p.steps.len(), 2, "{:?}", p.warnings);
        assert_eq!(reject_plausible(&tl), tl);
        let accepted = accept_plausible(&env, &tl, &p, 1).unwrap();
        assert_eq!(accepted.len(), 2);
        assert_eq!(accepted.selected_step().provenance, Provenance::Predicted);
        assert_eq!(accepted.selected_step().caption, "put the orange in the bowl");

        let moved = tl.record_drag(&env, "apple", 10.0, 10.0).unwrap();
        assert!(matches!(
            accept_plausible(&env, &moved, &p, 0),
            Err(AssistError::StaleProposal { .. })
        ));
    }

    #[test]
    fn unknown_items_are_dropped() {
        let (env, tl) = kitchen_tl();
        let m = mock_for(
            &env,
            &tl,
            "[{'action': 'open the cabinet', 'change_needed': 'Change background'},
              {'action': 'juggle the pineapple', 'change_needed': 'Move objects'}]",
        );
        let p = propose_next_steps(&env, &tl, &m).unwrap();
        assert_eq!(p.steps.len(), 1);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn provider_failure_surfaces() {
        let (env, tl) = kitchen_tl();
        let m = MockProvider::new();
        assert!(matches!(
            propose_next_steps(&env, &tl, &m),
            Err(AssistError::Bridge(BridgeError::Provider(_)))
        ));
    }
}
