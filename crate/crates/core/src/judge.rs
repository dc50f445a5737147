//! Step-sequence comparison against an oracle.
//!
//! Each step is reduced to a signature in which poses are replaced by region
//! labels, so two drops a few pixels apart in the same bowl compare equal.
//! Participant and oracle signatures are aligned by longest common
//! subsequence. Unmatched oracle steps are then looked for among runs of
//! unmatched participant steps whose combined effect equals them
//! (inefficient); the rest are missing, and leftover participant steps are
//! extraneous.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvState, Environment};
use crate::support::{support_of, Support};
use crate::timeline::{diff, SessionArchive};

/// Grid pitch, in canvas pixels, for poses that fall in no named region.
pub const CELL: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("environment mismatch: {0}")]
    EnvironmentMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MoveSignature {
    pub object: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FixtureSignature {
    pub fixture: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeSignature {
    pub moved_objects: Vec<MoveSignature>,
    pub fixture_changes: Vec<FixtureSignature>,
}

impl ChangeSignature {
    pub fn is_empty(&self) -> bool {
        self.moved_objects.is_empty() && self.fixture_changes.is_empty()
    }
}

impl fmt::Display for ChangeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("(no change)");
        }
        let mut parts = Vec::new();
        for m in &self.moved_objects {
            parts.push(format!("{}: {} -> {}", m.object, m.from, m.to));
        }
        for c in &self.fixture_changes {
            parts.push(format!("{}: {} -> {}", c.fixture, c.from, c.to));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Region label of object `name` where it sits in `state`.
pub fn region_label(env: &Environment, state: &EnvState, name: &str) -> Result<String, JudgeError> {
    let mismatch = |e: crate::env::EnvError| JudgeError::EnvironmentMismatch(e.to_string());
    match support_of(env, state, name, &[]).map_err(mismatch)? {
        Support::StackedOn(o) => return Ok(format!("on:{}", o.name)),
        Support::InReceptacle(o) => return Ok(format!("in:{}", o.name)),
        Support::InFixture(f) => return Ok(format!("at:{}", f.name)),
        Support::Counter => {}
    }
    let b = env.object_box(state, name).map_err(mismatch)?;
    let (cx, cy) = b.center();
    if let Some(goals) = env.goal_locations.get(name) {
        for g in goals {
            let gb = crate::geometry::BoundingBox::at(g.pose(), b.w, b.h);
            if gb.contains_point(cx, cy) {
                return Ok(format!("goal:{}", g.label));
            }
        }
    }
    Ok(format!("cell:{},{}", cx / CELL, cy / CELL))
}

/// Signature of the change from `prev` to `state`.
pub fn signature(env: &Environment, prev: &EnvState, state: &EnvState) -> Result<ChangeSignature, JudgeError> {
    for s in [prev, state] {
        env.check_state(s)
            .map_err(|e| JudgeError::EnvironmentMismatch(e.to_string()))?;
    }
    let cs = diff(prev, state).map_err(|e| JudgeError::EnvironmentMismatch(e.to_string()))?;
    let mut moved_objects = Vec::with_capacity(cs.moved_objects.len());
    for m in &cs.moved_objects {
        moved_objects.push(MoveSignature {
            object: m.name.clone(),
            from: region_label(env, prev, &m.name)?,
            to: region_label(env, state, &m.name)?,
        });
    }
    moved_objects.sort();
    let mut fixture_changes: Vec<_> = cs
        .fixture_changes
        .iter()
        .map(|f| FixtureSignature {
            fixture: f.name.clone(),
            from: f.from.clone(),
            to: f.to.clone(),
        })
        .collect();
    fixture_changes.sort();
    Ok(ChangeSignature {
        moved_objects,
        fixture_changes,
    })
}

/// Signatures of each step after the first.
pub fn signatures(env: &Environment, states: &[EnvState]) -> Result<Vec<ChangeSignature>, JudgeError> {
    states
        .windows(2)
        .map(|w| signature(env, &w[0], &w[1]))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexList {
    pub count: usize,
    pub indices: Vec<usize>,
}

impl IndexList {
    fn from(indices: Vec<usize>) -> Self {
        IndexList {
            count: indices.len(),
            indices,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InefficientGroup {
    pub oracle: usize,
    pub participant: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InefficientList {
    pub count: usize,
    pub groups: Vec<InefficientGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Matched,
    Inefficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub oracle: usize,
    pub participant: Vec<usize>,
    pub kind: MatchKind,
}

/// Step indices are timeline positions: the first change is step 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub missing: IndexList,
    pub extraneous: IndexList,
    pub inefficient: InefficientList,
    pub assignment: Vec<Assignment>,
}

impl ErrorReport {
    pub fn is_clean(&self) -> bool {
        self.missing.count == 0 && self.extraneous.count == 0 && self.inefficient.count == 0
    }

    pub fn matched(&self) -> usize {
        self.assignment
            .iter()
            .filter(|a| a.kind == MatchKind::Matched)
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "missing={} extraneous={} inefficient={}",
            self.missing.count, self.extraneous.count, self.inefficient.count
        )
    }
}

/// Longest common subsequence on equality, as 0-based (oracle, participant)
/// pairs. Among maximum matchings the one using the earliest participant
/// steps is chosen.
pub fn lcs_pairs<T: PartialEq>(oracle: &[T], participant: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (oracle.len(), participant.len());
    let mut l = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            l[i][j] = if oracle[i] == participant[j] {
                1 + l[i + 1][j + 1]
            } else {
                l[i + 1][j].max(l[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n && j < m {
        if oracle[i] == participant[j] && l[i][j] == 1 + l[i + 1][j + 1] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if l[i + 1][j] == l[i][j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Aligns signature lists. `composed(a, b)` is the signature of participant
/// steps `a..=b` (0-based) taken together; it is only asked for runs of at
/// least two unmatched steps.
pub fn align_with<F>(
    participant: &[ChangeSignature],
    oracle: &[ChangeSignature],
    mut composed: F,
) -> Result<ErrorReport, JudgeError>
where
    F: FnMut(usize, usize) -> Result<ChangeSignature, JudgeError>,
{
    let pairs = lcs_pairs(oracle, participant);
    let mut p_used = vec![false; participant.len()];
    let mut o_matched = vec![false; oracle.len()];
    let mut assignment = Vec::new();
    for &(o, p) in &pairs {
        p_used[p] = true;
        o_matched[o] = true;
        assignment.push(Assignment {
            oracle: o + 1,
            participant: vec![p + 1],
            kind: MatchKind::Matched,
        });
    }

    let mut groups = Vec::new();
    let mut missing = Vec::new();
    for o in 0..oracle.len() {
        if o_matched[o] {
            continue;
        }
        // participant window between the neighbouring matched anchors
        let lo = pairs.iter().rev().find(|(oi, _)| *oi < o).map_or(0, |(_, p)| p + 1);
        let hi = pairs
            .iter()
            .find(|(oi, _)| *oi > o)
            .map_or(participant.len(), |(_, p)| *p);
        let mut found = None;
        'search: for len in 2..=hi.saturating_sub(lo) {
            for a in lo..=hi - len {
                let b = a + len - 1;
                if p_used[a..=b].iter().any(|u| *u) {
                    continue;
                }
                if composed(a, b)? == oracle[o] {
                    found = Some((a, b));
                    break 'search;
                }
            }
        }
        match found {
            Some((a, b)) => {
                p_used[a..=b].iter_mut().for_each(|u| *u = true);
                let run: Vec<usize> = (a + 1..=b + 1).collect();
                groups.push(InefficientGroup {
                    oracle: o + 1,
                    participant: run.clone(),
                });
                assignment.push(Assignment {
                    oracle: o + 1,
                    participant: run,
                    kind: MatchKind::Inefficient,
                });
            }
            None => missing.push(o + 1),
        }
    }
    assignment.sort_by_key(|a| a.oracle);
    let extraneous = (0..participant.len())
        .filter(|p| !p_used[*p])
        .map(|p| p + 1)
        .collect();
    Ok(ErrorReport {
        missing: IndexList::from(missing),
        extraneous: IndexList::from(extraneous),
        inefficient: InefficientList {
            count: groups.len(),
            groups,
        },
        assignment,
    })
}

/// Aligns two state sequences of the same environment, each starting at its
/// initial state.
pub fn judge_states(
    env: &Environment,
    participant: &[EnvState],
    oracle: &[EnvState],
) -> Result<ErrorReport, JudgeError> {
    let (Some(p0), Some(o0)) = (participant.first(), oracle.first()) else {
        return Err(JudgeError::EnvironmentMismatch("empty step sequence".into()));
    };
    if !p0.same_configuration(o0) {
        return Err(JudgeError::EnvironmentMismatch(
            "sequences start from different initial states".into(),
        ));
    }
    let ps = signatures(env, participant)?;
    let os = signatures(env, oracle)?;
    align_with(&ps, &os, |a, b| signature(env, &participant[a], &participant[b + 1]))
}

pub fn judge_archives(
    env: &Environment,
    participant: &SessionArchive,
    oracle: &SessionArchive,
) -> Result<ErrorReport, JudgeError> {
    if participant.bundle != oracle.bundle {
        return Err(JudgeError::EnvironmentMismatch(format!(
            "session is for `{}`, oracle is for `{}`",
            participant.bundle, oracle.bundle
        )));
    }
    let states = |a: &SessionArchive| a.steps.iter().map(|s| s.state.clone()).collect::<Vec<_>>();
    judge_states(env, &states(participant), &states(oracle))
}
