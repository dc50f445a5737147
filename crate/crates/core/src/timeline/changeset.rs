//! Structured differences between two snapshots of one environment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvState;
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChangeSetError {
    #[error("states do not belong to the same environment")]
    EnvironmentMismatch,
    #[error("change set does not match the state: {0}")]
    ChangeSetMismatch(String),
    #[error("change sets do not chain: {0}")]
    ComposeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMove {
    pub name: String,
    pub from: Pose,
    pub to: Pose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureChange {
    pub name: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderChange {
    pub before: Vec<String>,
    pub after: Vec<String>,
}

/// Moved objects, fixture transitions and draw-order change between two
/// snapshots. Entries are sorted by name; captions are not part of a diff.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeSet {
    pub moved_objects: Vec<ObjectMove>,
    pub fixture_changes: Vec<FixtureChange>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<OrderChange>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.moved_objects.is_empty() && self.fixture_changes.is_empty() && self.order.is_none()
    }

    pub fn order_changed(&self) -> bool {
        self.order.is_some()
    }

    pub fn moved(&self, name: &str) -> Option<&ObjectMove> {
        self.moved_objects.iter().find(|m| m.name == name)
    }

    /// Exactly one object moved and nothing else changed except draw order.
    pub fn single_move(&self) -> Option<&ObjectMove> {
        match (&self.moved_objects[..], self.fixture_changes.is_empty()) {
            ([only], true) => Some(only),
            _ => None,
        }
    }

    /// Sorts entries by name and drops entries that change nothing.
    pub fn normalize(&self) -> ChangeSet {
        let mut moved: Vec<ObjectMove> = self
            .moved_objects
            .iter()
            .filter(|m| m.from != m.to)
            .cloned()
            .collect();
        moved.sort_by(|a, b| a.name.cmp(&b.name));
        let mut fixtures: Vec<FixtureChange> = self
            .fixture_changes
            .iter()
            .filter(|f| f.from != f.to)
            .cloned()
            .collect();
        fixtures.sort_by(|a, b| a.name.cmp(&b.name));
        let order = self.order.clone().filter(|o| o.before != o.after);
        ChangeSet {
            moved_objects: moved,
            fixture_changes: fixtures,
            order,
        }
    }
}

/// Everything that differs between `a` and `b`.
pub fn diff(a: &EnvState, b: &EnvState) -> Result<ChangeSet, ChangeSetError> {
    if !a.object_poses.keys().eq(b.object_poses.keys())
        || !a.fixture_states.keys().eq(b.fixture_states.keys())
    {
        return Err(ChangeSetError::EnvironmentMismatch);
    }
    let mut sorted_a = a.object_order.clone();
    let mut sorted_b = b.object_order.clone();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(ChangeSetError::EnvironmentMismatch);
    }

    let moved_objects = a
        .object_poses
        .iter()
        .zip(b.object_poses.values())
        .filter(|((_, pa), pb)| pa != pb)
        .map(|((name, pa), pb)| ObjectMove {
            name: name.clone(),
            from: *pa,
            to: *pb,
        })
        .collect();
    let fixture_changes = a
        .fixture_states
        .iter()
        .zip(b.fixture_states.values())
        .filter(|((_, sa), sb)| sa != sb)
        .map(|((name, sa), sb)| FixtureChange {
            name: name.clone(),
            from: sa.clone(),
            to: sb.clone(),
        })
        .collect();
    let order = (a.object_order != b.object_order).then(|| OrderChange {
        before: a.object_order.clone(),
        after: b.object_order.clone(),
    });
    Ok(ChangeSet {
        moved_objects,
        fixture_changes,
        order,
    })
}

/// Applies `cs` to `s`. Every `from` value must match `s`.
pub fn apply(cs: &ChangeSet, s: &EnvState) -> Result<EnvState, ChangeSetError> {
    let mut out = s.clone();
    for m in &cs.moved_objects {
        let current = out.object_poses.get_mut(&m.name).ok_or_else(|| {
            ChangeSetError::ChangeSetMismatch(format!("unknown object `{}`", m.name))
        })?;
        if *current != m.from {
            return Err(ChangeSetError::ChangeSetMismatch(format!(
                "`{}` is at {} not {}",
                m.name, current, m.from
            )));
        }
        *current = m.to;
    }
    for f in &cs.fixture_changes {
        let current = out.fixture_states.get_mut(&f.name).ok_or_else(|| {
            ChangeSetError::ChangeSetMismatch(format!("unknown fixture `{}`", f.name))
        })?;
        if *current != f.from {
            return Err(ChangeSetError::ChangeSetMismatch(format!(
                "`{}` is `{}` not `{}`",
                f.name, current, f.from
            )));
        }
        *current = f.to.clone();
    }
    if let Some(o) = &cs.order {
        if out.object_order != o.before {
            return Err(ChangeSetError::ChangeSetMismatch(
                "draw order differs from the change set's `before`".into(),
            ));
        }
        let mut a = o.before.clone();
        let mut b = o.after.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(ChangeSetError::ChangeSetMismatch(
                "draw order change is not a permutation".into(),
            ));
        }
        out.object_order = o.after.clone();
    }
    Ok(out)
}

/// The single change set equivalent to applying `first` then `second`.
pub fn compose(first: &ChangeSet, second: &ChangeSet) -> Result<ChangeSet, ChangeSetError> {
    let mut moves: BTreeMap<&str, (Pose, Pose)> = BTreeMap::new();
    for m in &first.moved_objects {
        moves.insert(&m.name, (m.from, m.to));
    }
    for m in &second.moved_objects {
        match moves.get_mut(m.name.as_str()) {
            Some((_, to)) => {
                if *to != m.from {
                    return Err(ChangeSetError::ComposeMismatch(format!(
                        "`{}` ends at {} but then starts at {}",
                        m.name, to, m.from
                    )));
                }
                *to = m.to;
            }
            None => {
                moves.insert(&m.name, (m.from, m.to));
            }
        }
    }

    let mut fixtures: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for f in &first.fixture_changes {
        fixtures.insert(&f.name, (&f.from, &f.to));
    }
    for f in &second.fixture_changes {
        match fixtures.get_mut(f.name.as_str()) {
            Some((_, to)) => {
                if *to != f.from {
                    return Err(ChangeSetError::ComposeMismatch(format!(
                        "`{}` ends `{}` but then starts `{}`",
                        f.name, to, f.from
                    )));
                }
                *to = &f.to;
            }
            None => {
                fixtures.insert(&f.name, (&f.from, &f.to));
            }
        }
    }

    let order = match (&first.order, &second.order) {
        (None, None) => None,
        (Some(o), None) | (None, Some(o)) => Some(o.clone()),
        (Some(a), Some(b)) => {
            if a.after != b.before {
                return Err(ChangeSetError::ComposeMismatch(
                    "draw orders do not chain".into(),
                ));
            }
            Some(OrderChange {
                before: a.before.clone(),
                after: b.after.clone(),
            })
        }
    };

    Ok(ChangeSet {
        moved_objects: moves
            .into_iter()
            .map(|(name, (from, to))| ObjectMove {
                name: name.to_string(),
                from,
                to,
            })
            .collect(),
        fixture_changes: fixtures
            .into_iter()
            .map(|(name, (from, to))| FixtureChange {
                name: name.to_string(),
                from: from.to_string(),
                to: to.to_string(),
            })
            .collect(),
        order,
    }
    .normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::kitchen;

    fn mv(name: &str, from: (u32, u32), to: (u32, u32)) -> ObjectMove {
        ObjectMove {
            name: name.into(),
            from: Pose::new(from.0, from.1),
            to: Pose::new(to.0, to.1),
        }
    }

    #[test]
    fn self_diff_is_empty() {
        let env = kitchen();
        let s = env.default_state();
        assert!(diff(&s, &s).unwrap().is_empty());
    }

    #[test]
    fn single_move_diff() {
        let env = kitchen();
        let s = env.default_state();
        let t = env.apply_object_move(&s, "orange", Pose::new(300, 200)).unwrap();
        let cs = diff(&s, &t).unwrap();
        assert_eq!(cs.moved_objects.len(), 1);
        assert_eq!(cs.moved_objects[0].name, "orange");
        assert!(cs.fixture_changes.is_empty());
        assert!(!cs.order_changed());
    }

    #[test]
    fn apply_round_trips_a_hand_built_pair() {
        let env = kitchen();
        let a = env.default_state();
        let b = env.apply_object_move(&a, "orange", Pose::new(5, 6)).unwrap();
        let b = env.apply_fixture_toggle(&b, "cabinet").unwrap();
        let cs = diff(&a, &b).unwrap();
        assert_eq!(apply(&cs, &a).unwrap(), b);
        assert_eq!(apply(&ChangeSet::default(), &a).unwrap(), a);
    }

    #[test]
    fn stale_from_is_rejected() {
        let env = kitchen();
        let a = env.default_state();
        let here = a.object_poses["orange"];
        let cs = ChangeSet {
            moved_objects: vec![mv("orange", (here.x + 1, here.y), (1, 1))],
            ..Default::default()
        };
        assert!(matches!(apply(&cs, &a), Err(ChangeSetError::ChangeSetMismatch(_))));
    }

    #[test]
    fn diff_across_environments_fails() {
        let env = kitchen();
        let a = env.default_state();
        let mut b = a.clone();
        b.object_poses.remove("orange");
        assert_eq!(diff(&a, &b), Err(ChangeSetError::EnvironmentMismatch));
    }

    #[test]
    fn compose_collapses_and_cancels() {
        let p = (1, 1);
        let q = (2, 2);
        let r = (3, 3);
        let a = ChangeSet {
            moved_objects: vec![mv("A", p, q)],
            ..Default::default()
        };
        let b = ChangeSet {
            moved_objects: vec![mv("A", q, r)],
            ..Default::default()
        };
        assert_eq!(compose(&a, &b).unwrap().moved_objects, vec![mv("A", p, r)]);
        let back = ChangeSet {
            moved_objects: vec![mv("A", q, p)],
            ..Default::default()
        };
        assert!(compose(&a, &back).unwrap().is_empty());
        let bad = ChangeSet {
            moved_objects: vec![mv("A", r, p)],
            ..Default::default()
        };
        assert!(matches!(compose(&a, &bad), Err(ChangeSetError::ComposeMismatch(_))));
    }

    #[test]
    fn normalize_sorts_and_drops_noops() {
        let cs = ChangeSet {
            moved_objects: vec![mv("b", (1, 1), (2, 2)), mv("a", (1, 1), (1, 1))],
            fixture_changes: vec![FixtureChange {
                name: "f".into(),
                from: "x".into(),
                to: "x".into(),
            }],
            order: Some(OrderChange {
                before: vec!["a".into()],
                after: vec!["a".into()],
            }),
        };
        let n = cs.normalize();
        assert_eq!(n.moved_objects, vec![mv("b", (1, 1), (2, 2))]);
        assert!(n.fixture_changes.is_empty());
        assert!(n.order.is_none());
    }
}
