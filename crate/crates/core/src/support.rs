//! What an object rests on, decided by box overlap.
//!
//! An object is "on" another item when more than half of its box lies inside
//! that item's box. Non-receptacle objects win over receptacles (stacking),
//! receptacles over fixture regions; ties go to the larger overlap, then the
//! smaller item, then the name.

use crate::env::{EnvError, EnvState, Environment, FixtureSpec, ObjectSpec};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support<'a> {
    StackedOn(&'a ObjectSpec),
    InReceptacle(&'a ObjectSpec),
    InFixture(&'a FixtureSpec),
    Counter,
}

/// Support of object `name` at its pose in `state`, ignoring `exclude`.
pub fn support_of<'a>(
    env: &'a Environment,
    state: &EnvState,
    name: &str,
    exclude: &[&str],
) -> Result<Support<'a>, EnvError> {
    let b = env.object_box(state, name)?;
    Ok(support_for_box(env, state, &b, name, exclude))
}

pub(crate) fn support_for_box<'a>(
    env: &'a Environment,
    state: &EnvState,
    b: &BoundingBox,
    name: &str,
    exclude: &[&str],
) -> Support<'a> {
    let mut stacked: Option<(u64, u64, &ObjectSpec)> = None;
    let mut inside: Option<(u64, u64, &ObjectSpec)> = None;
    for (other, spec) in &env.objects {
        if other == name || exclude.contains(&other.as_str()) {
            continue;
        }
        let Ok(ob) = env.object_box(state, other) else {
            continue;
        };
        if !b.mostly_inside(&ob) {
            continue;
        }
        let cand = (b.intersection_area(&ob), ob.area(), spec);
        let slot = if spec.is_receptacle {
            &mut inside
        } else {
            &mut stacked
        };
        if better(&cand, slot) {
            *slot = Some(cand);
        }
    }
    if let Some((_, _, s)) = stacked {
        return Support::StackedOn(s);
    }
    if let Some((_, _, s)) = inside {
        return Support::InReceptacle(s);
    }
    let mut fixture: Option<(u64, u64, &FixtureSpec)> = None;
    for f in env.fixtures.values() {
        if !b.mostly_inside(&f.bounding_box) {
            continue;
        }
        let cand = (b.intersection_area(&f.bounding_box), f.bounding_box.area(), f);
        if better(&cand, &fixture) {
            fixture = Some(cand);
        }
    }
    match fixture {
        Some((_, _, f)) => Support::InFixture(f),
        None => Support::Counter,
    }
}

trait Named {
    fn name(&self) -> &str;
}

impl Named for ObjectSpec {
    fn name(&self) -> &str {
        &self.name
    }
}

impl Named for FixtureSpec {
    fn name(&self) -> &str {
        &self.name
    }
}

fn better<T: Named>(cand: &(u64, u64, &T), best: &Option<(u64, u64, &T)>) -> bool {
    match best {
        None => true,
        Some((o, a, s)) => {
            (std::cmp::Reverse(cand.0), cand.1, cand.2.name()) < (std::cmp::Reverse(*o), *a, s.name())
        }
    }
}

/// Objects resting inside receptacle `container` in `state`, sorted by name.
pub fn contents_of<'a>(
    env: &'a Environment,
    state: &EnvState,
    container: &str,
    exclude: &[&str],
) -> Vec<&'a ObjectSpec> {
    env.objects
        .values()
        .filter(|o| o.name != container && !exclude.contains(&o.name.as_str()))
        .filter(|o| {
            matches!(
                support_of(env, state, &o.name, exclude),
                Ok(Support::InReceptacle(r)) if r.name == container
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::geometry::Pose;

    #[test]
    fn donut_rests_on_plate() {
        let b = demo::donut_stacking(true);
        let env = &b.environment;
        let s = &b.initial_state;
        match support_of(env, s, "pink donut", &[]).unwrap() {
            Support::InReceptacle(p) => assert_eq!(p.name, "plate"),
            other => panic!("{other:?}"),
        }
        let flat = demo::donut_stacking(false);
        match support_of(&flat.environment, &flat.initial_state, "pink donut", &[]).unwrap() {
            Support::StackedOn(p) => assert_eq!(p.name, "plate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn far_away_is_counter() {
        let b = demo::kitchen();
        let env = &b.environment;
        let s = env
            .apply_object_move(&b.initial_state, "orange", Pose::new(600, 450))
            .unwrap();
        assert_eq!(support_of(env, &s, "orange", &[]).unwrap(), Support::Counter);
    }
}
