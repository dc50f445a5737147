//! Static environment description, snapshot states and the pure edits on them.
//!
//! An [`Environment`] never changes after it is loaded. Everything the user
//! does produces a new [`EnvState`] value; inputs are never mutated.

mod background;
pub mod bundle;
mod document;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, Canvas, Pose};

pub use background::BackgroundKey;
pub use document::{
    deserialize_environment, deserialize_state, deserialize_state_unchecked, serialize_environment,
    serialize_state, DocumentError,
};
pub use validate::{ValidationReport, Violation};

pub(crate) use document::parse_document as document_parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("`{state}` is not a state of fixture `{fixture}`")]
    IllegalState { fixture: String, state: String },
    #[error("position ({x}, {y}) is outside the canvas")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no background for fixture combination `{0}`")]
    MissingBackground(BackgroundKey),
    #[error("state does not belong to this environment: {0}")]
    InvalidState(String),
}

/// Raster payload: inline base64 PNG data, or a file inside the bundle
/// directory (serialized as `file:<relative path>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ImageRef {
    Inline(String),
    File(String),
}

impl ImageRef {
    const FILE_PREFIX: &'static str = "file:";

    pub fn as_document_str(&self) -> String {
        match self {
            ImageRef::Inline(b64) => b64.clone(),
            ImageRef::File(path) => format!("{}{path}", Self::FILE_PREFIX),
        }
    }

    pub fn from_document_str(s: &str) -> Self {
        match s.strip_prefix(Self::FILE_PREFIX) {
            Some(path) => ImageRef::File(path.to_string()),
            None => ImageRef::Inline(s.to_string()),
        }
    }

    /// `href` value for vector output.
    pub fn href(&self) -> String {
        match self {
            ImageRef::Inline(b64) => format!("data:image/png;base64,{b64}"),
            ImageRef::File(path) => path.clone(),
        }
    }
}

impl Serialize for ImageRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_document_str())
    }
}

impl<'de> Deserialize<'de> for ImageRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Self::from_document_str(&s))
    }
}

/// A movable item. `name` is the dictionary key in documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    #[serde(skip)]
    pub name: String,
    pub class: String,
    #[serde(rename = "boundingBox")]
    pub bounding_box: BoundingBox,
    pub category: String,
    #[serde(rename = "isReceptacle")]
    pub is_receptacle: bool,
    pub width: u32,
    pub height: u32,
    pub image: ImageRef,
}

/// An immovable item with discrete states; its clickable region is `bounding_box`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    #[serde(skip)]
    pub name: String,
    pub class: String,
    #[serde(rename = "boundingBox")]
    pub bounding_box: BoundingBox,
    pub category: String,
    pub width: u32,
    pub height: u32,
    pub x: u32,
    pub y: u32,
    #[serde(rename = "possibleStates")]
    pub possible_states: Vec<String>,
}

impl FixtureSpec {
    pub fn has_state(&self, state: &str) -> bool {
        self.possible_states.iter().any(|s| s == state)
    }

    /// Next state in `possible_states`, wrapping around.
    pub fn next_state(&self, current: &str) -> Option<&str> {
        let i = self.possible_states.iter().position(|s| s == current)?;
        let n = self.possible_states.len();
        Some(&self.possible_states[(i + 1) % n])
    }
}

/// Precomputed placement for a manipulable object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalLocation {
    pub label: String,
    pub x: u32,
    pub y: u32,
}

impl GoalLocation {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "EnvironmentRepr")]
pub struct Environment {
    pub canvas: Canvas,
    pub objects: BTreeMap<String, ObjectSpec>,
    pub fixtures: BTreeMap<String, FixtureSpec>,
    pub backgrounds: BTreeMap<BackgroundKey, ImageRef>,
    #[serde(rename = "goalLocations", default)]
    pub goal_locations: BTreeMap<String, Vec<GoalLocation>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentRepr {
    canvas: Canvas,
    objects: BTreeMap<String, ObjectSpec>,
    fixtures: BTreeMap<String, FixtureSpec>,
    backgrounds: BTreeMap<BackgroundKey, ImageRef>,
    #[serde(rename = "goalLocations", default)]
    goal_locations: BTreeMap<String, Vec<GoalLocation>>,
}

impl From<EnvironmentRepr> for Environment {
    fn from(r: EnvironmentRepr) -> Self {
        let mut objects = r.objects;
        for (k, o) in objects.iter_mut() {
            o.name = k.clone();
        }
        let mut fixtures = r.fixtures;
        for (k, f) in fixtures.iter_mut() {
            f.name = k.clone();
        }
        Environment {
            canvas: r.canvas,
            objects,
            fixtures,
            backgrounds: r.backgrounds,
            goal_locations: r.goal_locations,
        }
    }
}

/// One snapshot of the transient scene.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EnvState {
    pub caption: String,
    pub object_poses: BTreeMap<String, Pose>,
    pub fixture_states: BTreeMap<String, String>,
    /// Draw order, first entry furthest back.
    pub object_order: Vec<String>,
}

impl EnvState {
    /// Same poses, fixture states and draw order; captions are ignored.
    pub fn same_configuration(&self, other: &EnvState) -> bool {
        self.object_poses == other.object_poses
            && self.fixture_states == other.fixture_states
            && self.object_order == other.object_order
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = caption.into();
        self
    }
}

impl Environment {
    pub fn object(&self, name: &str) -> Result<&ObjectSpec, EnvError> {
        self.objects
            .get(name)
            .ok_or_else(|| EnvError::UnknownObject(name.to_string()))
    }

    pub fn fixture(&self, name: &str) -> Result<&FixtureSpec, EnvError> {
        self.fixtures
            .get(name)
            .ok_or_else(|| EnvError::UnknownFixture(name.to_string()))
    }

    /// Number of fixture-state combinations, i.e. the required background count.
    pub fn combination_count(&self) -> usize {
        self.fixtures
            .values()
            .map(|f| f.possible_states.len())
            .product()
    }

    /// Every complete fixture-state assignment, in lexicographic order of
    /// fixture name then `possibleStates` index.
    pub fn all_fixture_assignments(&self) -> Vec<BTreeMap<String, String>> {
        let mut out = vec![BTreeMap::new()];
        for f in self.fixtures.values() {
            let mut next = Vec::with_capacity(out.len() * f.possible_states.len());
            for partial in &out {
                for s in &f.possible_states {
                    let mut m = partial.clone();
                    m.insert(f.name.clone(), s.clone());
                    next.push(m);
                }
            }
            out = next;
        }
        out
    }

    /// Canonical lookup key for a fixture-state map.
    pub fn background_key(
        &self,
        fixture_states: &BTreeMap<String, String>,
    ) -> Result<BackgroundKey, EnvError> {
        for (name, state) in fixture_states {
            let f = self.fixture(name)?;
            if !f.has_state(state) {
                return Err(EnvError::IllegalState {
                    fixture: name.clone(),
                    state: state.clone(),
                });
            }
        }
        Ok(BackgroundKey::from_states(fixture_states))
    }

    pub fn resolve_background(&self, state: &EnvState) -> Result<&ImageRef, EnvError> {
        let key = self.background_key(&state.fixture_states)?;
        self.backgrounds
            .get(&key)
            .ok_or(EnvError::MissingBackground(key))
    }

    /// Checks that `state` has exactly this environment's objects and
    /// fixtures with legal values.
    pub fn check_state(&self, state: &EnvState) -> Result<(), EnvError> {
        if !state.object_poses.keys().eq(self.objects.keys()) {
            return Err(EnvError::InvalidState(
                "object poses do not match the environment's objects".into(),
            ));
        }
        if !state.fixture_states.keys().eq(self.fixtures.keys()) {
            return Err(EnvError::InvalidState(
                "fixture states do not match the environment's fixtures".into(),
            ));
        }
        for (name, s) in &state.fixture_states {
            if !self.fixtures[name].has_state(s) {
                return Err(EnvError::IllegalState {
                    fixture: name.clone(),
                    state: s.clone(),
                });
            }
        }
        for (name, p) in &state.object_poses {
            if !self.canvas.contains_point(p.x, p.y) {
                return Err(EnvError::InvalidState(format!(
                    "object `{name}` is off the canvas at {p}"
                )));
            }
        }
        let mut order = state.object_order.clone();
        order.sort();
        if !order.iter().eq(self.objects.keys()) {
            return Err(EnvError::InvalidState(
                "objectOrder is not a permutation of the objects".into(),
            ));
        }
        Ok(())
    }

    /// The state implied by each object's bounding box and each fixture's
    /// first state, receptacles drawn first.
    pub fn default_state(&self) -> EnvState {
        let object_poses = self
            .objects
            .iter()
            .map(|(n, o)| (n.clone(), Pose::new(o.bounding_box.x, o.bounding_box.y)))
            .collect();
        let fixture_states = self
            .fixtures
            .iter()
            .map(|(n, f)| (n.clone(), f.possible_states[0].clone()))
            .collect();
        let mut object_order: Vec<String> = self.objects.keys().cloned().collect();
        object_order.sort_by_key(|n| !self.objects[n].is_receptacle);
        EnvState {
            caption: String::new(),
            object_poses,
            fixture_states,
            object_order,
        }
    }

    /// Box of `name` at its pose in `state`.
    pub fn object_box(&self, state: &EnvState, name: &str) -> Result<BoundingBox, EnvError> {
        let spec = self.object(name)?;
        let pose = state
            .object_poses
            .get(name)
            .ok_or_else(|| EnvError::UnknownObject(name.to_string()))?;
        Ok(BoundingBox::at(*pose, spec.width, spec.height))
    }

    /// New snapshot with `name` at `pose`; the input is untouched.
    pub fn apply_object_move(
        &self,
        state: &EnvState,
        name: &str,
        pose: Pose,
    ) -> Result<EnvState, EnvError> {
        if !state.object_poses.contains_key(name) {
            return Err(EnvError::UnknownObject(name.to_string()));
        }
        self.object(name)?;
        if !self.canvas.contains_point(pose.x, pose.y) {
            return Err(EnvError::OutOfBounds {
                x: pose.x.into(),
                y: pose.y.into(),
            });
        }
        let mut next = state.clone();
        next.object_poses.insert(name.to_string(), pose);
        Ok(next)
    }

    /// Sub-pixel variant of [`Self::apply_object_move`]; rounds half-up.
    pub fn apply_object_drop(
        &self,
        state: &EnvState,
        name: &str,
        x: f64,
        y: f64,
    ) -> Result<EnvState, EnvError> {
        let pose = Pose::from_f64(x, y).ok_or(EnvError::OutOfBounds { x, y })?;
        if !self.canvas.contains_point(pose.x, pose.y) {
            // report the caller's coordinates, not the rounded ones
            if !state.object_poses.contains_key(name) {
                return Err(EnvError::UnknownObject(name.to_string()));
            }
            return Err(EnvError::OutOfBounds { x, y });
        }
        self.apply_object_move(state, name, pose)
    }

    /// Advances fixture `name` to its next state, cycling.
    pub fn apply_fixture_toggle(&self, state: &EnvState, name: &str) -> Result<EnvState, EnvError> {
        let f = self.fixture(name)?;
        let current = state
            .fixture_states
            .get(name)
            .ok_or_else(|| EnvError::UnknownFixture(name.to_string()))?;
        let next_state = f.next_state(current).ok_or_else(|| EnvError::IllegalState {
            fixture: name.to_string(),
            state: current.clone(),
        })?;
        let mut next = state.clone();
        next.fixture_states
            .insert(name.to_string(), next_state.to_string());
        Ok(next)
    }

    /// Moves `name` to `position` in the draw order (clamped to the end).
    pub fn apply_reorder(
        &self,
        state: &EnvState,
        name: &str,
        position: usize,
    ) -> Result<EnvState, EnvError> {
        let from = state
            .object_order
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| EnvError::UnknownObject(name.to_string()))?;
        let mut next = state.clone();
        let item = next.object_order.remove(from);
        let to = position.min(next.object_order.len());
        next.object_order.insert(to, item);
        Ok(next)
    }

    /// Topmost object whose box at `state` contains the point, else the
    /// fixture whose clickable region does. Objects win over fixtures.
    pub fn hit_test(&self, state: &EnvState, x: u32, y: u32) -> Option<Hit<'_>> {
        for name in state.object_order.iter().rev() {
            if let (Ok(b), Ok(spec)) = (self.object_box(state, name), self.object(name)) {
                if b.contains_point(x, y) {
                    return Some(Hit::Object(spec));
                }
            }
        }
        self.fixtures
            .values()
            .find(|f| f.bounding_box.contains_point(x, y))
            .map(Hit::Fixture)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit<'a> {
    Object(&'a ObjectSpec),
    Fixture(&'a FixtureSpec),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::kitchen;

    #[test]
    fn background_key_is_canonical_and_order_insensitive() {
        let env = kitchen();
        let a: BTreeMap<_, _> = [("drawer", "open"), ("cabinet", "closed")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let key = env.background_key(&a).unwrap();
        assert_eq!(key.as_str(), "cabinet=closed;drawer=open");
        let mut b = BTreeMap::new();
        b.insert("cabinet".to_string(), "closed".to_string());
        b.insert("drawer".to_string(), "open".to_string());
        assert_eq!(env.background_key(&b).unwrap(), key);
    }

    #[test]
    fn background_key_rejects_illegal_and_unknown() {
        let env = kitchen();
        let mut m = BTreeMap::new();
        m.insert("drawer".to_string(), "ajar".to_string());
        assert_eq!(
            env.background_key(&m),
            Err(EnvError::IllegalState {
                fixture: "drawer".into(),
                state: "ajar".into()
            })
        );
        let mut m = BTreeMap::new();
        m.insert("oven".to_string(), "on".to_string());
        assert_eq!(
            env.background_key(&m),
            Err(EnvError::UnknownFixture("oven".into()))
        );
    }

    #[test]
    fn resolve_background_follows_toggles() {
        let env = kitchen();
        let s = env.default_state();
        let closed = env.resolve_background(&s).unwrap().clone();
        let key = env.background_key(&s.fixture_states).unwrap();
        assert_eq!(&closed, &env.backgrounds[&key]);
        let t = env.apply_fixture_toggle(&s, "cabinet").unwrap();
        assert_ne!(env.resolve_background(&t).unwrap(), &closed);

        let mut stripped = env.clone();
        stripped.backgrounds.remove(&key);
        assert_eq!(
            stripped.resolve_background(&s),
            Err(EnvError::MissingBackground(key))
        );
    }

    #[test]
    fn object_move_is_value_semantics() {
        let env = kitchen();
        let s = env.default_state();
        let moved = env.apply_object_move(&s, "orange", Pose::new(300, 200)).unwrap();
        assert_eq!(moved.object_poses["orange"], Pose::new(300, 200));
        assert_ne!(s.object_poses["orange"], Pose::new(300, 200));
        let mut expect = s.clone();
        expect.object_poses.insert("orange".into(), Pose::new(300, 200));
        assert_eq!(moved, expect);

        let here = s.object_poses["orange"];
        assert_eq!(env.apply_object_move(&s, "orange", here).unwrap(), s);
        assert_eq!(
            env.apply_object_move(&s, "unicorn", Pose::new(1, 1)),
            Err(EnvError::UnknownObject("unicorn".into()))
        );
        assert!(matches!(
            env.apply_object_move(&s, "orange", Pose::new(5000, 1)),
            Err(EnvError::OutOfBounds { .. })
        ));
        assert_eq!(
            env.apply_object_drop(&s, "orange", 299.5, 200.49).unwrap().object_poses["orange"],
            Pose::new(300, 200)
        );
    }

    #[test]
    fn toggles_cycle() {
        let env = kitchen();
        let s = env.default_state();
        assert_eq!(s.fixture_states["cabinet"], "closed");
        let once = env.apply_fixture_toggle(&s, "cabinet").unwrap();
        assert_eq!(once.fixture_states["cabinet"], "open");
        let twice = env.apply_fixture_toggle(&once, "cabinet").unwrap();
        assert_eq!(twice, s);

        let mut s3 = s.clone();
        for _ in 0..3 {
            s3 = env.apply_fixture_toggle(&s3, "stove").unwrap();
        }
        assert_eq!(s3, s);
        assert_eq!(
            env.apply_fixture_toggle(&s, "orange"),
            Err(EnvError::UnknownFixture("orange".into()))
        );
    }

    #[test]
    fn hit_test_prefers_objects() {
        let env = kitchen();
        let s = env.default_state();
        let orange = s.object_poses["orange"];
        match env.hit_test(&s, orange.x + 1, orange.y + 1) {
            Some(Hit::Object(o)) => assert_eq!(o.name, "orange"),
            other => panic!("{other:?}"),
        }
        let cab = env.fixtures["cabinet"].bounding_box;
        let (cx, cy) = cab.center();
        assert!(matches!(env.hit_test(&s, cx, cy), Some(Hit::Fixture(f)) if f.name == "cabinet"));
    }

    #[test]
    fn reorder_moves_within_order() {
        let env = kitchen();
        let s = env.default_state();
        let first = s.object_order[0].clone();
        let r = env.apply_reorder(&s, &first, 99).unwrap();
        assert_eq!(r.object_order.last(), Some(&first));
        assert_eq!(r.object_order.len(), s.object_order.len());
    }
}
