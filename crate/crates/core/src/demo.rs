//! Built-in environment bundles: small scenes used by the demo command, the
//! tests and the benchmarks. Every raster is a generated solid-color PNG so
//! the bundles are byte-for-byte reproducible.
//!
//! Task bundles carry a reference session (`oracle.json`) authored through
//! the same timeline operations a user would perform.

use std::collections::BTreeMap;
use std::path::Path;

use base64::Engine as _;
use image::{codecs::png::PngEncoder, ExtendedColorType, ImageEncoder};

use crate::env::bundle::{Bundle, BundleError};
use crate::env::{
    BackgroundKey, EnvState, Environment, FixtureSpec, GoalLocation, ImageRef, ObjectSpec,
};
use crate::geometry::{BoundingBox, Canvas, Pose};
use crate::timeline::{Event, SessionArchive, Timeline};

/// Replay script stored next to the sorting-fruits bundle.
pub const REPLAY_FILE: &str = "replay.json";

/// A spot no demo scene uses, for parking objects mid-task.
pub const STAGING: Pose = Pose::new(720, 530);

fn fnv(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in s.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Solid `w`x`h` PNG whose color is derived from `seed`.
pub fn solid_png(seed: &str, w: u32, h: u32) -> Vec<u8> {
    let c = fnv(seed).to_le_bytes();
    let px: Vec<u8> = std::iter::repeat([c[0], c[1], c[2]])
        .take((w * h) as usize)
        .flatten()
        .collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&px, w, h, ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding cannot fail");
    out
}

/// Incremental scene description.
pub struct SceneBuilder {
    canvas: Canvas,
    objects: BTreeMap<String, ObjectSpec>,
    fixtures: BTreeMap<String, FixtureSpec>,
    goals: BTreeMap<String, Vec<GoalLocation>>,
}

impl SceneBuilder {
    pub fn new(width: u32, height: u32) -> Self {
        SceneBuilder {
            canvas: Canvas::new(width, height),
            objects: BTreeMap::new(),
            fixtures: BTreeMap::new(),
            goals: BTreeMap::new(),
        }
    }

    pub fn object(
        mut self,
        name: &str,
        class: &str,
        category: &str,
        receptacle: bool,
        [x, y, w, h]: [u32; 4],
    ) -> Self {
        let png = solid_png(class, 8, 8);
        self.objects.insert(
            name.to_string(),
            ObjectSpec {
                name: name.to_string(),
                class: class.to_string(),
                bounding_box: BoundingBox::new(x, y, w, h),
                category: category.to_string(),
                is_receptacle: receptacle,
                width: w,
                height: h,
                image: ImageRef::Inline(base64::engine::general_purpose::STANDARD.encode(png)),
            },
        );
        self
    }

    pub fn fixture(
        mut self,
        name: &str,
        class: &str,
        category: &str,
        [x, y, w, h]: [u32; 4],
        states: &[&str],
    ) -> Self {
        self.fixtures.insert(
            name.to_string(),
            FixtureSpec {
                name: name.to_string(),
                class: class.to_string(),
                bounding_box: BoundingBox::new(x, y, w, h),
                category: category.to_string(),
                width: w,
                height: h,
                x,
                y,
                possible_states: states.iter().map(|s| s.to_string()).collect(),
            },
        );
        self
    }

    pub fn goal(mut self, object: &str, label: &str, x: u32, y: u32) -> Self {
        self.goals.entry(object.to_string()).or_default().push(GoalLocation {
            label: label.to_string(),
            x,
            y,
        });
        self
    }

    /// Bundle with one background file per fixture combination.
    pub fn build(self, id: &str) -> Bundle {
        let mut env = Environment {
            canvas: self.canvas,
            objects: self.objects,
            fixtures: self.fixtures,
            backgrounds: BTreeMap::new(),
            goal_locations: self.goals,
        };
        let mut assets = BTreeMap::new();
        for (i, combo) in env.all_fixture_assignments().iter().enumerate() {
            let key = BackgroundKey::from_states(combo);
            let file = format!("bg-{i:02}.png");
            assets.insert(file.clone(), solid_png(&format!("{id}/{key}"), 32, 24));
            env.backgrounds.insert(key, ImageRef::File(file));
        }
        let initial_state = env.default_state().with_caption(crate::timeline::INITIAL_CAPTION);
        Bundle {
            id: id.to_string(),
            environment: env,
            initial_state,
            oracle: None,
            assets,
        }
    }
}

/// One authored step of a reference session.
#[derive(Debug, Clone)]
pub enum Authored {
    Move(&'static str, u32, u32, &'static str),
    Toggle(&'static str),
}

fn with_oracle(mut b: Bundle, steps: &[Authored]) -> Bundle {
    let env = &b.environment;
    let mut tl = Timeline::new(env, &b.initial_state).expect("demo initial states are valid");
    for s in steps {
        tl = match s {
            Authored::Move(name, x, y, caption) => {
                let (t, _) = tl
                    .record_drag_to(env, name, Pose::new(*x, *y))
                    .expect("demo moves are valid");
                let at = t.selected();
                t.set_caption(at, caption, true).expect("selected step exists")
            }
            Authored::Toggle(name) => tl.record_toggle(env, name).expect("demo toggles are valid"),
        };
    }
    let tl = tl.select(0).expect("step 0 exists");
    b.oracle = Some(SessionArchive::from_timeline(&b.id, &tl));
    b
}

pub fn kitchen() -> Bundle {
    SceneBuilder::new(640, 480)
        .fixture("cabinet", "cabinet", "storage", [20, 20, 200, 160], &["closed", "open"])
        .fixture("drawer", "drawer", "storage", [240, 20, 160, 60], &["closed", "open"])
        .fixture("stove", "stove", "appliance", [420, 20, 200, 120], &["off", "low", "high"])
        .object("bowl", "white bowl", "dishware", true, [300, 200, 80, 50])
        .object("orange", "orange", "fruit", false, [100, 300, 30, 30])
        .object("apple", "red apple", "fruit", false, [160, 300, 30, 30])
        .goal("orange", "in the bowl", 325, 210)
        .goal("orange", "in the cabinet", 100, 80)
        .goal("apple", "in the bowl", 335, 212)
        .build("kitchen")
}

pub fn red_apple() -> Bundle {
    let b = SceneBuilder::new(640, 480)
        .object("white bowl", "white bowl", "dishware", true, [400, 200, 100, 60])
        .object("green apple 1", "green apple", "fruit", false, [100, 300, 30, 30])
        .object("red apple", "red apple", "fruit", false, [170, 300, 30, 30])
        .object("green apple 2", "green apple", "fruit", false, [240, 300, 30, 30])
        .build("red_apple");
    with_oracle(
        b,
        &[Authored::Move("red apple", 435, 215, "Put the red apple in the white bowl")],
    )
}

/// Donut stacking; `plate_is_receptacle` switches between placing into the
/// plate and stacking onto it.
pub fn donut_stacking(plate_is_receptacle: bool) -> Bundle {
    let id = if plate_is_receptacle {
        "donut_stacking"
    } else {
        "donut_stacking_flat"
    };
    let b = SceneBuilder::new(640, 480)
        .object("plate", "plate", "dishware", plate_is_receptacle, [300, 200, 120, 80])
        .object("pink donut", "pink donut", "food", false, [310, 215, 40, 40])
        .object("orange donut", "orange donut", "food", false, [100, 300, 40, 40])
        .object("spoon 1", "spoon", "utensil", false, [480, 300, 15, 60])
        .object("spoon 2", "spoon", "utensil", false, [520, 300, 15, 60])
        .build(id);
    with_oracle(
        b,
        &[Authored::Move("orange donut", 365, 220, "Put the orange donut next to the pink donut on the plate")],
    )
}

pub fn faucet() -> Bundle {
    let b = SceneBuilder::new(640, 480)
        .fixture("sink", "sink", "appliance", [200, 250, 220, 150], &["fixed"])
        .fixture("faucet", "faucet", "appliance", [280, 200, 60, 40], &["off", "on"])
        .object("bowl", "bowl", "dishware", true, [40, 300, 90, 50])
        .object("orange 1", "orange", "fruit", false, [470, 320, 30, 30])
        .object("orange 2", "orange", "fruit", false, [530, 320, 30, 30])
        .build("faucet");
    with_oracle(
        b,
        &[
            Authored::Move("bowl", 265, 300, "Put the bowl in the sink"),
            Authored::Move("orange 1", 295, 310, "Put an orange in the bowl"),
            Authored::Toggle("faucet"),
        ],
    )
}

pub fn storing_pantry() -> Bundle {
    use Authored::*;
    let b = SceneBuilder::new(800, 600)
        .fixture("cabinet", "cabinet", "storage", [20, 20, 300, 360], &["closed", "open"])
        .fixture("upper shelf", "upper shelf", "storage", [30, 40, 280, 150], &["fixed"])
        .fixture("lower shelf", "lower shelf", "storage", [30, 210, 280, 160], &["fixed"])
        .object("tall cereal", "tall cereal box", "food", false, [400, 400, 40, 90])
        .object("medium cereal", "medium cereal box", "food", false, [450, 420, 40, 70])
        .object("short cereal", "short cereal box", "food", false, [500, 440, 40, 50])
        .object("green chips 1", "green chips", "food", false, [560, 440, 40, 50])
        .object("green chips 2", "green chips", "food", false, [610, 440, 40, 50])
        .object("red chips", "red chips", "food", false, [660, 440, 40, 50])
        .object("soda 1", "soda can", "drink", false, [400, 520, 25, 40])
        .object("soda 2", "soda can", "drink", false, [440, 520, 25, 40])
        .build("storing_pantry");
    with_oracle(
        b,
        &[
            Toggle("cabinet"),
            Move("tall cereal", 40, 260, "Put the tallest cereal on the lower shelf"),
            Move("medium cereal", 90, 280, "Put the medium cereal next to it"),
            Move("short cereal", 140, 300, "Put the shortest cereal next to that"),
            Move("red chips", 40, 120, "Put the red chips on the upper shelf"),
            Move("green chips 1", 90, 120, "Put one green chips packet next to the red chips"),
            Move("soda 1", 150, 130, "Put a soda on the upper shelf"),
            Move("soda 2", 185, 130, "Put the other soda next to it"),
            Toggle("cabinet"),
        ],
    )
}

pub fn sorting_fruits() -> Bundle {
    use Authored::*;
    let b = SceneBuilder::new(800, 600)
        .fixture("cabinet", "cabinet", "storage", [20, 20, 220, 260], &["closed", "open"])
        .object("bottle", "water bottle", "drink", false, [300, 380, 30, 70])
        .object("white bowl", "white bowl", "dishware", true, [300, 150, 110, 60])
        .object("patterned bowl", "patterned bowl", "dishware", true, [440, 150, 110, 60])
        .object("black bowl", "black bowl", "dishware", true, [580, 150, 110, 60])
        .object("large red apple", "large red apple", "fruit", false, [300, 480, 40, 40])
        .object("small red apple", "small red apple", "fruit", false, [360, 490, 30, 30])
        .object("green apple 1", "green apple", "fruit", false, [420, 490, 30, 30])
        .object("green apple 2", "green apple", "fruit", false, [470, 490, 30, 30])
        .object("yellow banana", "yellow banana", "fruit", false, [520, 470, 60, 30])
        .object("green banana", "green banana", "fruit", false, [600, 470, 60, 30])
        .build("sorting_fruits");
    with_oracle(
        b,
        &[
            Toggle("cabinet"),
            Move("bottle", 60, 100, "Put the bottle in the cabinet"),
            Toggle("cabinet"),
            Move("large red apple", 320, 160, "Put the large ripe apple in the white bowl"),
            Move("small red apple", 365, 170, "Put the small ripe apple in the white bowl"),
            Move("yellow banana", 460, 165, "Put the ripe banana in the patterned bowl"),
            Move("green banana", 600, 165, "Put the unripe banana in the black bowl"),
        ],
    )
}

/// Twelve manipulation events that author the sorting-fruits task,
/// including refinements, a draw-order change and a final selection.
pub fn sorting_fruits_script() -> Vec<Event> {
    let drag = |o: &str, x: f64, y: f64| Event::Drag {
        object: o.to_string(),
        x,
        y,
    };
    let toggle = || Event::Toggle {
        fixture: "cabinet".to_string(),
    };
    vec![
        toggle(),
        drag("bottle", 200.0, 300.0),
        drag("bottle", 65.4, 104.6),
        toggle(),
        drag("large red apple", 330.0, 165.0),
        drag("small red apple", 250.0, 400.0),
        drag("small red apple", 368.2, 171.5),
        drag("yellow banana", 470.0, 170.0),
        drag("green banana", 610.0, 168.0),
        Event::Reorder {
            object: "green banana".to_string(),
            position: 0,
        },
        drag("green banana", 612.0, 170.0),
        Event::Select { index: 3 },
    ]
}

pub fn cooking_stir_fry() -> Bundle {
    use Authored::*;
    let b = SceneBuilder::new(800, 600)
        .fixture("cabinet", "cabinet", "storage", [20, 20, 200, 200], &["closed", "open"])
        .fixture("left burner", "burner", "appliance", [300, 20, 120, 100], &["off", "on"])
        .fixture("right burner", "burner", "appliance", [440, 20, 120, 100], &["off", "on"])
        .object("cutting board", "cutting board", "cookware", true, [300, 300, 200, 120])
        .object("big pan", "big pan", "cookware", true, [40, 60, 110, 60])
        .object("small pan", "small pan", "cookware", true, [40, 140, 80, 50])
        .object("large potato", "large potato", "vegetable", false, [560, 300, 36, 36])
        .object("small potato", "small potato", "vegetable", false, [610, 300, 26, 26])
        .object("onion", "onion", "vegetable", false, [560, 350, 30, 30])
        .object("garlic", "garlic", "vegetable", false, [610, 350, 20, 20])
        .object("olive oil", "olive oil bottle", "condiment", false, [240, 440, 25, 60])
        .object("hot sauce", "hot sauce bottle", "condiment", false, [280, 440, 20, 50])
        .object("ketchup", "ketchup bottle", "condiment", false, [320, 440, 22, 55])
        .object("soy sauce", "soy sauce bottle", "condiment", false, [360, 440, 22, 55])
        .object("chef knife", "chef knife", "utensil", false, [420, 460, 80, 15])
        .object("butter knife", "butter knife", "utensil", false, [520, 460, 60, 12])
        .object("spatula", "spatula", "utensil", false, [600, 440, 70, 15])
        .build("cooking_stir_fry");
    with_oracle(
        b,
        &[
            Toggle("cabinet"),
            Move("big pan", 445, 40, "Put the big pan on the right burner"),
            Toggle("cabinet"),
            Move("large potato", 310, 310, "Put the large potato on the cutting board"),
            Move("small potato", 355, 310, "Put the small potato next to it"),
            Move("onion", 395, 310, "Put the onion on the board"),
            Move("garlic", 440, 315, "Put the garlic on the board"),
            Move("chef knife", 320, 380, "Put the sharp knife on the board"),
            Move("olive oil", 570, 140, "Bring the olive oil near the stove"),
            Move("hot sauce", 600, 140, "Bring the hot sauce near the stove"),
            Toggle("right burner"),
        ],
    )
}

pub fn washing_dishes() -> Bundle {
    use Authored::*;
    let b = SceneBuilder::new(800, 600)
        .fixture("sink", "sink", "appliance", [250, 250, 250, 160], &["fixed"])
        .fixture("faucet", "faucet", "appliance", [340, 200, 70, 40], &["off", "on"])
        .fixture("cabinet", "cabinet", "storage", [20, 20, 200, 220], &["closed", "open"])
        .fixture("drawer", "drawer", "storage", [20, 300, 180, 80], &["closed", "open"])
        .object("big plate", "big plate", "dishware", true, [560, 60, 120, 80])
        .object("pink donut", "pink donut", "food", false, [600, 200, 40, 40])
        .object("orange donut", "orange donut", "food", false, [650, 200, 40, 40])
        .object("cup 1", "cup", "dishware", false, [560, 300, 35, 40])
        .object("cup 2", "cup", "dishware", false, [610, 300, 35, 40])
        .object("small plate 1", "small plate", "dishware", false, [560, 380, 70, 20])
        .object("small plate 2", "small plate", "dishware", false, [650, 380, 70, 20])
        .object("spoon", "spoon", "utensil", false, [560, 440, 12, 50])
        .object("fork", "fork", "utensil", false, [600, 440, 12, 50])
        .build("washing_dishes");
    with_oracle(
        b,
        &[
            Move("pink donut", 575, 80, "Put the pink donut on the big plate"),
            Move("orange donut", 625, 80, "Put the orange donut on the big plate"),
            Toggle("faucet"),
            Move("cup 1", 300, 300, "Rinse a cup in the sink"),
            Toggle("cabinet"),
            Move("cup 1", 40, 60, "Put the cup in the cabinet"),
            Move("small plate 1", 300, 320, "Rinse a small plate in the sink"),
            Move("small plate 1", 40, 150, "Put the small plate in the cabinet"),
            Toggle("drawer"),
            Move("spoon", 300, 300, "Rinse the spoon in the sink"),
            Move("spoon", 60, 320, "Put the spoon in the drawer"),
            Toggle("faucet"),
            Toggle("drawer"),
            Toggle("cabinet"),
        ],
    )
}

/// The four multi-step tasks with reference sessions.
pub fn tasks() -> Vec<Bundle> {
    vec![
        storing_pantry(),
        sorting_fruits(),
        cooking_stir_fry(),
        washing_dishes(),
    ]
}

/// Every built-in bundle.
pub fn all() -> Vec<Bundle> {
    let mut out = vec![
        kitchen(),
        red_apple(),
        donut_stacking(true),
        donut_stacking(false),
        faucet(),
    ];
    out.extend(tasks());
    out
}

pub fn script_text(events: &[Event]) -> String {
    let mut s = serde_json::to_string_pretty(events).expect("events serialize");
    s.push('\n');
    s
}

/// Writes every built-in bundle under `root/<id>/`, plus the sorting-fruits
/// replay script.
pub fn write_all(root: &Path) -> Result<(), BundleError> {
    for b in all() {
        let dir = root.join(&b.id);
        b.write(&dir)?;
        if b.id == "sorting_fruits" {
            let p = dir.join(REPLAY_FILE);
            std::fs::write(&p, script_text(&sorting_fruits_script()))
                .map_err(|source| BundleError::Io { path: p, source })?;
        }
    }
    Ok(())
}

/// State of the oracle's last step, for convenience in tests and benches.
pub fn final_state(b: &Bundle) -> Option<EnvState> {
    b.oracle.as_ref().and_then(|o| o.steps.last()).map(|s| s.state.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundle_validates() {
        for b in all() {
            let report = b.environment.validate();
            assert!(report.is_valid(), "{}: {report}", b.id);
            if let Some(o) = &b.oracle {
                o.to_timeline(&b.environment).unwrap();
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(all(), all());
        assert_eq!(solid_png("x", 4, 4), solid_png("x", 4, 4));
        assert_ne!(solid_png("x", 4, 4), solid_png("y", 4, 4));
    }

    #[test]
    fn script_replays_without_errors() {
        let b = sorting_fruits();
        let mut tl = Timeline::new(&b.environment, &b.initial_state).unwrap();
        for e in sorting_fruits_script() {
            tl = tl.apply_event(&b.environment, &e).unwrap();
        }
        assert_eq!(tl.len(), b.oracle.unwrap().steps.len());
    }

    #[test]
    fn staging_spot_is_free() {
        for b in all() {
            let env = &b.environment;
            if !env.canvas.contains_point(STAGING.x, STAGING.y) {
                continue;
            }
            for f in env.fixtures.values() {
                assert!(!f.bounding_box.contains_point(STAGING.x, STAGING.y), "{}", b.id);
            }
            let s = &b.initial_state;
            for n in env.objects.keys() {
                let bx = env.object_box(s, n).unwrap();
                assert!(!bx.contains_point(STAGING.x, STAGING.y), "{} {n}", b.id);
            }
        }
    }
}
