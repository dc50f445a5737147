use crate::demo::{self, SceneBuilder};
use crate::env::Environment;

pub(crate) fn kitchen() -> Environment {
    demo::kitchen().environment
}

/// Cabinet and drawer only, two states each.
pub(crate) fn two_fixture_env() -> Environment {
    SceneBuilder::new(320, 240)
        .fixture("cabinet", "cabinet", "storage", [10, 10, 100, 80], &["closed", "open"])
        .fixture("drawer", "drawer", "storage", [120, 10, 80, 30], &["closed", "open"])
        .object("cup", "cup", "dishware", false, [50, 150, 20, 25])
        .build("two_fixture")
        .environment
}
