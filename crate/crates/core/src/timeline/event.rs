//! Manipulation events as they arrive from a client or a replay script.

use serde::{Deserialize, Serialize};

use super::{Timeline, TimelineError};
use crate::env::Environment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Event {
    /// Drop of `object` at sub-pixel `(x, y)`.
    Drag { object: String, x: f64, y: f64 },
    Toggle { fixture: String },
    Copy { index: usize },
    Delete { index: usize },
    Select { index: usize },
    Reorder { object: String, position: usize },
}

impl Timeline {
    pub fn apply_event(&self, env: &Environment, event: &Event) -> Result<Timeline, TimelineError> {
        match event {
            Event::Drag { object, x, y } => self.record_drag(env, object, *x, *y),
            Event::Toggle { fixture } => self.record_toggle(env, fixture),
            Event::Copy { index } => self.copy_step(*index),
            Event::Delete { index } => self.delete_step(*index),
            Event::Select { index } => self.select(*index),
            Event::Reorder { object, position } => self.reorder(env, object, *position),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let e: Event = serde_json::from_str(r#"{"type":"drag","object":"orange","x":1.5,"y":2}"#)
            .unwrap();
        assert_eq!(
            e,
            Event::Drag {
                object: "orange".into(),
                x: 1.5,
                y: 2.0
            }
        );
        let t = serde_json::to_string(&Event::Toggle {
            fixture: "cabinet".into(),
        })
        .unwrap();
        assert_eq!(t, r#"{"type":"toggle","fixture":"cabinet"}"#);
        assert!(serde_json::from_str::<Event>(r#"{"type":"fly"}"#).is_err());
    }
}
