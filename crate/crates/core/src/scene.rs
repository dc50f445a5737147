//! Layered scene documents and their SVG rendering.
//!
//! A scene is a background raster (chosen by fixture states) with object
//! rasters stacked on top in draw order. Diff scenes dim everything that did
//! not change so a thumbnail shows what a step did.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EnvState, Environment, ImageRef};
use crate::geometry::{Canvas, Pose};
use crate::timeline::ChangeSet;

/// Opacity of layers that did not change.
pub const DIM: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundLayer {
    pub image: ImageRef,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLayer {
    pub name: String,
    pub image: ImageRef,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub opacity: f64,
}

/// Where a moved object came from, for hover animation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnimationHint {
    pub object: String,
    pub from: Pose,
    pub to: Pose,
}

/// Backgrounds before and after a fixture change, for a cross-fade.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundPair {
    pub from: ImageRef,
    pub to: ImageRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneDoc {
    pub canvas: Canvas,
    pub background: BackgroundLayer,
    pub objects: Vec<ObjectLayer>,
    #[serde(default)]
    pub animation_hints: Vec<AnimationHint>,
    #[serde(default)]
    pub background_pair: Option<BackgroundPair>,
}

pub fn compose_scene(env: &Environment, state: &EnvState) -> Result<SceneDoc, EnvError> {
    let background = BackgroundLayer {
        image: env.resolve_background(state)?.clone(),
        opacity: 1.0,
    };
    let mut objects = Vec::with_capacity(state.object_order.len());
    for name in &state.object_order {
        let spec = env.object(name)?;
        let b = env.object_box(state, name)?;
        objects.push(ObjectLayer {
            name: name.clone(),
            image: spec.image.clone(),
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            opacity: 1.0,
        });
    }
    Ok(SceneDoc {
        canvas: env.canvas,
        background,
        objects,
        animation_hints: Vec::new(),
        background_pair: None,
    })
}

/// Scene for a step whose change against its predecessor is `cs`.
///
/// Moved objects stay opaque and everything else is dimmed; a pure fixture
/// change keeps the background opaque and dims every object. When both
/// happen the background stays opaque too.
pub fn compose_diff_scene(
    env: &Environment,
    state: &EnvState,
    cs: &ChangeSet,
) -> Result<SceneDoc, EnvError> {
    let mut doc = compose_scene(env, state)?;
    let moved = !cs.moved_objects.is_empty();
    let fixtures = !cs.fixture_changes.is_empty();
    if !moved && !fixtures {
        return Ok(doc);
    }
    for layer in &mut doc.objects {
        let salient = cs.moved(&layer.name).is_some();
        layer.opacity = if salient { 1.0 } else { DIM };
    }
    if moved && !fixtures {
        doc.background.opacity = DIM;
    }
    doc.animation_hints = cs
        .moved_objects
        .iter()
        .map(|m| AnimationHint {
            object: m.name.clone(),
            from: m.from,
            to: m.to,
        })
        .collect();
    if fixtures {
        let mut before = state.fixture_states.clone();
        for f in &cs.fixture_changes {
            before.insert(f.name.clone(), f.from.clone());
        }
        let key = env.background_key(&before)?;
        let from = env
            .backgrounds
            .get(&key)
            .ok_or(EnvError::MissingBackground(key))?
            .clone();
        doc.background_pair = Some(BackgroundPair {
            from,
            to: doc.background.image.clone(),
        });
    }
    Ok(doc)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn salience(opacity: f64) -> &'static str {
    if opacity >= 1.0 {
        "salient"
    } else {
        "dimmed"
    }
}

/// SVG 1.1 text. `width` overrides the output width for thumbnails; the
/// height follows the canvas aspect ratio.
pub fn render_vector(doc: &SceneDoc, width: Option<u32>) -> String {
    let Canvas {
        width: cw,
        height: ch,
    } = doc.canvas;
    let (w, h) = match width {
        Some(w) if cw > 0 => {
            let h = (u64::from(ch) * u64::from(w) + u64::from(cw) / 2) / u64::from(cw);
            (w, h as u32)
        }
        _ => (cw, ch),
    };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {cw} {ch}\">"
    );
    let bg = &doc.background;
    let _ = writeln!(
        out,
        "  <image class=\"background {}\" x=\"0\" y=\"0\" width=\"{cw}\" height=\"{ch}\" opacity=\"{:.2}\" preserveAspectRatio=\"none\" xlink:href=\"{}\"/>",
        salience(bg.opacity),
        bg.opacity,
        escape(&bg.image.href())
    );
    for l in &doc.objects {
        let _ = writeln!(
            out,
            "  <image class=\"object {}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" opacity=\"{:.2}\" preserveAspectRatio=\"none\" xlink:href=\"{}\"><title>{}</title></image>",
            salience(l.opacity),
            l.x,
            l.y,
            l.w,
            l.h,
            l.opacity,
            escape(&l.image.href()),
            escape(&l.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::geometry::Pose;
    use crate::timeline::diff;

    #[test]
    fn receptacles_drawn_first() {
        let b = demo::kitchen();
        let doc = compose_scene(&b.environment, &b.initial_state).unwrap();
        let names: Vec<_> = doc.objects.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names[0], "bowl");
        assert_eq!(names.len(), b.environment.objects.len());
        assert!(doc.objects.iter().all(|l| l.opacity == 1.0));
    }

    #[test]
    fn fixture_change_only_swaps_background() {
        let b = demo::kitchen();
        let env = &b.environment;
        let s = &b.initial_state;
        let t = env.apply_fixture_toggle(s, "cabinet").unwrap();
        let a = compose_scene(env, s).unwrap();
        let c = compose_scene(env, &t).unwrap();
        assert_eq!(a.objects, c.objects);
        assert_ne!(a.background.image, c.background.image);
    }

    #[test]
    fn diff_saliency_rules() {
        let b = demo::kitchen();
        let env = &b.environment;
        let s = &b.initial_state;
        let moved = env.apply_object_move(s, "orange", Pose::new(320, 210)).unwrap();
        let doc = compose_diff_scene(env, &moved, &diff(s, &moved).unwrap()).unwrap();
        for l in &doc.objects {
            let want = if l.name == "orange" { 1.0 } else { DIM };
            assert_eq!(l.opacity, want, "{}", l.name);
        }
        assert_eq!(doc.background.opacity, DIM);
        assert_eq!(doc.animation_hints.len(), 1);

        let toggled = env.apply_fixture_toggle(s, "drawer").unwrap();
        let doc = compose_diff_scene(env, &toggled, &diff(s, &toggled).unwrap()).unwrap();
        assert_eq!(doc.background.opacity, 1.0);
        assert!(doc.objects.iter().all(|l| l.opacity == DIM));
        let pair = doc.background_pair.unwrap();
        assert_eq!(&pair.from, env.resolve_background(s).unwrap());

        let both = env.apply_fixture_toggle(&moved, "drawer").unwrap();
        let doc = compose_diff_scene(env, &both, &diff(s, &both).unwrap()).unwrap();
        assert_eq!(doc.background.opacity, 1.0);

        let none = compose_diff_scene(env, s, &ChangeSet::default()).unwrap();
        assert_eq!(none, compose_scene(env, s).unwrap());
    }

    #[test]
    fn render_is_deterministic_and_ordered() {
        let b = demo::kitchen();
        let env = b.inlined_environment();
        let s = &b.initial_state;
        let doc = compose_scene(&env, s).unwrap();
        let a = render_vector(&doc, None);
        assert_eq!(a, render_vector(&doc, None));
        assert!(a.contains("data:image/png;base64,"));

        let mut swapped = s.clone();
        swapped.object_order.swap(1, 2);
        let c = render_vector(&compose_scene(&env, &swapped).unwrap(), None);
        assert_ne!(a, c);
        let mut la: Vec<_> = a.lines().collect();
        let mut lc: Vec<_> = c.lines().collect();
        la.sort();
        lc.sort();
        assert_eq!(la, lc);

        let thumb = render_vector(&doc, Some(160));
        assert!(thumb.contains("width=\"160\" height=\"120\""));
    }

    #[test]
    fn names_are_escaped() {
        let mut doc = compose_scene(&demo::kitchen().environment, &demo::kitchen().initial_state)
            .unwrap();
        doc.objects[0].name = "a<b>&\"c\"".into();
        let svg = render_vector(&doc, None);
        assert!(svg.contains("<title>a&lt;b&gt;&amp;&quot;c&quot;</title>"));
    }
}
