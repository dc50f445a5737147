//! Engine for authoring robot instructions by manipulating a 2D scene.
//!
//! The pieces, bottom-up: [`env`] describes a scene and its snapshots,
//! [`timeline`] records the user's edits as ordered steps, [`scene`] renders
//! a step, [`llm`] talks to a language model through frozen prompts,
//! [`assist`] turns model output into candidate steps, [`codegen`] translates
//! a timeline into skill calls, and [`judge`] compares a session against a
//! reference.

pub mod assist;
pub mod codegen;
pub mod demo;
pub mod env;
pub mod geometry;
pub mod judge;
pub mod llm;
pub mod scene;
pub mod support;
pub mod timeline;

#[cfg(test)]
mod testutil;

pub use env::bundle::Bundle;
pub use env::{
    BackgroundKey, EnvError, EnvState, Environment, FixtureSpec, GoalLocation, ImageRef,
    ObjectSpec,
};
pub use geometry::{BoundingBox, Canvas, Pose};
pub use timeline::{ChangeSet, Event, Provenance, SessionArchive, Step, Timeline, TimelineError};
