//! Integer pixel geometry shared by every module.

use serde::{Deserialize, Serialize};

/// Canvas size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    /// Whether an anchor point lies on the canvas.
    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    pub fn contains_box(&self, b: &BoundingBox) -> bool {
        u64::from(b.x) + u64::from(b.w) <= u64::from(self.width)
            && u64::from(b.y) + u64::from(b.h) <= u64::from(self.height)
    }
}

/// Top-left anchor of an object on the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub x: u32,
    pub y: u32,
}

impl Pose {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Rounds a sub-pixel drop point half-up. Negative or non-finite
    /// coordinates have no pixel and yield `None`.
    pub fn from_f64(x: f64, y: f64) -> Option<Self> {
        Some(Self {
            x: round_half_up(x)?,
            y: round_half_up(y)?,
        })
    }
}

impl std::fmt::Display for Pose {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub(crate) fn round_half_up(v: f64) -> Option<u32> {
    if !v.is_finite() {
        return None;
    }
    let r = (v + 0.5).floor();
    if r < 0.0 || r > f64::from(u32::MAX) {
        return None;
    }
    Some(r as u32)
}

/// Axis-aligned box `[x, y, w, h]` in canvas pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn at(pose: Pose, w: u32, h: u32) -> Self {
        Self::new(pose.x, pose.y, w, h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Area of the intersection with `other`.
    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = (u64::from(self.x) + u64::from(self.w)).min(u64::from(other.x) + u64::from(other.w));
        let y1 = (u64::from(self.y) + u64::from(self.h)).min(u64::from(other.y) + u64::from(other.h));
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// True when more than half of `self` lies inside `other`.
    pub fn mostly_inside(&self, other: &BoundingBox) -> bool {
        let area = self.area();
        area > 0 && 2 * self.intersection_area(other) > area
    }

    /// Center, rounded down.
    pub fn center(&self) -> (u32, u32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn contains_point(&self, px: u32, py: u32) -> bool {
        px >= self.x
            && py >= self.y
            && u64::from(px) < u64::from(self.x) + u64::from(self.w)
            && u64::from(py) < u64::from(self.y) + u64::from(self.h)
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.w, self.h].serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, w, h] = <[u32; 4]>::deserialize(d)?;
        Ok(Self { x, y, w, h })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(Pose::from_f64(10.5, 3.49), Some(Pose::new(11, 3)));
        assert_eq!(Pose::from_f64(0.0, 0.4999), Some(Pose::new(0, 0)));
        assert_eq!(Pose::from_f64(-0.4, 2.0), Some(Pose::new(0, 2)));
        assert_eq!(Pose::from_f64(-0.6, 2.0), None);
        assert_eq!(Pose::from_f64(f64::NAN, 2.0), None);
    }

    #[test]
    fn overlap_fraction() {
        let a = BoundingBox::new(0, 0, 10, 10);
        let b = BoundingBox::new(4, 0, 10, 10);
        assert_eq!(a.intersection_area(&b), 60);
        assert!(a.mostly_inside(&b));
        let c = BoundingBox::new(5, 0, 10, 10);
        // exactly half is not "more than half"
        assert!(!a.mostly_inside(&c));
        assert_eq!(a.intersection_area(&BoundingBox::new(20, 20, 1, 1)), 0);
    }
}
