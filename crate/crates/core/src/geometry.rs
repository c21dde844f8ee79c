//! Planar/3D positions and bearings.
//!
//! Azimuths follow the mathematical convention: degrees counter-clockwise
//! from the +x axis, normalized to `[0, 360)`.

use serde::{Deserialize, Serialize};

/// A point in meters. Serialized as `[x, y, z]`; a two-element array is
/// accepted on input and leaves `z` unset (NaN) until defaults are filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PositionRepr", into = "[f64; 3]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PositionRepr {
    Xyz([f64; 3]),
    Xy([f64; 2]),
}

impl From<PositionRepr> for Position {
    fn from(r: PositionRepr) -> Self {
        match r {
            PositionRepr::Xyz([x, y, z]) => Position { x, y, z },
            PositionRepr::Xy([x, y]) => Position { x, y, z: f64::NAN },
        }
    }
}

impl From<Position> for [f64; 3] {
    fn from(p: Position) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` as seen from `self`.
    pub fn bearing_to(&self, other: &Position) -> f64 {
        normalize_deg((other.y - self.y).atan2(other.x - self.x).to_degrees())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy, self.z)
    }
}

/// Folds any angle into `[0, 360)`.
pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Absolute angular separation in `[0, 180]`.
pub fn angular_offset_deg(a: f64, b: f64) -> f64 {
    let d = normalize_deg(a - b);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}
