//! Angles, rays and sectors in the complex plane.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Map an angle to (−π, π]. The tie at −π goes to +π.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Principal argument in (−π, π].
pub fn principal_arg(z: Complex64) -> f64 {
    normalize_angle(z.arg())
}

/// A direction in the plane, stored normalized to (−π, π].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct RayDirection(f64);

impl RayDirection {
    pub fn new(angle: f64) -> Self {
        Self(normalize_angle(angle))
    }

    pub fn of(z: Complex64) -> Self {
        Self::new(z.arg())
    }

    pub fn angle(self) -> f64 {
        self.0
    }

    /// e^{i·angle}
    pub fn unit(self) -> Complex64 {
        Complex64::from_polar(1.0, self.0)
    }

    pub fn rotated(self, by: f64) -> Self {
        Self::new(self.0 + by)
    }

    /// Signed angular distance `self − other` wrapped to (−π, π].
    pub fn offset_from(self, other: RayDirection) -> f64 {
        normalize_angle(self.0 - other.0)
    }
}

impl From<f64> for RayDirection {
    fn from(a: f64) -> Self {
        Self::new(a)
    }
}

impl From<RayDirection> for f64 {
    fn from(d: RayDirection) -> Self {
        d.0
    }
}

/// The half-line `origin + r·e^{iθ}`, `r ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Complex64,
    /// Angle of the ray. Kept as a raw angle so that lifts outside (−π, π]
    /// survive (the unit vector is what matters for the parametrization).
    pub angle: f64,
}

impl Ray {
    pub fn new(origin: Complex64, direction: RayDirection) -> Self {
        Self {
            origin,
            angle: direction.angle(),
        }
    }

    pub fn from_angle(origin: Complex64, angle: f64) -> Self {
        Self { origin, angle }
    }

    pub fn direction(&self) -> RayDirection {
        RayDirection::new(self.angle)
    }

    pub fn unit(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.angle)
    }

    pub fn point(&self, r: f64) -> Complex64 {
        self.origin + self.unit() * r
    }

    /// Euclidean distance from `p` to the ray.
    pub fn distance_to(&self, p: Complex64) -> f64 {
        let local = (p - self.origin) * self.unit().conj();
        if local.re <= 0.0 {
            local.norm()
        } else {
            local.im.abs()
        }
    }
}

/// The sector `S_d(α, R)`: directions within `α/2` of `d`, modulus below `R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub direction: RayDirection,
    pub opening: f64,
    pub radius: f64,
}

impl Sector {
    pub fn new(direction: RayDirection, opening: f64, radius: f64) -> Self {
        Self {
            direction,
            opening,
            radius,
        }
    }

    pub fn contains(&self, t: Complex64) -> bool {
        if t == Complex64::new(0.0, 0.0) || !(t.norm() < self.radius) {
            return false;
        }
        RayDirection::of(t).offset_from(self.direction).abs() < self.opening / 2.0
    }
}
