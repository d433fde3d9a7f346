//! Body shapes and the truncated meridian domain.
//!
//! Every body is a solid of revolution about the `z` axis described by the
//! level function
//!
//! ```text
//! Λ(r, z) = c_r · r² / (1 + β z)² + c_z · z² − 1
//! ```
//!
//! which is negative inside the body. The taper `β` distinguishes the
//! ellipsoid (`β = 0`) from the drop (`β > 0`) and its mirror image
//! (`β < 0`). Only the meridian curve is ever used.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("singular taper: 1 + β·z vanishes at z = {z}")]
    SingularTaper { z: f64 },
    #[error("z = {z} outside the body extent |z| <= {half_length}")]
    OutOfRange { z: f64, half_length: f64 },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("outer radius {radius} does not enclose the body (needs > {required})")]
    DomainTooSmall { radius: f64, required: f64 },
    #[error("unknown shape name `{0}`")]
    UnknownShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyKind {
    Ellipsoid,
    Drop,
    FlippedDrop,
}

impl BodyKind {
    pub fn mirrored(self) -> Self {
        match self {
            BodyKind::Ellipsoid => BodyKind::Ellipsoid,
            BodyKind::Drop => BodyKind::FlippedDrop,
            BodyKind::FlippedDrop => BodyKind::Drop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyShape {
    pub kind: BodyKind,
    pub c_r: f64,
    pub c_z: f64,
    pub taper: f64,
}

impl BodyShape {
    pub const DEFAULT_C_R: f64 = 1.5;
    pub const DEFAULT_C_Z: f64 = 0.7;
    pub const DEFAULT_TAPER: f64 = 0.3;

    pub fn ellipsoid() -> Self {
        Self {
            kind: BodyKind::Ellipsoid,
            c_r: Self::DEFAULT_C_R,
            c_z: Self::DEFAULT_C_Z,
            taper: 0.0,
        }
    }

    pub fn drop() -> Self {
        Self {
            kind: BodyKind::Drop,
            taper: Self::DEFAULT_TAPER,
            ..Self::ellipsoid()
        }
    }

    pub fn flipped_drop() -> Self {
        Self {
            kind: BodyKind::FlippedDrop,
            taper: -Self::DEFAULT_TAPER,
            ..Self::ellipsoid()
        }
    }

    /// Sphere of the given radius (an ellipsoid with equal coefficients).
    pub fn sphere(radius: f64) -> Self {
        let c = 1.0 / (radius * radius);
        Self {
            kind: BodyKind::Ellipsoid,
            c_r: c,
            c_z: c,
            taper: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.c_r > 0.0 && self.c_z > 0.0) || !self.c_r.is_finite() || !self.c_z.is_finite() {
            return Err(GeometryError::InvalidShape(format!(
                "coefficients must be positive, got c_r={}, c_z={}",
                self.c_r, self.c_z
            )));
        }
        if 1.0 - self.taper.abs() * self.half_length() <= 0.0 {
            return Err(GeometryError::InvalidShape(format!(
                "taper {} makes 1 + β·z vanish inside |z| <= {}",
                self.taper,
                self.half_length()
            )));
        }
        Ok(())
    }

    /// Half of the axial extent, `1/√c_z`.
    pub fn half_length(&self) -> f64 {
        1.0 / self.c_z.sqrt()
    }

    /// Bound on the largest radius of the body.
    pub fn max_radius_bound(&self) -> f64 {
        (1.0 + self.taper.abs() * self.half_length()) / self.c_r.sqrt()
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.taper == 0.0
    }

    /// The body reflected through the plane `z = 0`.
    pub fn mirrored(&self) -> Self {
        Self {
            kind: self.kind.mirrored(),
            taper: -self.taper,
            ..*self
        }
    }

    pub fn level_value(&self, r: f64, z: f64) -> Result<f64, GeometryError> {
        let s = 1.0 + self.taper * z;
        if s == 0.0 {
            return Err(GeometryError::SingularTaper { z });
        }
        Ok(self.c_r * r * r / (s * s) + self.c_z * z * z - 1.0)
    }

    /// Meridian radius `r_b(z)` of the body surface.
    pub fn body_profile(&self, z: f64) -> Result<f64, GeometryError> {
        let half_length = self.half_length();
        if !(z.abs() <= half_length) {
            return Err(GeometryError::OutOfRange { z, half_length });
        }
        if z.abs() == half_length {
            return Ok(0.0);
        }
        let inner = (1.0 - self.c_z * z * z).max(0.0);
        Ok((1.0 + self.taper * z) * (inner / self.c_r).sqrt())
    }

    /// Point on the meridian curve for the polar-like parameter `θ ∈ [0, π]`;
    /// `θ = 0` is the pole at positive `z`.
    pub fn curve_point(&self, theta: f64) -> [f64; 2] {
        let z = self.half_length() * theta.cos();
        let r = (1.0 + self.taper * z) * theta.sin().max(0.0) / self.c_r.sqrt();
        [r, z]
    }

    /// Volume of the solid of revolution (midpoint quadrature in θ on a fine grid).
    pub fn volume(&self) -> f64 {
        let n = 20_000;
        let dt = PI / n as f64;
        let mut v = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * dt;
            let [r, _] = self.curve_point(t);
            // dz/dθ = −L sin θ
            v += PI * r * r * self.half_length() * t.sin() * dt;
        }
        v
    }
}

impl fmt::Display for BodyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BodyKind::Ellipsoid => "ellipsoid",
            BodyKind::Drop => "drop",
            BodyKind::FlippedDrop => "flipped-drop",
        })
    }
}

/// Named shapes accepted on the command line.
pub fn shape_by_name(name: &str) -> Result<BodyShape, GeometryError> {
    match name {
        "ellipsoid" => Ok(BodyShape::ellipsoid()),
        "drop" => Ok(BodyShape::drop()),
        "flipped-drop" | "flipped_drop" | "fd" => Ok(BodyShape::flipped_drop()),
        "sphere" => Ok(BodyShape::sphere(1.0)),
        other => Err(GeometryError::UnknownShape(other.to_string())),
    }
}

impl FromStr for BodyShape {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        shape_by_name(s)
    }
}

/// Truncated meridian domain `(0, R) × (−R, R)` minus the body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer_radius: f64,
}

impl DomainSpec {
    pub fn new(outer_radius: f64) -> Self {
        Self { outer_radius }
    }

    pub fn validate(&self, shape: &BodyShape) -> Result<(), GeometryError> {
        shape.validate()?;
        let required = shape.half_length().max(shape.max_radius_bound());
        if !(self.outer_radius > required) {
            return Err(GeometryError::DomainTooSmall {
                radius: self.outer_radius,
                required,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_level_values() {
        let e = BodyShape::ellipsoid();
        assert_eq!(e.level_value(0.0, 0.0).unwrap(), -1.0);
        let pole = 1.0 / 0.7f64.sqrt();
        assert!(e.level_value(0.0, pole).unwrap().abs() < 1e-15);
    }

    #[test]
    fn drop_level_value_matches_formula() {
        let d = BodyShape::drop();
        let expected = 1.5 * 0.25 / (1.15f64 * 1.15) + 0.7 * 0.25 - 1.0;
        assert!((d.level_value(0.5, 0.5).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn singular_taper_is_an_error() {
        let d = BodyShape::drop();
        let z = -1.0 / 0.3;
        assert!(matches!(
            d.level_value(0.1, z),
            Err(GeometryError::SingularTaper { .. })
        ));
    }

    #[test]
    fn profile_values() {
        let e = BodyShape::ellipsoid();
        assert!((e.body_profile(0.0).unwrap() - 1.0 / 1.5f64.sqrt()).abs() < 1e-15);
        let pole = e.half_length();
        for s in [e, BodyShape::drop(), BodyShape::flipped_drop()] {
            assert_eq!(s.body_profile(pole).unwrap(), 0.0);
        }
        assert!(matches!(
            e.body_profile(pole * 1.01),
            Err(GeometryError::OutOfRange { .. })
        ));
    }

    #[test]
    fn domain_validation() {
        let e = BodyShape::ellipsoid();
        assert!(DomainSpec::new(16.0).validate(&e).is_ok());
        assert!(DomainSpec::new(1.0).validate(&e).is_err());
    }

    #[test]
    fn sphere_volume() {
        let s = BodyShape::sphere(1.0);
        assert!((s.volume() - 4.0 / 3.0 * PI).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn profile_lies_on_level_set(t in 0.0f64..1.0) {
                for s in [BodyShape::ellipsoid(), BodyShape::drop(), BodyShape::flipped_drop()] {
                    let z = (2.0 * t - 1.0) * s.half_length();
                    let r = s.body_profile(z).unwrap();
                    prop_assert!(s.level_value(r, z).unwrap().abs() < 1e-12);
                }
            }

            #[test]
            fn drop_mirrors_flipped_drop(t in 0.0f64..1.0) {
                let d = BodyShape::drop();
                let f = BodyShape::flipped_drop();
                let z = (2.0 * t - 1.0) * d.half_length();
                prop_assert_eq!(d.body_profile(z).unwrap(), f.body_profile(-z).unwrap());
            }

            #[test]
            fn ellipsoid_profile_is_even(t in 0.0f64..1.0) {
                let e = BodyShape::ellipsoid();
                let z = t * e.half_length();
                prop_assert_eq!(e.body_profile(z).unwrap(), e.body_profile(-z).unwrap());
            }
        }
    }
}
