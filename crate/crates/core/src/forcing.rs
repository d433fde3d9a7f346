//! The three internal-mass motions and their sampled accelerations.
//!
//! The internal mass moves with displacement `y(t)` relative to the body and
//! the body feels the reaction `2h²·ÿ`. All profiles are 1-periodic in the
//! dimensionless time.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceKind {
    Y1,
    Y2,
    Y3,
}

impl ForceKind {
    pub const ALL: [ForceKind; 3] = [ForceKind::Y1, ForceKind::Y2, ForceKind::Y3];

    /// Displacement `y(t)`.
    pub fn displacement(self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        match self {
            ForceKind::Y1 => (PI * t).sin().powi(2),
            ForceKind::Y2 => (PI * t * t).sin().powi(2),
            ForceKind::Y3 => (PI * t * t).sin() - t * (1.0 - t) * PI,
        }
    }

    /// Velocity `ẏ(t)`.
    pub fn velocity(self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        match self {
            ForceKind::Y1 => PI * (2.0 * PI * t).sin(),
            ForceKind::Y2 => 2.0 * PI * t * (2.0 * PI * t * t).sin(),
            ForceKind::Y3 => 2.0 * PI * t * (PI * t * t).cos() - PI * (1.0 - 2.0 * t),
        }
    }

    /// Acceleration `ÿ(t)`.
    pub fn acceleration(self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        match self {
            ForceKind::Y1 => 2.0 * PI * PI * (2.0 * PI * t).cos(),
            ForceKind::Y2 => {
                let s = 2.0 * PI * t * t;
                2.0 * PI * s.sin() + 8.0 * PI * PI * t * t * s.cos()
            }
            ForceKind::Y3 => {
                let s = PI * t * t;
                2.0 * PI * s.cos() - 4.0 * PI * PI * t * t * s.sin() + 2.0 * PI
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ForceKind::Y1 => "y1",
            ForceKind::Y2 => "y2",
            ForceKind::Y3 => "y3",
        }
    }
}

impl fmt::Display for ForceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown force `{0}` (expected y1, y2 or y3)")]
pub struct UnknownForce(pub String);

impl FromStr for ForceKind {
    type Err = UnknownForce;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "y1" => Ok(ForceKind::Y1),
            "y2" => Ok(ForceKind::Y2),
            "y3" => Ok(ForceKind::Y3),
            _ => Err(UnknownForce(s.to_string())),
        }
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Bits kept below the leading bit of the largest sample.
const MEAN_FREE_BITS: i32 = 40;

/// Subtracts the mean on a fixed-point grid on which every partial sum is
/// exact, so the samples add up to exactly zero in any order.
fn remove_mean(raw: &[f64]) -> (f64, Vec<f64>) {
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return (0.0, raw.to_vec());
    }
    let q = 2f64.powi(scale.log2().ceil() as i32 - MEAN_FREE_BITS);
    let mut m: Vec<i64> = raw.iter().map(|v| (v / q).round() as i64).collect();
    let n = m.len() as i64;
    let total: i64 = m.iter().sum();
    let (base, rem) = (total.div_euclid(n), total.rem_euclid(n));
    for (i, v) in m.iter_mut().enumerate() {
        *v -= base + i64::from((i as i64) < rem);
    }
    (total as f64 * q / n as f64, m.iter().map(|&v| v as f64 * q).collect())
}

/// Acceleration sampled at the step midpoints of a period split into `n` steps,
/// with the discrete mean removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingProfile {
    pub kind: ForceKind,
    pub n: usize,
    /// Mean removed from the raw midpoint samples.
    pub correction: f64,
    samples: Vec<f64>,
}

impl ForcingProfile {
    pub fn new(kind: ForceKind, n: usize) -> Self {
        assert!(n >= 2, "at least two steps per period");
        let raw: Vec<f64> = (0..n)
            .map(|i| kind.acceleration((i as f64 + 0.5) / n as f64))
            .collect();
        let (correction, samples) = remove_mean(&raw);
        Self {
            kind,
            n,
            correction,
            samples,
        }
    }

    pub fn period(&self) -> f64 {
        1.0
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Corrected acceleration for step `i` (0-based), at `t = (i + ½)/n`.
    pub fn sample(&self, i: usize) -> f64 {
        self.samples[i % self.n]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Profile with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kind: self.kind,
            n: self.n,
            correction: self.correction * factor,
            samples: self.samples.iter().map(|s| s * factor).collect(),
        }
    }
}

/// Corrected midpoint samples of `kind` for `n` steps.
pub fn midpoint_samples(kind: ForceKind, n: usize) -> Vec<f64> {
    ForcingProfile::new(kind, n).samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn acceleration_values() {
        assert_relative_eq!(ForceKind::Y1.acceleration(0.0), 2.0 * PI * PI);
        assert!(ForceKind::Y1.acceleration(0.25).abs() < 1e-14);
        assert_relative_eq!(ForceKind::Y3.acceleration(0.0), 4.0 * PI);
    }

    #[test]
    fn velocity_is_periodic() {
        let end = 1.0 - 1e-12;
        assert_eq!(ForceKind::Y2.velocity(0.0), 0.0);
        assert!(ForceKind::Y2.velocity(end).abs() < 1e-9);
        assert_relative_eq!(ForceKind::Y3.velocity(0.0), -PI);
        assert_relative_eq!(ForceKind::Y3.velocity(end), -PI, max_relative = 1e-9);
        assert!(ForceKind::Y1.velocity(0.5).abs() < 1e-15);
    }

    #[test]
    fn y1_correction_is_negligible() {
        assert!(ForcingProfile::new(ForceKind::Y1, 4).correction.abs() < 1e-15);
    }

    #[test]
    fn y2_correction_is_small_but_nonzero() {
        let c = ForcingProfile::new(ForceKind::Y2, 100).correction;
        assert!(c != 0.0 && c.abs() < 0.01, "{c}");
    }

    #[test]
    fn y1_samples_are_symmetric_others_not() {
        let n = 64;
        let s1 = midpoint_samples(ForceKind::Y1, n);
        for i in 0..n {
            assert!((s1[i] - s1[n - 1 - i]).abs() < 1e-12);
        }
        for k in [ForceKind::Y2, ForceKind::Y3] {
            let s = midpoint_samples(k, n);
            assert!((0..n).any(|i| (s[i] - s[n - 1 - i]).abs() > 1e-3));
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("y2".parse::<ForceKind>().unwrap(), ForceKind::Y2);
        assert!("y4".parse::<ForceKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn corrected_mean_vanishes(n in 2usize..2000, k in 0usize..3) {
                let s = midpoint_samples(ForceKind::ALL[k], n);
                let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                prop_assert_eq!(compensated_sum(&s), 0.0);
                prop_assert_eq!(s.iter().sum::<f64>(), 0.0);
                prop_assert_eq!(s.iter().rev().sum::<f64>(), 0.0);
                let p = ForcingProfile::new(ForceKind::ALL[k], n);
                for (i, v) in s.iter().enumerate() {
                    let raw = ForceKind::ALL[k].acceleration((i as f64 + 0.5) / n as f64) - p.correction;
                    prop_assert!((v - raw).abs() <= 1e-11 * scale.max(1.0));
                }
            }

            #[test]
            fn acceleration_matches_displacement(t in 0.01f64..0.99, k in 0usize..3) {
                let f = ForceKind::ALL[k];
                let e = 1e-4;
                let fd = (f.displacement(t + e) - 2.0 * f.displacement(t) + f.displacement(t - e)) / (e * e);
                let a = f.acceleration(t);
                prop_assert!((fd - a).abs() <= 1e-5 * a.abs().max(1.0), "{} vs {}", fd, a);
            }

            #[test]
            fn velocity_matches_displacement(t in 0.01f64..0.99, k in 0usize..3) {
                let f = ForceKind::ALL[k];
                let e = 1e-6;
                let fd = (f.displacement(t + e) - f.displacement(t - e)) / (2.0 * e);
                prop_assert!((fd - f.velocity(t)).abs() <= 1e-6 * f.velocity(t).abs().max(1.0));
            }
        }
    }
}
