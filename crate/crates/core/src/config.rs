//! Run configuration with TOML sections `[problem]`, `[domain]`, `[time]` and
//! `[coupling]`.

use crate::fem::ElementMode;
use crate::forcing::ForceKind;
use crate::geometry::BodyShape;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Damping of the fluid–body subiteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationMode {
    /// Constant factor `ω`.
    Fixed,
    /// Aitken's dynamic factor, started from `ω`.
    Aitken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub shape: String,
    pub force: ForceKind,
    /// Stokes number.
    pub h: f64,
    pub element: ElementMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    /// Outer radius `R` of the truncated domain.
    pub radius: f64,
    pub size_body: f64,
    pub size_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    /// Steps per period.
    pub n_steps: usize,
    /// Periodicity tolerance `ε_P` of the linear mean projection.
    pub periodic_tol: f64,
    /// Mean-projection cycle limit.
    pub max_cycles: usize,
    /// Nonlinear run: tolerance on the period-to-period change of the mean body velocity.
    pub cycle_tol_mean: f64,
    /// Nonlinear run: tolerance on the period-to-period change of the start state.
    pub cycle_tol_state: f64,
    /// Nonlinear run: period limit.
    pub max_periods: usize,
    /// Nonlinear run: replace the period mean of each new start state by the
    /// steady mean flow driven by the averaged convection.
    pub mean_flow_correction: bool,
    /// Fraction of the mean-flow correction applied per period.
    pub mean_flow_relaxation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    /// Relaxation factor `ω`.
    pub omega: f64,
    pub relaxation: RelaxationMode,
    pub subiter_tol: f64,
    pub subiter_max: usize,
    /// Newton tolerance on the residual norm of a nonlinear step.
    pub newton_tol: f64,
    pub newton_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub problem: ProblemSection,
    pub domain: DomainSection,
    pub time: TimeSection,
    pub coupling: CouplingSection,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            shape: "ellipsoid".into(),
            force: ForceKind::Y1,
            h: 8.0,
            element: ElementMode::TaylorHood,
        }
    }
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            radius: 8.0,
            size_body: 0.05,
            size_far: 0.5,
        }
    }
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            n_steps: 200,
            periodic_tol: 1e-6,
            max_cycles: 50,
            cycle_tol_mean: 1e-5,
            cycle_tol_state: 1e-4,
            max_periods: 60,
            mean_flow_correction: true,
            mean_flow_relaxation: 0.6,
        }
    }
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            omega: 0.8,
            relaxation: RelaxationMode::Aitken,
            subiter_tol: 1e-9,
            subiter_max: 50,
            newton_tol: 1e-10,
            newton_max: 20,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn shape(&self) -> Result<BodyShape, ConfigError> {
        self.problem
            .shape
            .parse()
            .map_err(|e: crate::geometry::GeometryError| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let p = &self.problem;
        let d = &self.domain;
        let t = &self.time;
        let c = &self.coupling;
        if !(p.h > 0.0 && p.h.is_finite()) {
            return bad(format!("Stokes number h = {} must be positive", p.h));
        }
        if !(c.omega > 0.0 && c.omega <= 1.0) {
            return bad(format!("relaxation ω = {} must lie in (0, 1]", c.omega));
        }
        if !(t.mean_flow_relaxation > 0.0 && t.mean_flow_relaxation <= 1.0) {
            return bad(format!("mean_flow_relaxation = {} must lie in (0, 1]", t.mean_flow_relaxation));
        }
        if t.n_steps < 8 {
            return bad(format!("n_steps = {} must be at least 8", t.n_steps));
        }
        if !(d.size_body > 0.0 && d.size_body <= d.size_far) {
            return bad(format!(
                "mesh sizes need 0 < size_body ({}) <= size_far ({})",
                d.size_body, d.size_far
            ));
        }
        for (name, v) in [
            ("periodic_tol", t.periodic_tol),
            ("cycle_tol_mean", t.cycle_tol_mean),
            ("cycle_tol_state", t.cycle_tol_state),
            ("subiter_tol", c.subiter_tol),
            ("newton_tol", c.newton_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if t.max_cycles == 0 || t.max_periods == 0 || c.subiter_max == 0 || c.newton_max == 0 {
            return bad("iteration limits must be positive".into());
        }
        let shape = self.shape()?;
        crate::geometry::DomainSpec::new(d.radius)
            .validate(&shape)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.domain.radius, 8.0);
        assert_eq!(cfg.coupling.omega, 0.8);
        assert_eq!(cfg.time.n_steps, 200);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = SimConfig::default();
        cfg.problem.h = 3.0;
        cfg.problem.shape = "flipped-drop".into();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = SimConfig::from_toml_str("[problem]\nh = 2.5\nforce = \"y2\"\n").unwrap();
        assert_eq!(cfg.problem.h, 2.5);
        assert_eq!(cfg.problem.force, ForceKind::Y2);
        assert_eq!(cfg.time.n_steps, 200);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[problem]\nh = 0.0\n",
            "[coupling]\nomega = 1.5\n",
            "[time]\nn_steps = 4\n",
            "[domain]\nradius = 0.5\n",
            "[problem]\nshape = \"cube\"\n",
        ] {
            assert!(matches!(SimConfig::from_toml_str(text), Err(ConfigError::Invalid(_))), "{text}");
        }
        assert!(matches!(SimConfig::from_toml_str("[problem]\nbogus = 1\n"), Err(ConfigError::Parse(_))));
    }
}
