//! Scenario files: one JSON document per scenario, complex numbers as
//! `[re, im]`, angles in radians.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stokes_core::data::{BranchPhase, CauchyDatum, LaurentCoefficients, VariationOptions};
use stokes_core::geometry::normalize_angle;
use stokes_core::jump::JumpOptions;
use stokes_core::lateral::{DEFAULT_CLEARANCE, DEFAULT_RADIUS, DEFAULT_SECTOR_MARGIN};
use stokes_core::quadrature::QuadratureSettings;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario, field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// `Σ cₖ zᵏ`
    Polynomial {
        coefficients: Vec<Complex64>,
    },
    /// `Σₙ aₙ/(z−z0)ⁿ` plus an optional entire polynomial part.
    Laurent {
        z0: Complex64,
        coefficients: Vec<Complex64>,
        #[serde(default)]
        entire: Vec<Complex64>,
    },
    /// `aₙ = first·ratioⁿ⁻¹`
    LaurentGeometric {
        z0: Complex64,
        first: Complex64,
        ratio: Complex64,
        #[serde(default)]
        entire: Vec<Complex64>,
    },
    Log {
        z0: Complex64,
    },
    Power {
        z0: Complex64,
        lambda: f64,
    },
    /// `exp((z−z0)^{−λ})`
    Essential {
        z0: Complex64,
        lambda: f64,
    },
}

impl DatumSpec {
    pub fn build(&self) -> Result<CauchyDatum, stokes_core::data::DataError> {
        match self {
            Self::Polynomial { coefficients } => CauchyDatum::polynomial(coefficients.clone()),
            Self::Laurent {
                z0,
                coefficients,
                entire,
            } => CauchyDatum::laurent(
                LaurentCoefficients::Finite(coefficients.clone()),
                *z0,
                entire.clone(),
            ),
            Self::LaurentGeometric {
                z0,
                first,
                ratio,
                entire,
            } => CauchyDatum::laurent(
                LaurentCoefficients::Geometric {
                    first: *first,
                    ratio: *ratio,
                },
                *z0,
                entire.clone(),
            ),
            Self::Log { z0 } => CauchyDatum::log_branch(*z0),
            Self::Power { z0, lambda } => CauchyDatum::power_branch(*lambda, *z0),
            Self::Essential { z0, lambda } => CauchyDatum::essential_power(*lambda, *z0),
        }
    }
}

/// A single datum or a sum of single-point data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatumField {
    One(DatumSpec),
    Sum(Vec<DatumSpec>),
}

impl DatumField {
    pub fn specs(&self) -> &[DatumSpec] {
        match self {
            Self::One(d) => std::slice::from_ref(d),
            Self::Sum(v) => v,
        }
    }
}

/// Closed-form references a scenario can additionally be checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedTag {
    /// `−2πi·(4πt)^{−1/2}·e^{−(z0−z)²/4t}`
    HeatSimplePole,
    /// `−iπ·erfc((z0−z)/(2√t))`, real argument only.
    HeatLogErfc,
    Zero,
}

fn default_p() -> u32 {
    1
}
fn default_q() -> u32 {
    2
}
fn default_eps() -> f64 {
    0.3
}
fn default_series_tol() -> f64 {
    1e-12
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_abs_tolerance() -> f64 {
    1e-8
}
fn default_radius() -> f64 {
    DEFAULT_RADIUS
}
fn default_margin() -> f64 {
    DEFAULT_SECTOR_MARGIN
}
fn default_clearance() -> f64 {
    DEFAULT_CLEARANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub datum: DatumField,
    pub z: Complex64,
    pub t: Vec<Complex64>,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default = "default_eps")]
    pub eps_dir: f64,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
    /// Relative tolerance a row must meet.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Absolute tolerance used when the closed-form jump is exactly zero.
    #[serde(default = "default_abs_tolerance")]
    pub abs_tolerance: f64,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub expected: Option<ExpectedTag>,
    #[serde(default)]
    pub phase: BranchPhase,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_margin")]
    pub sector_margin: f64,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn data(&self) -> Vec<CauchyDatum> {
        self.datum
            .specs()
            .iter()
            .map(|d| d.build().expect("validated at load"))
            .collect()
    }

    pub fn jump_options(&self) -> JumpOptions {
        JumpOptions {
            p: self.p,
            q: self.q,
            eps_dir: self.eps_dir,
            series_tol: self.series_tol,
            variation: VariationOptions {
                series_tol: self.series_tol,
                phase: self.phase,
                ..VariationOptions::default()
            },
            settings: self.quadrature,
            sector_margin: self.sector_margin,
            radius: self.radius,
            clearance: self.clearance,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let specs = self.datum.specs();
        if specs.is_empty() {
            return Err(invalid("datum", "at least one datum is required"));
        }
        for (i, spec) in specs.iter().enumerate() {
            let field = match &self.datum {
                DatumField::One(_) => "datum".to_string(),
                DatumField::Sum(_) => format!("datum[{i}]"),
            };
            let datum = spec.build().map_err(|e| invalid(&field, e.to_string()))?;
            if let Some(z0) = datum.singular_point() {
                if z0 == self.z {
                    return Err(invalid("z", "z coincides with the singular point z0"));
                }
            }
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) {
            return Err(invalid("z", "must be finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "must be positive and finite"));
        }
        if !(self.z.norm() < self.radius) {
            return Err(invalid(
                "z",
                format!(
                    "|z| = {} must be below radius {}",
                    self.z.norm(),
                    self.radius
                ),
            ));
        }
        if self.t.is_empty() {
            return Err(invalid("t", "t-list must be nonempty"));
        }
        for (i, t) in self.t.iter().enumerate() {
            if !(t.norm() > 0.0 && t.norm().is_finite()) {
                return Err(invalid(format!("t[{i}]"), "t must be nonzero and finite"));
            }
        }
        if self.p < 1 || self.q <= self.p {
            return Err(invalid(
                "q",
                format!("need 1 ≤ p < q, got ({}, {})", self.p, self.q),
            ));
        }
        if !(self.eps_dir > 0.0 && self.eps_dir < std::f64::consts::PI) {
            return Err(invalid("eps_dir", "must lie in (0, π)"));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(invalid("series_tol", "must lie in (0, 1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if !(self.abs_tolerance > 0.0) {
            return Err(invalid("abs_tolerance", "must be positive"));
        }
        if !(self.sector_margin >= 0.0) {
            return Err(invalid("sector_margin", "must be nonnegative"));
        }
        if !(self.clearance > 0.0) {
            return Err(invalid("clearance", "must be positive"));
        }
        self.quadrature
            .validate()
            .map_err(|e| invalid("quadrature", e.to_string()))?;
        if specs.len() > 1 {
            // jumps of a sum are only compared across one common Stokes line
            let dirs: Vec<f64> = self
                .data()
                .iter()
                .filter_map(|d| {
                    d.stokes_direction(self.z, self.p, self.q)
                        .map(|(delta, _)| delta.angle())
                })
                .collect();
            if dirs
                .windows(2)
                .any(|w| normalize_angle(w[0] - w[1]).abs() > 1e-12)
            {
                return Err(invalid(
                    "datum",
                    "summed data must share one Stokes direction as seen from z",
                ));
            }
        }
        if self.expected.is_some() && specs.len() != 1 {
            return Err(invalid(
                "expected",
                "reference tags apply to a single datum",
            ));
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}
