//! Lateral sums: the heat-equation Gaussian integral and the `(p, q)`
//! integral against the Ecalle kernel `C_{q/p}`.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::data::{CauchyDatum, DataError};
use crate::geometry::{normalize_angle, principal_arg, Ray, RayDirection};
use crate::kernels::{EcalleKernel, EcalleKernelSpec, KernelError};
use crate::quadrature::{
    integrate_ray, QuadratureError, QuadratureResult, QuadratureSettings, TailBound,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LateralError {
    #[error("integration ray passes within {distance:.3e} of the singular point {point} (clearance {clearance:.1e})")]
    RayHitsSingularity {
        point: Complex64,
        distance: f64,
        clearance: f64,
    },
    #[error("t = {t} is outside the sector around θ = {theta} (half-opening {half_opening}, radius {radius})")]
    Sector {
        t: Complex64,
        theta: f64,
        half_opening: f64,
        radius: f64,
    },
    #[error("z = {z} is outside the working disk of radius {radius}")]
    OutsideDisk { z: Complex64, radius: f64 },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub const DEFAULT_CLEARANCE: f64 = 1e-6;
pub const DEFAULT_SECTOR_MARGIN: f64 = 0.1;
pub const DEFAULT_RADIUS: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct LateralSumRequest {
    pub datum: CauchyDatum,
    /// Summation direction for `t`.
    pub theta: f64,
    pub t: Complex64,
    pub z: Complex64,
    pub p: u32,
    pub q: u32,
    pub settings: QuadratureSettings,
    /// `ε̃`: the sector half-opening is `(π(q−p)/p − ε̃)/2`.
    pub sector_margin: f64,
    /// `r`: bound on `|t|` and `|z|`.
    pub radius: f64,
    pub clearance: f64,
}

impl LateralSumRequest {
    /// Heat-equation request with default settings.
    pub fn heat(datum: CauchyDatum, theta: f64, t: Complex64, z: Complex64) -> Self {
        Self {
            datum,
            theta,
            t,
            z,
            p: 1,
            q: 2,
            settings: QuadratureSettings::default(),
            sector_margin: DEFAULT_SECTOR_MARGIN,
            radius: DEFAULT_RADIUS,
            clearance: DEFAULT_CLEARANCE,
        }
    }

    pub fn with_pq(mut self, p: u32, q: u32) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn with_settings(mut self, settings: QuadratureSettings) -> Self {
        self.settings = settings;
        self
    }

    fn validate(&self) -> Result<(), LateralError> {
        if self.p < 1 || self.q <= self.p {
            return Err(LateralError::Invalid(format!(
                "need 1 ≤ p < q, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if self.t.norm() == 0.0 || !self.t.norm().is_finite() {
            return Err(LateralError::Invalid(format!(
                "t must be nonzero and finite, got {}",
                self.t
            )));
        }
        self.settings.validate()?;
        if !(self.z.norm() < self.radius) {
            return Err(LateralError::OutsideDisk {
                z: self.z,
                radius: self.radius,
            });
        }
        if !sector_check(
            self.t,
            self.theta,
            self.p,
            self.q,
            self.sector_margin,
            self.radius,
        ) {
            return Err(LateralError::Sector {
                t: self.t,
                theta: self.theta,
                half_opening: half_opening(self.p, self.q, self.sector_margin),
                radius: self.radius,
            });
        }
        let cert = self.datum.growth_certificate(self.p, self.q);
        if !cert.admissible {
            return Err(LateralError::Invalid(format!(
                "datum growth order {} exceeds q/(q−p)",
                cert.order
            )));
        }
        Ok(())
    }
}

fn half_opening(p: u32, q: u32, margin: f64) -> f64 {
    (PI * (q - p) as f64 / p as f64 - margin) / 2.0
}

/// `t ∈ S_θ(π(q−p)/p − ε̃, r)`.
pub fn sector_check(t: Complex64, theta: f64, p: u32, q: u32, margin: f64, radius: f64) -> bool {
    if p < 1 || q <= p || t.norm() == 0.0 {
        return false;
    }
    let off = normalize_angle(principal_arg(t) - theta).abs();
    off < half_opening(p, q, margin) && t.norm() < radius
}

/// Lift of `theta` nearest to `arg t`, matching the principal powers of `t`.
pub fn lift_towards(theta: f64, t: Complex64) -> f64 {
    let at = principal_arg(t);
    at + normalize_angle(theta - at)
}

/// Singular points `e^{−2πil/q}(z0 − z)` of the rotated copies `φ(z + e^{2πil/q}s)`.
pub fn rotated_singular_points(datum: &CauchyDatum, z: Complex64, q: u32) -> Vec<Complex64> {
    match datum.singular_point() {
        None => vec![],
        Some(z0) => (0..q)
            .map(|l| Complex64::from_polar(1.0, -2.0 * PI * l as f64 / q as f64) * (z0 - z))
            .collect(),
    }
}

/// Directions `ψ` whose integration ray `ψ·p/q` meets a rotated singular point.
pub fn singular_directions(datum: &CauchyDatum, z: Complex64, p: u32, q: u32) -> Vec<RayDirection> {
    let mut out: Vec<RayDirection> = rotated_singular_points(datum, z, q)
        .into_iter()
        .map(|s| RayDirection::new(q as f64 * principal_arg(s) / p as f64))
        .collect();
    out.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
    out.dedup_by(|a, b| (a.angle() - b.angle()).abs() < 1e-12);
    out
}

fn check_clearance(
    ray: &Ray,
    points: &[Complex64],
    datum: &CauchyDatum,
    clearance: f64,
) -> Result<(), LateralError> {
    let needed = 1.05 * datum.singular_radius() + clearance;
    for &point in points {
        let distance = ray.distance_to(point);
        if distance < needed {
            return Err(LateralError::RayHitsSingularity {
                point,
                distance,
                clearance: needed,
            });
        }
    }
    Ok(())
}

/// `(4πt)^{−1/2} ∫₀^{e^{iθ/2}∞} (φ(z+s) + φ(z−s)) e^{−s²/4t} ds`.
pub fn lateral_sum_heat(req: &LateralSumRequest) -> Result<QuadratureResult, LateralError> {
    if (req.p, req.q) != (1, 2) {
        return Err(LateralError::Invalid(
            "the heat sum needs (p, q) = (1, 2)".into(),
        ));
    }
    req.validate()?;
    let angle = lift_towards(req.theta, req.t) / 2.0;
    let ray = Ray::from_angle(Complex64::new(0.0, 0.0), angle);
    let points: Vec<Complex64> = req
        .datum
        .singular_point()
        .map(|z0| vec![z0 - req.z, req.z - z0])
        .unwrap_or_default();
    check_clearance(&ray, &points, &req.datum, req.clearance)?;

    let t = req.t;
    let z = req.z;
    let failure = Cell::new(None);
    let f = |s: Complex64| {
        let gauss = (-s * s / (4.0 * t)).exp();
        if gauss.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = req.datum.evaluate_continued(z + s, z);
        let b = req.datum.evaluate_continued(z - s, z);
        match (a, b) {
            (Ok(a), Ok(b)) => (a + b) * gauss,
            (Err(e), _) | (_, Err(e)) => {
                failure.set(Some(e));
                Complex64::new(f64::NAN, 0.0)
            }
        }
    };
    let rate = (Complex64::from_polar(1.0, 2.0 * angle) / (4.0 * t)).re;
    let start = (40.0 / rate.max(1e-300)).sqrt();
    let res = integrate_ray(f, &ray, TailBound::Probe { start }, &req.settings);
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok(res?.scaled(1.0 / (4.0 * PI * t).sqrt()))
}

/// `(q t^{p/q})^{−1} ∫₀^{e^{iψp/q}∞} Σₗ φ(z + e^{2πil/q}s) C_{q/p}(s/t^{p/q}) ds`.
pub fn lateral_sum_general(req: &LateralSumRequest) -> Result<QuadratureResult, LateralError> {
    req.validate()?;
    let (p, q) = (req.p, req.q);
    let ratio = p as f64 / q as f64;
    let angle = lift_towards(req.theta, req.t) * ratio;
    let ray = Ray::from_angle(Complex64::new(0.0, 0.0), angle);
    let points = rotated_singular_points(&req.datum, req.z, q);
    check_clearance(&ray, &points, &req.datum, req.clearance)?;

    let kernel = EcalleKernel::new(EcalleKernelSpec::new(q as f64 / p as f64)?)?;
    let tpq = req.t.powf(ratio);
    let roots: Vec<Complex64> = (0..q)
        .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / q as f64))
        .collect();
    let z = req.z;
    let failure: Cell<Option<LateralError>> = Cell::new(None);
    let f = |s: Complex64| {
        let c = match kernel.derivative(0, s / tpq) {
            Ok(c) => c.value,
            Err(e) => {
                failure.set(Some(e.into()));
                return Complex64::new(f64::NAN, 0.0);
            }
        };
        if c.norm() == 0.0 {
            return c;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for w in &roots {
            match req.datum.evaluate_continued(z + w * s, z) {
                Ok(v) => acc += v,
                Err(e) => {
                    failure.set(Some(e.into()));
                    return Complex64::new(f64::NAN, 0.0);
                }
            }
        }
        acc * c
    };
    let start = 6.0 * tpq.norm();
    let res = integrate_ray(f, &ray, TailBound::Probe { start }, &req.settings);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(res?.scaled(1.0 / (q as f64 * tpq)))
}

/// Dispatch: the Gaussian form for `(1, 2)`, the Ecalle-kernel form otherwise.
pub fn lateral_sum(req: &LateralSumRequest) -> Result<QuadratureResult, LateralError> {
    if (req.p, req.q) == (1, 2) {
        lateral_sum_heat(req)
    } else {
        lateral_sum_general(req)
    }
}
