//! Adaptive quadrature of complex integrands along half-lines.
//!
//! The ray `{origin + r·e^{iθ} : r ≥ 0}` is truncated at a radius chosen from
//! a caller-supplied decay model ([`TailBound`]) and then verified by probing
//! the integrand beyond it. The truncated interval is split into panels that
//! are refined globally (largest error first) with a 7/15-point
//! Gauss–Kronrod pair. An integrable algebraic singularity at the origin is
//! removed by the substitution `r = r₁·v^{1/(1+μ)}` on the first panel.

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Ray, RayDirection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("integrand is not finite at r = {radius}")]
    NonFinite { radius: f64 },
    #[error("refinement budget exhausted: error {error:.3e} above target {target:.3e}")]
    NoConvergence { error: f64, target: f64 },
    #[error("tail bound not met at maximum radius {max_radius} (|f| = {magnitude:.3e})")]
    TruncationFailure { max_radius: f64, magnitude: f64 },
    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(String),
    #[error("{branch} ray: {source}")]
    Branch {
        branch: Branch,
        #[source]
        source: Box<QuadratureError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Minus => f.write_str("minus"),
            Branch::Plus => f.write_str("plus"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest admissible truncation radius of the semi-infinite ray.
    pub max_radius: f64,
    /// Maximum number of panel bisections.
    pub max_refinements: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_radius: 400.0,
            max_refinements: 4000,
        }
    }
}

impl QuadratureSettings {
    pub fn new(
        rel_tol: f64,
        abs_tol: f64,
        max_radius: f64,
        max_refinements: usize,
    ) -> Result<Self, QuadratureError> {
        let s = Self {
            rel_tol,
            abs_tol,
            max_radius,
            max_refinements,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        let bad = |m: &str| Err(QuadratureError::InvalidSettings(m.to_string()));
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol must be positive");
        }
        if !(self.max_radius > 0.0) {
            return bad("max_radius must be positive");
        }
        if self.max_refinements < 1 {
            return bad("max_refinements must be at least 1");
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// Decay model for `|f(origin + r·e^{iθ})|` used to pick the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// `|f| ≤ scale·e^{−rate·r²}`
    Gaussian { scale: f64, rate: f64 },
    /// `|f| ≤ scale·e^{−rate·r^power}`
    StretchedExp { scale: f64, rate: f64, power: f64 },
    /// Fixed truncation radius.
    Radius(f64),
    /// No analytic model: grow the radius from `start` until the probes pass.
    Probe { start: f64 },
}

impl TailBound {
    fn initial_radius(&self, abs_tol: f64) -> f64 {
        let solve = |scale: f64, rate: f64, power: f64| {
            let l = (10.0 * scale.max(1e-300) / abs_tol).ln().max(1.0);
            (l / rate).powf(1.0 / power)
        };
        match *self {
            TailBound::Gaussian { scale, rate } => solve(scale, rate, 2.0),
            TailBound::StretchedExp { scale, rate, power } => solve(scale, rate, power),
            TailBound::Radius(r) => r,
            TailBound::Probe { start } => start,
        }
    }

    fn analytic_tail(&self, radius: f64) -> Option<f64> {
        let tail = |scale: f64, rate: f64, power: f64| {
            scale * (-rate * radius.powf(power)).exp()
                / (rate * power * radius.powf(power - 1.0)).max(1e-300)
        };
        match *self {
            TailBound::Gaussian { scale, rate } => Some(tail(scale, rate, 2.0)),
            TailBound::StretchedExp { scale, rate, power } if power >= 1.0 => {
                Some(tail(scale, rate, power))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub truncation_radius_used: f64,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            evaluations: 0,
            truncation_radius_used: 0.0,
        }
    }

    /// `self·a + other·b` with error estimates combined.
    pub fn combine(&self, a: Complex64, other: &QuadratureResult, b: Complex64) -> Self {
        Self {
            value: self.value * a + other.value * b,
            error_estimate: self.error_estimate * a.norm() + other.error_estimate * b.norm(),
            evaluations: self.evaluations + other.evaluations,
            truncation_radius_used: self
                .truncation_radius_used
                .max(other.truncation_radius_used),
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            value: self.value * a,
            error_estimate: self.error_estimate * a.norm(),
            ..*self
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
enum PanelMap {
    Linear,
    /// r = scale·v^power
    Power {
        scale: f64,
        power: f64,
    },
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    map: PanelMap,
    value: Complex64,
    error: f64,
    mass: f64,
}

struct Integrator<'f, F> {
    f: &'f F,
    evaluations: usize,
}

impl<F: Fn(f64) -> Complex64> Integrator<'_, F> {
    fn eval(&mut self, map: PanelMap, v: f64) -> Result<Complex64, QuadratureError> {
        let (r, jac) = match map {
            PanelMap::Linear => (v, 1.0),
            PanelMap::Power { scale, power } => {
                (scale * v.powf(power), scale * power * v.powf(power - 1.0))
            }
        };
        self.evaluations += 1;
        let y = (self.f)(r) * jac;
        if y.re.is_finite() && y.im.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { radius: r })
        }
    }

    fn kronrod(&mut self, a: f64, b: f64, map: PanelMap) -> Result<Panel, QuadratureError> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = self.eval(map, c)?;
        let mut kron = fc * WGK[7];
        let mut gauss = fc * WG[3];
        let mut abs_sum = fc.norm() * WGK[7];
        let mut vals = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 7];
        for (j, x) in XGK.iter().take(7).enumerate() {
            let f1 = self.eval(map, c - h * x)?;
            let f2 = self.eval(map, c + h * x)?;
            vals[j] = (f1, f2);
            kron += (f1 + f2) * WGK[j];
            abs_sum += (f1.norm() + f2.norm()) * WGK[j];
            if j % 2 == 1 {
                gauss += (f1 + f2) * WG[j / 2];
            }
        }
        let mean = kron * 0.5;
        let mut asc = (fc - mean).norm() * WGK[7];
        for (j, (f1, f2)) in vals.iter().enumerate() {
            asc += ((f1 - mean).norm() + (f2 - mean).norm()) * WGK[j];
        }
        let value = kron * h;
        let resasc = asc * h.abs();
        let resabs = abs_sum * h.abs();
        let diff = ((kron - gauss) * h).norm();
        let mut error = diff;
        if resasc != 0.0 && diff != 0.0 {
            error = resasc * (200.0 * diff / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            error = error.max(50.0 * f64::EPSILON * resabs);
        }
        Ok(Panel {
            a,
            b,
            map,
            value,
            error,
            mass: resabs,
        })
    }
}

/// Integrate `f(s)·ds` along `ray`, with `s = origin + r·e^{iθ}`.
pub fn integrate_ray<F>(
    f: F,
    ray: &Ray,
    tail: TailBound,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(Complex64) -> Complex64,
{
    let unit = ray.unit();
    integrate_ray_impl(|r| f(ray.origin + unit * r), ray, tail, None, settings)
}

/// As [`integrate_ray`], for integrands behaving like `r^exponent` at the
/// origin with `exponent > −1`.
pub fn integrate_ray_singular<F>(
    f: F,
    ray: &Ray,
    tail: TailBound,
    exponent: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(exponent > -1.0) {
        return Err(QuadratureError::InvalidSettings(format!(
            "endpoint exponent {exponent} is not integrable"
        )));
    }
    let unit = ray.unit();
    integrate_ray_impl(
        |r| f(ray.origin + unit * r),
        ray,
        tail,
        Some(exponent),
        settings,
    )
}

/// As [`integrate_ray_singular`], with the integrand given the distance `r`
/// from the origin alongside the point, so factors like `r^exponent` keep full
/// precision next to the origin.
pub fn integrate_ray_singular_radial<F>(
    f: F,
    ray: &Ray,
    tail: TailBound,
    exponent: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64, Complex64) -> Complex64,
{
    if !(exponent > -1.0) {
        return Err(QuadratureError::InvalidSettings(format!(
            "endpoint exponent {exponent} is not integrable"
        )));
    }
    let unit = ray.unit();
    integrate_ray_impl(
        |r| f(r, ray.origin + unit * r),
        ray,
        tail,
        Some(exponent),
        settings,
    )
}

/// The two-sided contour `−∫(vertex + e^{iθ₋}ℝ₊) + ∫(vertex + e^{iθ₊}ℝ₊)`.
pub fn integrate_two_sided<F>(
    f: F,
    vertex: Complex64,
    minus: RayDirection,
    plus: RayDirection,
    tail: TailBound,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(Complex64) -> Complex64,
{
    let tag = |branch: Branch| {
        move |e: QuadratureError| QuadratureError::Branch {
            branch,
            source: Box::new(e),
        }
    };
    let lower =
        integrate_ray(&f, &Ray::new(vertex, minus), tail, settings).map_err(tag(Branch::Minus))?;
    let upper =
        integrate_ray(&f, &Ray::new(vertex, plus), tail, settings).map_err(tag(Branch::Plus))?;
    let one = Complex64::new(1.0, 0.0);
    Ok(upper.combine(one, &lower, -one))
}

fn integrate_ray_impl<F>(
    f: F,
    ray: &Ray,
    tail: TailBound,
    exponent: Option<f64>,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    settings.validate()?;
    let unit = ray.unit();
    let g = |r: f64| f(r) * unit;

    // truncation radius, verified by probing beyond it
    let mut radius = tail
        .initial_radius(settings.abs_tol)
        .min(settings.max_radius);
    if !(radius > 0.0) {
        radius = 1.0;
    }
    let mut probe_evals = 0usize;
    let probe_max = loop {
        let mut m = 0.0f64;
        for k in [1.0, 1.1, 1.25, 1.5, 2.0] {
            probe_evals += 1;
            let y = g(radius * k);
            let a = y.norm();
            // a non-finite probe far out means the decay model is wrong
            m = m.max(if a.is_finite() { a } else { f64::INFINITY });
        }
        if m <= settings.abs_tol {
            break m;
        }
        if radius >= settings.max_radius {
            return Err(QuadratureError::TruncationFailure {
                max_radius: settings.max_radius,
                magnitude: m,
            });
        }
        radius = (radius * 1.25).min(settings.max_radius);
    };
    let tail_error = tail.analytic_tail(radius).unwrap_or(0.0).max(probe_max);

    let mut it = Integrator {
        f: &g,
        evaluations: probe_evals,
    };
    let mut panels: Vec<Panel> = Vec::new();
    let mut start = 0.0;
    if let Some(mu) = exponent {
        let split = radius / 16.0;
        let map = PanelMap::Power {
            scale: split,
            power: 1.0 / (1.0 + mu),
        };
        panels.push(it.kronrod(0.0, 1.0, map)?);
        start = split;
    }
    let n_init = 8;
    let h = (radius - start) / n_init as f64;
    for k in 0..n_init {
        let a = start + h * k as f64;
        let b = if k + 1 == n_init { radius } else { a + h };
        panels.push(it.kronrod(a, b, PanelMap::Linear)?);
    }

    let mut refinements = 0usize;
    loop {
        let value: Complex64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        // cancellation: nothing below twice the rounding floor is reachable
        let mass: f64 = panels.iter().map(|p| p.mass).sum();
        let target = settings
            .abs_tol
            .max(settings.rel_tol * value.norm())
            .max(100.0 * f64::EPSILON * mass);
        if error <= target {
            return Ok(QuadratureResult {
                value,
                error_estimate: error + tail_error,
                evaluations: it.evaluations,
                truncation_radius_used: radius,
            });
        }
        // worst refinable panel
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let mid = 0.5 * (p.a + p.b);
                mid > p.a && mid < p.b && (p.b - p.a) > 4.0 * f64::EPSILON * p.b.abs().max(1e-300)
            })
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Err(QuadratureError::NoConvergence { error, target });
        };
        if refinements >= settings.max_refinements {
            return Err(QuadratureError::NoConvergence { error, target });
        }
        refinements += 1;
        let p = panels.swap_remove(i);
        let mid = 0.5 * (p.a + p.b);
        let left = it.kronrod(p.a, mid, p.map)?;
        let right = it.kronrod(mid, p.b, p.map)?;
        panels.push(left);
        panels.push(right);
        // deterministic summation order regardless of refinement history
        panels.sort_by(|x, y| {
            map_rank(x.map)
                .cmp(&map_rank(y.map))
                .then(x.a.total_cmp(&y.a))
        });
    }
}

fn map_rank(m: PanelMap) -> u8 {
    match m {
        PanelMap::Power { .. } => 0,
        PanelMap::Linear => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gauss_tail() -> TailBound {
        TailBound::Gaussian {
            scale: 1.0,
            rate: 0.5,
        }
    }

    #[test]
    fn gaussian_half_integral() {
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let r = integrate_ray(|s| (-s * s).exp(), &ray, gauss_tail(), &Default::default()).unwrap();
        assert!((r.value - c(PI.sqrt() / 2.0, 0.0)).norm() < 1e-13);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn heat_kernel_half_mass() {
        let t = 0.25;
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let f = |s: Complex64| (-s * s / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        let r = integrate_ray(
            f,
            &ray,
            TailBound::Gaussian {
                scale: 1.0,
                rate: 1.0 / (4.0 * t),
            },
            &Default::default(),
        )
        .unwrap();
        assert!((r.value - c(0.5, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn rotated_ray_matches_antiderivative() {
        // antiderivative −e^{−s²}/2: the contour value from 0 to ∞e^{iπ/6} is 1/2
        let ray = Ray::from_angle(c(0.0, 0.0), PI / 6.0);
        let tail = TailBound::Gaussian {
            scale: 1.0,
            rate: 0.5 * (PI / 3.0).cos(),
        };
        let r = integrate_ray(|s| s * (-s * s).exp(), &ray, tail, &Default::default()).unwrap();
        assert!((r.value - c(0.5, 0.0)).norm() < 1e-13, "{}", r.value);
    }

    #[test]
    fn algebraic_endpoint() {
        // ∫₀^∞ r^{−0.9} e^{−r} dr = Γ(0.1)
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let r = integrate_ray_singular(
            |s| s.powf(-0.9) * (-s).exp(),
            &ray,
            TailBound::StretchedExp {
                scale: 1.0,
                rate: 1.0,
                power: 1.0,
            },
            -0.9,
            &Default::default(),
        )
        .unwrap();
        let gamma_01 = 9.513_507_698_668_732;
        assert!((r.value.re - gamma_01).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn non_finite_is_reported() {
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let err = integrate_ray(
            |s| {
                if (s.re - 0.5).abs() < 0.3 {
                    c(f64::NAN, 0.0)
                } else {
                    (-s * s).exp()
                }
            },
            &ray,
            gauss_tail(),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn truncation_failure_for_slow_decay() {
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let settings = QuadratureSettings {
            max_radius: 50.0,
            ..Default::default()
        };
        let err = integrate_ray(
            |s| 1.0 / (s + 1.0),
            &ray,
            TailBound::Probe { start: 1.0 },
            &settings,
        )
        .unwrap_err();
        assert!(matches!(err, QuadratureError::TruncationFailure { .. }));
    }

    #[test]
    fn refinement_budget() {
        let ray = Ray::from_angle(c(0.0, 0.0), 0.0);
        let settings = QuadratureSettings {
            max_refinements: 1,
            ..Default::default()
        };
        let err = integrate_ray(
            |s| (100.0 * s).sin() * (-s * s).exp(),
            &ray,
            gauss_tail(),
            &settings,
        )
        .unwrap_err();
        assert!(matches!(err, QuadratureError::NoConvergence { .. }));
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(QuadratureSettings::new(0.0, 1e-10, 10.0, 10).is_err());
        assert!(QuadratureSettings::new(1e-10, 1e-10, -1.0, 10).is_err());
        assert!(QuadratureSettings::new(1e-10, 1e-10, 1.0, 0).is_err());
    }

    #[test]
    fn two_sided_symmetric_gaussian_vanishes() {
        let r = integrate_two_sided(
            |s| (-s * s).exp(),
            c(0.0, 0.0),
            RayDirection::new(-0.1),
            RayDirection::new(0.1),
            TailBound::Gaussian {
                scale: 1.0,
                rate: 0.5,
            },
            &Default::default(),
        )
        .unwrap();
        assert!(r.value.norm() < 1e-13);
    }

    #[test]
    fn two_sided_picks_up_residue() {
        // wedge between ∓0.2 encloses s = 1 clockwise: −2πi·Res = −2πi·e^{−1}
        let r = integrate_two_sided(
            |s| (-s * s).exp() / (s - 1.0),
            c(0.0, 0.0),
            RayDirection::new(-0.2),
            RayDirection::new(0.2),
            TailBound::Gaussian {
                scale: 1.0,
                rate: 0.5,
            },
            &Default::default(),
        )
        .unwrap();
        let expected = c(0.0, -2.0 * PI) * (-1.0f64).exp();
        assert!((r.value - expected).norm() < 1e-12, "{}", r.value);
    }

    #[test]
    fn two_sided_entire_integrand_vanishes() {
        let r = integrate_two_sided(
            |s| s * s * (-s * s).exp(),
            c(0.0, 0.0),
            RayDirection::new(0.3),
            RayDirection::new(0.5),
            TailBound::Gaussian {
                scale: 1.0,
                rate: 0.25,
            },
            &Default::default(),
        )
        .unwrap();
        assert!(r.value.norm() < 1e-13);
    }
}
