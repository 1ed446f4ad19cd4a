//! Stokes-line jumps: the delta-derivative series for poles and Laurent
//! tails, variation integrals for branch points, and the numeric lateral
//! difference they are checked against.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::data::{
    CaseClass, CauchyDatum, DataError, LaurentCoefficients, VariationDensity, VariationOptions,
};
use crate::geometry::{principal_arg, Ray, RayDirection};
use crate::kernels::{gaussian_derivatives, ln_gamma, EcalleKernel, EcalleKernelSpec, KernelError};
use crate::lateral::{
    lateral_sum, LateralError, LateralSumRequest, DEFAULT_CLEARANCE, DEFAULT_RADIUS,
    DEFAULT_SECTOR_MARGIN,
};
use crate::quadrature::{
    integrate_ray_singular_radial, integrate_two_sided, QuadratureError, QuadratureResult,
    QuadratureSettings, TailBound,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JumpError {
    #[error(
        "jump series not below tolerance {target:.1e} within {terms} terms (tail bound {tail:.3e})"
    )]
    NoConvergence {
        terms: usize,
        tail: f64,
        target: f64,
    },
    #[error("invalid jump request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Lateral(#[from] LateralError),
}

/// `−2πi Σₙ aₙ(−1)^{n−1}/(n−1)! · δ^{(n−1)}` centred at `z0 − z`.
#[derive(Debug, Clone)]
pub struct DeltaSeries {
    pub coeffs: LaurentCoefficients,
    pub center: Complex64,
}

impl DeltaSeries {
    /// Coefficient of `δ^{(n−1)}`, `n ≥ 1`.
    pub fn coefficient(&self, n: usize) -> Complex64 {
        let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        Complex64::new(0.0, -2.0 * PI) * self.coeffs.get(n) * sign * (-ln_gamma(n as f64)).exp()
    }
}

#[derive(Debug, Clone)]
pub enum JumpRepresentation {
    Zero,
    DeltaSeries(DeltaSeries),
    VariationIntegral(VariationDensity),
}

pub fn jump_representation(
    datum: &CauchyDatum,
    z: Complex64,
) -> Result<JumpRepresentation, JumpError> {
    jump_representation_with(datum, z, &VariationOptions::default())
}

pub fn jump_representation_with(
    datum: &CauchyDatum,
    z: Complex64,
    opts: &VariationOptions,
) -> Result<JumpRepresentation, JumpError> {
    if let Some(z0) = datum.singular_point() {
        if z == z0 {
            return Err(DataError::AtSingularity { z0 }.into());
        }
    }
    if datum.is_multivalued() {
        return Ok(JumpRepresentation::VariationIntegral(
            datum.variation_with(z, opts)?,
        ));
    }
    match (datum.laurent_coefficients(), datum.singular_point()) {
        (Some(coeffs), Some(z0)) => Ok(JumpRepresentation::DeltaSeries(DeltaSeries {
            coeffs,
            center: z0 - z,
        })),
        _ => Ok(JumpRepresentation::Zero),
    }
}

/// The kernel the hyperfunction is paired with.
#[derive(Debug, Clone)]
pub enum JumpKernel {
    /// `(4πt)^{−1/2} e^{−s²/4t}`
    Heat { t: Complex64 },
    /// `(q t^{p/q})^{−1} C_{q/p}(s/t^{p/q})`
    Ecalle {
        p: u32,
        q: u32,
        t: Complex64,
        kernel: Box<EcalleKernel>,
    },
}

impl JumpKernel {
    pub fn heat(t: Complex64) -> Self {
        Self::Heat { t }
    }

    pub fn ecalle(p: u32, q: u32, t: Complex64) -> Result<Self, JumpError> {
        if p < 1 || q <= p {
            return Err(JumpError::Invalid(format!(
                "need 1 ≤ p < q, got ({p}, {q})"
            )));
        }
        let kernel = EcalleKernel::new(EcalleKernelSpec::new(q as f64 / p as f64)?)?;
        Ok(Self::Ecalle {
            p,
            q,
            t,
            kernel: Box::new(kernel),
        })
    }

    /// Heat kernel for `(1, 2)`, Ecalle kernel otherwise.
    pub fn for_equation(p: u32, q: u32, t: Complex64) -> Result<Self, JumpError> {
        if (p, q) == (1, 2) {
            Ok(Self::heat(t))
        } else {
            Self::ecalle(p, q, t)
        }
    }

    pub fn time(&self) -> Complex64 {
        match self {
            Self::Heat { t } | Self::Ecalle { t, .. } => *t,
        }
    }

    /// `(p, q)` of the equation the kernel belongs to.
    pub fn orders(&self) -> (u32, u32) {
        match self {
            Self::Heat { .. } => (1, 2),
            Self::Ecalle { p, q, .. } => (*p, *q),
        }
    }

    /// `K^{(j)}(s)` for `j = 0..=max_order`.
    pub fn derivatives(&self, max_order: usize, s: Complex64) -> Result<Vec<Complex64>, JumpError> {
        match self {
            Self::Heat { t } => {
                let pref = 1.0 / (4.0 * PI * t).sqrt();
                Ok(gaussian_derivatives(max_order, s, *t)
                    .into_iter()
                    .map(|g| g * pref)
                    .collect())
            }
            Self::Ecalle { p, q, t, kernel } => {
                let tpq = t.powf(*p as f64 / *q as f64);
                let pref = 1.0 / (*q as f64 * tpq);
                let mut scale = pref;
                let mut out = Vec::with_capacity(max_order + 1);
                for j in 0..=max_order {
                    out.push(kernel.derivative(j, s / tpq)?.value * scale);
                    scale /= tpq;
                }
                Ok(out)
            }
        }
    }

    /// `K^{(j)}(s)`
    pub fn derivative(&self, j: usize, s: Complex64) -> Result<Complex64, JumpError> {
        match self {
            Self::Heat { .. } => Ok(self.derivatives(j, s)?[j]),
            Self::Ecalle { p, q, t, kernel } => {
                let tpq = t.powf(*p as f64 / *q as f64);
                let v = kernel.derivative(j, s / tpq)?.value;
                Ok(v / (*q as f64 * tpq) / tpq.powu(j as u32))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMethod {
    Zero,
    DeltaSeries,
    VariationCase1,
    VariationCase2,
    VariationCase3,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct JumpResult {
    pub value: Complex64,
    pub truncation_terms: usize,
    /// Bound on the omitted series terms (absolute).
    pub tail_bound: f64,
    /// Quadrature error estimate (variation integrals only).
    pub error_estimate: f64,
    pub method: JumpMethod,
}

impl JumpResult {
    fn zero() -> Self {
        Self {
            value: Complex64::new(0.0, 0.0),
            truncation_terms: 0,
            tail_bound: 0.0,
            error_estimate: 0.0,
            method: JumpMethod::Zero,
        }
    }
}

pub const DELTA_FIT_ORDERS: usize = 12;
pub const DELTA_MIN_TERMS: usize = 8;
pub const DELTA_MAX_TERMS: usize = 400;

/// Fit `|K^{(j)}(c)| ≤ Ã·B̃^j·(j!)^{1/2}` on the first derivatives.
fn fit_derivative_bound(derivs: &[Complex64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = derivs
        .iter()
        .enumerate()
        .filter(|(_, d)| d.norm() > 0.0)
        .map(|(j, d)| (j as f64, d.norm().ln() - 0.5 * ln_gamma(j as f64 + 1.0)))
        .collect();
    if pts.len() < 2 {
        let m = pts.first().map_or(0.0, |p| p.1.exp());
        return (m, 1.0);
    }
    let m = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let excess = pts
        .iter()
        .map(|p| p.1 - intercept - slope * p.0)
        .fold(0.0f64, f64::max);
    ((intercept + excess).exp(), slope.exp())
}

/// Delta-series jump `−2πi Σ aₙ K^{(n−1)}(z0−z)/(n−1)!` with the fitted
/// tail bound. `series_tol` is relative to the partial sum.
pub fn jump_delta_series(
    rep: &DeltaSeries,
    kernel: &JumpKernel,
    series_tol: f64,
) -> Result<JumpResult, JumpError> {
    jump_delta_series_with(rep, kernel, series_tol, DELTA_MAX_TERMS)
}

pub fn jump_delta_series_with(
    rep: &DeltaSeries,
    kernel: &JumpKernel,
    series_tol: f64,
    max_terms: usize,
) -> Result<JumpResult, JumpError> {
    let finite = rep.coeffs.finite_len();
    let n_max = finite.unwrap_or(max_terms).min(max_terms).max(1);
    let derivs = kernel.derivatives(n_max.max(DELTA_FIT_ORDERS), rep.center)?;
    let (a_fit, b_fit) = fit_derivative_bound(&derivs[..DELTA_FIT_ORDERS]);
    let rho = (1.0 + rep.coeffs.radius_bound()) / 2.0;
    let minus_2pi_i = Complex64::new(0.0, -2.0 * PI);

    // bound on |term n| once |aₙ| ≤ C ρⁿ: 2π·C ρⁿ·Ã B̃^{n−1} ((n−1)!)^{−1/2}
    let term_bound = |c: f64, n: usize| {
        let lg = ln_gamma(n as f64);
        2.0 * PI * c * (n as f64 * rho.ln() + (n - 1) as f64 * b_fit.ln() - 0.5 * lg).exp() * a_fit
    };
    let tail_from = |c: f64, n0: usize| {
        let mut total = 0.0;
        let mut n = n0;
        loop {
            let b = term_bound(c, n);
            total += b;
            if n > n0 + 20 && b <= 1e-3 * total.max(1e-300) || n > n0 + 10_000 {
                break total;
            }
            n += 1;
        }
    };

    let mut sum = Complex64::new(0.0, 0.0);
    let mut c_fit = 0.0f64;
    for n in 1..=n_max {
        let an = rep.coeffs.get(n);
        c_fit = c_fit.max(an.norm() / rho.powi(n as i32));
        let term = minus_2pi_i * an * derivs[n - 1] * (-ln_gamma(n as f64)).exp();
        sum += term;
        if finite.is_some() {
            continue;
        }
        if n >= DELTA_MIN_TERMS && term_bound(c_fit, n + 1) <= series_tol * sum.norm() {
            let tail = tail_from(c_fit, n + 1);
            if tail <= series_tol * sum.norm().max(1e-300) {
                return Ok(JumpResult {
                    value: sum,
                    truncation_terms: n,
                    tail_bound: tail,
                    error_estimate: 0.0,
                    method: JumpMethod::DeltaSeries,
                });
            }
        }
    }
    if finite.is_some_and(|len| len <= max_terms) {
        return Ok(JumpResult {
            value: sum,
            truncation_terms: n_max,
            tail_bound: 0.0,
            error_estimate: 0.0,
            method: JumpMethod::DeltaSeries,
        });
    }
    let tail = tail_from(c_fit, n_max + 1);
    Err(JumpError::NoConvergence {
        terms: n_max,
        tail,
        target: series_tol,
    })
}

/// One variation term `−(−1)^k ∫ F̃(s) K^{(k)}(s) ds` along the ray from `start`.
fn variation_term_integral(
    rep: &VariationDensity,
    term_index: usize,
    kernel: &JumpKernel,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, JumpError> {
    let term = rep.terms[term_index];
    let k = term.derivative_order;
    let ray = Ray::new(rep.start, rep.direction);
    let failure = std::cell::Cell::new(None);
    let f = |x: f64, s: Complex64| {
        let dens = rep.transferred_at(&term, x);
        match kernel.derivative(k, s) {
            Ok(kd) => dens * kd,
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(f64::NAN, 0.0)
            }
        }
    };
    let start = 4.0 * kernel_scale(kernel) + 1.0;
    let tail = TailBound::Probe { start };
    let res = integrate_ray_singular_radial(f, &ray, tail, term.exponent, settings);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
    Ok(res?.scaled(Complex64::new(sign, 0.0)))
}

fn kernel_scale(kernel: &JumpKernel) -> f64 {
    match kernel {
        JumpKernel::Heat { t } => 2.0 * t.norm().sqrt(),
        JumpKernel::Ecalle { p, q, t, .. } => t.norm().powf(*p as f64 / *q as f64),
    }
}

/// Variation-integral jump, cases 1–3. In case 3 term `n` is integrated to
/// `series_tol/2^{n+2}` and the omitted terms are covered by the density's
/// tail bound.
pub fn jump_variation(
    rep: &VariationDensity,
    kernel: &JumpKernel,
    settings: &QuadratureSettings,
    series_tol: f64,
) -> Result<JumpResult, JumpError> {
    let method = match rep.case_class {
        CaseClass::One => JumpMethod::VariationCase1,
        CaseClass::Two => JumpMethod::VariationCase2,
        CaseClass::Three => JumpMethod::VariationCase3,
    };
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for (i, _) in rep.terms.iter().enumerate() {
        let s = if rep.case_class == CaseClass::Three {
            let n = i + 1;
            settings.with_abs_tol(settings.abs_tol.min(series_tol / 2f64.powi(n as i32 + 2)))
        } else {
            *settings
        };
        let r = variation_term_integral(rep, i, kernel, &s)?;
        value += r.value;
        error += r.error_estimate;
    }
    Ok(JumpResult {
        value,
        truncation_terms: rep.terms.len(),
        tail_bound: rep.tail_bound,
        error_estimate: error,
        method,
    })
}

/// Options shared by the closed-form and numeric jump evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOptions {
    pub p: u32,
    pub q: u32,
    pub eps_dir: f64,
    pub series_tol: f64,
    pub variation: VariationOptions,
    pub settings: QuadratureSettings,
    pub sector_margin: f64,
    pub radius: f64,
    pub clearance: f64,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            p: 1,
            q: 2,
            eps_dir: 0.3,
            series_tol: 1e-12,
            variation: VariationOptions::default(),
            settings: QuadratureSettings::default(),
            sector_margin: DEFAULT_SECTOR_MARGIN,
            radius: DEFAULT_RADIUS,
            clearance: DEFAULT_CLEARANCE,
        }
    }
}

/// Closed-form jump of `datum` at `(t, z)` through its representation.
pub fn jump_closed_form(
    datum: &CauchyDatum,
    z: Complex64,
    t: Complex64,
    opts: &JumpOptions,
) -> Result<JumpResult, JumpError> {
    let rep = jump_representation_with(datum, z, &opts.variation)?;
    let kernel = JumpKernel::for_equation(opts.p, opts.q, t)?;
    match &rep {
        JumpRepresentation::Zero => Ok(JumpResult::zero()),
        JumpRepresentation::DeltaSeries(d) => jump_delta_series(d, &kernel, opts.series_tol),
        JumpRepresentation::VariationIntegral(v) => {
            jump_variation(v, &kernel, &opts.settings, opts.series_tol)
        }
    }
}

/// Stokes direction for the jump seen from `z`: `q·arg(z0 − z)/p`.
pub fn stokes_direction_at(datum: &CauchyDatum, z: Complex64, p: u32, q: u32) -> RayDirection {
    match datum.singular_point() {
        Some(z0) => RayDirection::new(q as f64 * principal_arg(z0 - z) / p as f64),
        None => RayDirection::new(0.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericJump {
    pub value: Complex64,
    pub error_estimate: f64,
    pub upper: QuadratureResult,
    pub lower: QuadratureResult,
    pub direction: RayDirection,
}

/// `u^{δ+ε}(t, z) − u^{δ−ε}(t, z)` with `δ = q·arg(z0 − z)/p`.
pub fn jump_numeric(
    datum: &CauchyDatum,
    z: Complex64,
    t: Complex64,
    opts: &JumpOptions,
) -> Result<NumericJump, JumpError> {
    if !(opts.eps_dir > 0.0) {
        return Err(JumpError::Invalid(format!(
            "eps_dir must be positive, got {}",
            opts.eps_dir
        )));
    }
    let delta = stokes_direction_at(datum, z, opts.p, opts.q);
    let request = |theta: f64| LateralSumRequest {
        datum: datum.clone(),
        theta,
        t,
        z,
        p: opts.p,
        q: opts.q,
        settings: opts.settings,
        sector_margin: opts.sector_margin,
        radius: opts.radius,
        clearance: opts.clearance,
    };
    let upper = lateral_sum(&request(delta.angle() + opts.eps_dir))?;
    let lower = lateral_sum(&request(delta.angle() - opts.eps_dir))?;
    Ok(NumericJump {
        value: upper.value - lower.value,
        error_estimate: upper.error_estimate + lower.error_estimate,
        upper,
        lower,
        direction: delta,
    })
}

/// What a hyperfunction is paired through.
pub enum Pairing<'a> {
    Representation(&'a JumpRepresentation),
    /// Defining function `g` on the two-sided contour from `vertex`.
    Defining {
        g: &'a dyn Fn(Complex64) -> Complex64,
        vertex: Complex64,
        minus: RayDirection,
        plus: RayDirection,
    },
}

/// Pair a hyperfunction with `kernel`: distributional pairing for delta
/// series, the variation integral for densities, and the two-sided contour
/// integral for a defining function.
pub fn pair_hyperfunction(
    pairing: Pairing<'_>,
    kernel: &JumpKernel,
    settings: &QuadratureSettings,
    series_tol: f64,
) -> Result<Complex64, JumpError> {
    match pairing {
        Pairing::Representation(JumpRepresentation::Zero) => Ok(Complex64::new(0.0, 0.0)),
        Pairing::Representation(JumpRepresentation::DeltaSeries(d)) => {
            Ok(jump_delta_series(d, kernel, series_tol)?.value)
        }
        Pairing::Representation(JumpRepresentation::VariationIntegral(v)) => {
            Ok(jump_variation(v, kernel, settings, series_tol)?.value)
        }
        Pairing::Defining {
            g,
            vertex,
            minus,
            plus,
        } => {
            let failure = std::cell::Cell::new(None);
            let f = |s: Complex64| match kernel.derivative(0, s) {
                Ok(k) => g(s) * k,
                Err(e) => {
                    failure.set(Some(e));
                    Complex64::new(f64::NAN, 0.0)
                }
            };
            let start = 4.0 * kernel_scale(kernel) + vertex.norm() + 1.0;
            let r =
                integrate_two_sided(f, vertex, minus, plus, TailBound::Probe { start }, settings);
            if let Some(e) = failure.take() {
                return Err(e);
            }
            Ok(r?.value)
        }
    }
}
