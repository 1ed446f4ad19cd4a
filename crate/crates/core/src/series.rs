//! Formal power series in `t`: the formal solution of `∂t^p u = ∂z^q u`,
//! Gevrey classification, deceleration and the acceleration integral.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::data::{CauchyDatum, DataError, GrowthCertificate};
use crate::geometry::{Ray, RayDirection};
use crate::kernels::{ln_gamma, EcalleKernel, EcalleKernelSpec, KernelError};
use crate::quadrature::{
    integrate_ray, QuadratureError, QuadratureResult, QuadratureSettings, TailBound,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series prefix has {len} terms, at least {needed} required")]
    TooShort { len: usize, needed: usize },
    #[error("|t| = {modulus} is outside 0.9 × the estimated radius {radius}")]
    OutsideDisk { modulus: f64, radius: f64 },
    #[error("growth condition not certified: {0}")]
    GrowthViolation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries {
    pub coefficients: Vec<Complex64>,
    pub gevrey_order: Option<f64>,
}

impl FormalSeries {
    pub fn new(coefficients: Vec<Complex64>) -> Self {
        Self {
            coefficients,
            gevrey_order: None,
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

fn check_pq(p: u32, q: u32) -> Result<(), SeriesError> {
    if p < 1 || q <= p {
        return Err(SeriesError::InvalidParameter(format!(
            "need 1 ≤ p < q, got p = {p}, q = {q}"
        )));
    }
    Ok(())
}

/// Coefficients `u₀..u_{N−1}` of the formal solution of `∂t^p u = ∂z^q u`,
/// `u(0,·) = φ`, vanishing lower `t`-derivatives: `u_{pk} = φ^{(qk)}(z)/(pk)!`.
pub fn formal_solution(
    datum: &CauchyDatum,
    z: Complex64,
    n_terms: usize,
    p: u32,
    q: u32,
) -> Result<FormalSeries, SeriesError> {
    check_pq(p, q)?;
    let (p, q) = (p as usize, q as usize);
    let k_max = n_terms.saturating_sub(1) / p;
    let taylor = datum.taylor_coefficients(z, q * k_max + 1)?;
    let mut out = vec![Complex64::new(0.0, 0.0); n_terms];
    for k in 0..=k_max {
        if p * k >= n_terms {
            break;
        }
        // φ^{(qk)}/(pk)! = T_{qk}·(qk)!/(pk)!
        let log_ratio = ln_gamma((q * k) as f64 + 1.0) - ln_gamma((p * k) as f64 + 1.0);
        out[p * k] = taylor[q * k] * log_ratio.exp();
    }
    Ok(FormalSeries {
        coefficients: out,
        gevrey_order: Some(q as f64 / p as f64 - 1.0),
    })
}

/// Gevrey fit `|cₙ| ≤ A·Bⁿ·(n!)^s` on the stored prefix.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GevreyFit {
    pub holds: bool,
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
}

pub const GEVREY_SLACK: f64 = 2.0;
pub const GEVREY_PREFIX: usize = 32;

/// Least-squares fit of `ln|cₙ| − s·ln n!` against `n·ln B + ln A`.
pub fn classify_gevrey(series: &FormalSeries, s: f64) -> Result<GevreyFit, SeriesError> {
    classify_gevrey_with(series, s, GEVREY_SLACK, GEVREY_PREFIX)
}

pub fn classify_gevrey_with(
    series: &FormalSeries,
    s: f64,
    slack: f64,
    prefix: usize,
) -> Result<GevreyFit, SeriesError> {
    let pts: Vec<(f64, f64)> = series
        .coefficients
        .iter()
        .take(prefix)
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(n, c)| (n as f64, c.norm().ln() - s * ln_gamma(n as f64 + 1.0)))
        .collect();
    if pts.len() < 8 {
        return Err(SeriesError::TooShort {
            len: pts.len(),
            needed: 8,
        });
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = pts.iter().map(|(x, y)| y - (intercept + slope * x));
    let max_residual = residuals.clone().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_excess = residuals.fold(f64::NEG_INFINITY, f64::max);
    Ok(GevreyFit {
        holds: max_residual <= slack,
        // A absorbs the largest positive residual so the bound holds on the prefix
        a: (intercept + max_excess.max(0.0)).exp(),
        b: slope.exp(),
        max_residual,
    })
}

/// `cₙ ↦ cₙ·Γ(1+n)/Γ(1+n(k+1)/k)`.
pub fn decelerate(series: &FormalSeries, k: f64) -> Result<FormalSeries, SeriesError> {
    if !(k > 0.0) {
        return Err(SeriesError::InvalidParameter(format!(
            "k must be positive, got {k}"
        )));
    }
    let r = (k + 1.0) / k;
    let coefficients = series
        .coefficients
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let n = n as f64;
            c * (ln_gamma(1.0 + n) - ln_gamma(1.0 + n * r)).exp()
        })
        .collect();
    Ok(FormalSeries {
        coefficients,
        gevrey_order: series.gevrey_order.map(|s| s - 1.0 / k),
    })
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, j| acc * BigInt::from(j))
}

/// Exact deceleration for integer `k`: `cₙ·n!/(n(k+1)/k)!`. Every index with
/// `n(k+1)/k ∉ ℕ` must carry a zero coefficient.
pub fn decelerate_exact(coeffs: &[BigRational], k: u64) -> Result<Vec<BigRational>, SeriesError> {
    if k == 0 {
        return Err(SeriesError::InvalidParameter("k must be positive".into()));
    }
    coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let n = n as u64;
            if c.is_zero() {
                return Ok(BigRational::zero());
            }
            if !(n * (k + 1)).is_multiple_of(k) {
                return Err(SeriesError::InvalidParameter(format!(
                    "index {n}: n(k+1)/k is not an integer"
                )));
            }
            let m = n * (k + 1) / k;
            Ok(c * BigRational::new(factorial(n), factorial(m)))
        })
        .collect()
}

/// Exact formal solution for `Σ aⱼ/(z−z0)ʲ` with rational data on the real
/// line: `u_{pk} = φ^{(qk)}(z)/(pk)!`.
pub fn formal_solution_exact_laurent(
    a: &[BigRational],
    z0: &BigRational,
    z: &BigRational,
    n_terms: usize,
    p: u32,
    q: u32,
) -> Result<Vec<BigRational>, SeriesError> {
    check_pq(p, q)?;
    let d = z - z0;
    if d.is_zero() {
        return Err(DataError::AtSingularity {
            z0: Complex64::new(0.0, 0.0),
        }
        .into());
    }
    let u = d.recip();
    let (p, q) = (p as u64, q as u64);
    let mut out = vec![BigRational::zero(); n_terms];
    for k in 0.. {
        let idx = (p * k) as usize;
        if idx >= n_terms {
            break;
        }
        let m = q * k;
        // φ^{(m)}(z) = (−1)^m Σⱼ aⱼ (j+m−1)!/(j−1)! u^{j+m}
        let mut deriv = BigRational::zero();
        for (i, aj) in a.iter().enumerate() {
            let j = i as u64 + 1;
            let falling = BigRational::new(factorial(j + m - 1), factorial(j - 1));
            deriv += aj * falling * pow(&u, j + m);
        }
        if m % 2 == 1 {
            deriv = -deriv;
        }
        out[idx] = deriv / BigRational::from_integer(factorial(p * k));
    }
    Ok(out)
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// Estimated radius of convergence from the prefix: ratio test when the
/// upper half has no zeros, root test otherwise.
pub fn estimate_radius(series: &FormalSeries) -> f64 {
    let c = &series.coefficients;
    let n = c.len();
    let upper = &c[n / 2..];
    if upper.len() >= 2 && upper.iter().all(|x| x.norm() > 0.0) {
        upper
            .windows(2)
            .map(|w| w[0].norm() / w[1].norm())
            .fold(f64::INFINITY, f64::min)
    } else {
        (n / 2..n)
            .filter(|&j| j > 0 && c[j].norm() > 0.0)
            .map(|j| c[j].norm().powf(-1.0 / j as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Partial sum inside 0.9 × the estimated radius, with a geometric tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskSum {
    pub value: Complex64,
    pub tail_bound: f64,
}

pub fn sum_series_disk(series: &FormalSeries, t: Complex64) -> Result<Complex64, SeriesError> {
    sum_series_disk_with_bound(series, t).map(|s| s.value)
}

pub fn sum_series_disk_with_bound(
    series: &FormalSeries,
    t: Complex64,
) -> Result<DiskSum, SeriesError> {
    if series.is_empty() {
        return Err(SeriesError::TooShort { len: 0, needed: 1 });
    }
    let radius = estimate_radius(series);
    if !(t.norm() < 0.9 * radius) {
        return Err(SeriesError::OutsideDisk {
            modulus: t.norm(),
            radius,
        });
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut tn = Complex64::new(1.0, 0.0);
    for c in &series.coefficients {
        value += c * tn;
        tn *= t;
    }
    let rho = t.norm() / radius;
    let last = series.coefficients.last().map_or(0.0, |c| c.norm());
    let tail_bound = last * t.norm().powi(series.len() as i32) / (1.0 - rho);
    Ok(DiskSum { value, tail_bound })
}

/// The acceleration integral for the pair `k̃ = 1`, `k̄ = k/(k+1)`:
/// `t^{−k̄} ∫_{arg σ = k̄θ} g(σ^{1/k̄}) C_{1/k̄}(σ/t^{k̄}) dσ`.
///
/// `g` is evaluated at `|σ|^{1/k̄}·e^{iθ}`, so the lift of `θ` is respected.
pub fn accelerate<G>(
    g: G,
    certificate: Option<GrowthCertificate>,
    k: f64,
    theta: f64,
    t: Complex64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult, SeriesError>
where
    G: Fn(Complex64) -> Complex64,
{
    match certificate {
        None => {
            return Err(SeriesError::GrowthViolation(
                "no growth certificate supplied for g".into(),
            ))
        }
        Some(c) if !(c.order <= k) => {
            return Err(SeriesError::GrowthViolation(format!(
                "g has exponential order {} above k = {k}",
                c.order
            )))
        }
        _ => {}
    }
    if !(k > 0.0) || t.norm() == 0.0 {
        return Err(SeriesError::InvalidParameter(format!(
            "need k > 0 and t ≠ 0 (k = {k}, t = {t})"
        )));
    }
    let kbar = k / (k + 1.0);
    let alpha = 1.0 / kbar;
    let kernel = EcalleKernel::new(EcalleKernelSpec::new(alpha)?)?;
    let tk = t.powf(kbar);
    let dir = Complex64::from_polar(1.0, theta);
    let failure = std::cell::Cell::new(None);
    let f = |sigma: Complex64| {
        let r = sigma.norm();
        match kernel.derivative(0, sigma / tk) {
            Ok(c) => g(dir * r.powf(alpha)) * c.value,
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(f64::NAN, 0.0)
            }
        }
    };
    let ray = Ray::from_angle(Complex64::new(0.0, 0.0), kbar * theta);
    let start = 6.0 * tk.norm();
    let res = integrate_ray(f, &ray, TailBound::Probe { start }, settings);
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok(res?.scaled(1.0 / tk))
}

/// The direction of `g`'s singularity for `1/(z − z0)` data: `q·arg(z0)/p`.
pub fn borel_singular_direction(z0: Complex64, p: u32, q: u32) -> RayDirection {
    RayDirection::new(q as f64 * z0.arg() / p as f64)
}
