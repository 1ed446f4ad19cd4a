//! Special functions: reciprocal Gamma, the Ecalle kernel `C_α`, the heat
//! kernel and derivatives of the Gaussian `e^{−s²/4t}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Ray, RayDirection};
use crate::quadrature::{integrate_ray, QuadratureError, QuadratureSettings, TailBound};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel series did not converge within {terms} terms (|τ| = {modulus})")]
    NoConvergence { terms: usize, modulus: f64 },
    #[error("point is off the ray line by {distance:.3e}")]
    OffRay { distance: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidSpec(String),
    #[error("kernel quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Integrality tolerance for detecting the poles of Γ.
const POLE_TOL: f64 = 1e-12;

/// `ln Γ(z)` for `Re z ≥ 1/2` (Lanczos, g = 7).
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    for (i, p) in LANCZOS.iter().enumerate().skip(1) {
        a += p / (z + i as f64);
    }
    let w = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * w.ln() - w + a.ln()
}

/// `sin(πz)` with the real part reduced modulo 2 first.
fn sin_pi(z: Complex64) -> Complex64 {
    let x = z.re - 2.0 * (z.re / 2.0).round();
    (Complex64::new(x, z.im) * PI).sin()
}

/// `ln Γ(x)` for real `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = π / (sin(πx) Γ(1−x)), positive for 0 < x < 1/2
        (PI / (PI * x).sin()).ln() - ln_gamma_right(Complex64::new(1.0 - x, 0.0)).re
    } else {
        ln_gamma_right(Complex64::new(x, 0.0)).re
    }
}

/// `1/Γ(z)`, exactly zero at the non-positive integers.
pub fn reciprocal_gamma(z: Complex64) -> Complex64 {
    if z.im.abs() <= POLE_TOL && z.re < 0.5 {
        let n = z.re.round();
        if n <= 0.0 && (z.re - n).abs() <= POLE_TOL * n.abs().max(1.0) {
            return Complex64::new(0.0, 0.0);
        }
    }
    if z.re >= 0.5 {
        (-ln_gamma_right(z)).exp()
    } else {
        sin_pi(z) / PI * ln_gamma_right(1.0 - z).exp()
    }
}

/// `(4πt)^{−1/2}·e^{−s²/(4t)}` on the principal branch.
pub fn heat_kernel(t: Complex64, s: Complex64) -> Complex64 {
    let e = -s * s / (4.0 * t);
    if e.re < -745.0 {
        return Complex64::new(0.0, 0.0);
    }
    e.exp() / (4.0 * PI * t).sqrt()
}

/// Parameters for a Gaussian derivative `d^m/ds^m e^{−s²/4t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDerivativeRequest {
    pub order: usize,
    pub point: Complex64,
    pub time: Complex64,
}

/// `d^m/ds^m e^{−s²/4t}` via the Hermite recurrence.
pub fn gaussian_derivative(req: GaussianDerivativeRequest) -> Complex64 {
    let all = gaussian_derivatives(req.order, req.point, req.time);
    all[req.order]
}

/// All derivatives `d^j/ds^j e^{−s²/4t}` for `j = 0..=max_order`.
///
/// With `x = s/(2√t)` we have `d^j/ds^j e^{−s²/4t} = (−1)^j (2√t)^{−j} H_j(x) e^{−x²}`;
/// the exponential and the power of `2√t` are combined in log form.
pub fn gaussian_derivatives(max_order: usize, s: Complex64, t: Complex64) -> Vec<Complex64> {
    let two_sqrt_t = 2.0 * t.sqrt();
    let x = s / two_sqrt_t;
    let log_gauss = -s * s / (4.0 * t);
    let log_step = two_sqrt_t.ln();
    let mut out = Vec::with_capacity(max_order + 1);
    let (mut h_prev, mut h) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    for j in 0..=max_order {
        if j > 0 {
            let next = 2.0 * x * h - 2.0 * (j - 1) as f64 * h_prev;
            h_prev = h;
            h = next;
        }
        let e = log_gauss - log_step * j as f64;
        let scale = if e.re < -745.0 {
            Complex64::new(0.0, 0.0)
        } else {
            e.exp()
        };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.push(h * scale * sign);
    }
    out
}

/// Directional Heaviside `H_θ(s − pivot)`: 1 on the positive half of the line
/// through `pivot` with direction `θ`, 0 on the negative half.
pub fn heaviside_ray(
    direction: RayDirection,
    s: Complex64,
    pivot: Complex64,
) -> Result<f64, KernelError> {
    let local = (s - pivot) * direction.unit().conj();
    if local.im.abs() > 1e-9 * local.norm().max(1.0) {
        return Err(KernelError::OffRay {
            distance: local.im.abs(),
        });
    }
    Ok(if local.re > 0.0 { 1.0 } else { 0.0 })
}

/// Parameters of the Ecalle kernel `C_α(τ) = Σ (−τ)ⁿ / (n!·Γ(1−(n+1)/α))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcalleKernelSpec {
    pub alpha: f64,
    pub series_tol: f64,
    pub max_terms: usize,
}

impl EcalleKernelSpec {
    pub fn new(alpha: f64) -> Result<Self, KernelError> {
        Self {
            alpha,
            series_tol: 1e-15,
            max_terms: 400,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, KernelError> {
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(KernelError::InvalidSpec(format!(
                "alpha must exceed 1, got {}",
                self.alpha
            )));
        }
        if self.max_terms < 1 {
            return Err(KernelError::InvalidSpec(
                "max_terms must be at least 1".into(),
            ));
        }
        if !(self.series_tol > 0.0) {
            return Err(KernelError::InvalidSpec(
                "series_tol must be positive".into(),
            ));
        }
        Ok(self)
    }

    /// Radius beyond which the plain power series is not used.
    pub fn working_radius(&self) -> f64 {
        if self.alpha == 2.0 {
            30.0
        } else {
            20.0
        }
    }
}

/// Power-series evaluation of `C_α(τ)`. Fails outside the working radius or
/// when the tail bound is not met within `max_terms`.
pub fn ecalle_kernel(spec: &EcalleKernelSpec, tau: Complex64) -> Result<Complex64, KernelError> {
    let spec = spec.validated()?;
    if tau.norm() > spec.working_radius() {
        return Err(KernelError::NoConvergence {
            terms: 0,
            modulus: tau.norm(),
        });
    }
    EcalleKernel::new(spec)?.series(0, tau).map(|v| v.value)
}

/// A kernel value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub error: f64,
}

/// Ecalle kernel with precomputed reciprocal-Gamma coefficients.
///
/// Two routes are available. The power series is exact in structure but
/// suffers cancellation for large `|τ|`. The integral route inserts the
/// Hankel representation of `1/Γ` into the series and substitutes `w = v^α`,
/// giving `C_α(τ) = α/(2πi)∫ e^{v^α − τv} dv`. [`EcalleKernel::derivative`] picks the route
/// with the smaller rounding estimate.
#[derive(Debug, Clone)]
pub struct EcalleKernel {
    spec: EcalleKernelSpec,
    /// 1/Γ(1 − (j+1)/α)
    coeffs: Vec<f64>,
    /// ln of the bound Γ((j+1)/α)/π ≥ |1/Γ(1 − (j+1)/α)|
    log_bounds: Vec<f64>,
    quad: QuadratureSettings,
}

const DERIVATIVE_HEADROOM: usize = 160;

impl EcalleKernel {
    pub fn new(spec: EcalleKernelSpec) -> Result<Self, KernelError> {
        let spec = spec.validated()?;
        let n = spec.max_terms + DERIVATIVE_HEADROOM + 2;
        let coeffs = (0..n)
            .map(|j| reciprocal_gamma(Complex64::new(1.0 - (j + 1) as f64 / spec.alpha, 0.0)).re)
            .collect();
        let log_bounds = (0..n)
            .map(|j| ln_gamma((j + 1) as f64 / spec.alpha) - PI.ln())
            .collect();
        Ok(Self {
            spec,
            coeffs,
            log_bounds,
            quad: QuadratureSettings {
                rel_tol: 2e-13,
                abs_tol: 1e-16,
                max_radius: 400.0,
                max_refinements: 2000,
            },
        })
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn spec(&self) -> &EcalleKernelSpec {
        &self.spec
    }

    /// `C_α(τ)`
    pub fn evaluate(&self, tau: Complex64) -> Result<Complex64, KernelError> {
        self.derivative(0, tau).map(|v| v.value)
    }

    /// `d^m/dτ^m C_α(τ)` by the better-conditioned route.
    pub fn derivative(&self, m: usize, tau: Complex64) -> Result<KernelValue, KernelError> {
        if self.spec.alpha == 2.0 {
            // C₂(τ) = e^{−τ²/4}/√π
            let g = gaussian_derivatives(m, tau, Complex64::new(1.0, 0.0))[m];
            return Ok(KernelValue {
                value: g / PI.sqrt(),
                error: 4.0 * f64::EPSILON * g.norm() * (m as f64 + 1.0),
            });
        }
        let series = if tau.norm() <= self.spec.working_radius() {
            self.series(m, tau).ok()
        } else {
            None
        };
        if let Some(s) = series {
            if s.error <= self.spec.series_tol.max(1e-14 * s.value.norm()) {
                return Ok(s);
            }
        }
        let integral_loss = self.integral_rounding(m, tau);
        match series {
            Some(s) if s.error <= integral_loss => Ok(s),
            _ => self.integral(m, tau),
        }
    }

    fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or_else(|| {
            reciprocal_gamma(Complex64::new(1.0 - (j + 1) as f64 / self.spec.alpha, 0.0)).re
        })
    }

    fn log_bound(&self, j: usize) -> f64 {
        self.log_bounds
            .get(j)
            .copied()
            .unwrap_or_else(|| ln_gamma((j + 1) as f64 / self.spec.alpha) - PI.ln())
    }

    /// Series route: `(−1)^m Σₙ (−τ)ⁿ/n! · 1/Γ(1−(n+m+1)/α)`. The error field
    /// holds the tail bound plus a rounding estimate from the largest term.
    pub fn series(&self, m: usize, tau: Complex64) -> Result<KernelValue, KernelError> {
        let r = tau.norm();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut power = Complex64::new(1.0, 0.0); // (−τ)ⁿ/n!
        let mut max_term = 0.0f64;
        let mut prev_ratio = f64::INFINITY;
        for n in 0..self.spec.max_terms {
            if n > 0 {
                power *= -tau / n as f64;
            }
            let term = power * self.coeff(n + m);
            max_term = max_term.max(term.norm());
            sum += term;
            if r == 0.0 {
                return Ok(KernelValue {
                    value: sum * sign(m),
                    error: 0.0,
                });
            }
            // bound on Σ_{j>n} |τ|^j/j! · Γ((j+m+1)/α)/π, geometric past the peak
            let log_w_next = (n + 1) as f64 * r.ln() - ln_gamma((n + 2) as f64);
            let log_next = log_w_next + self.log_bound(n + 1 + m);
            let ratio = (r / (n + 2) as f64)
                * (self.log_bound(n + 2 + m) - self.log_bound(n + 1 + m)).exp();
            if ratio < 1.0 && ratio <= prev_ratio {
                let tail = log_next.exp() / (1.0 - ratio);
                if tail <= self.spec.series_tol {
                    let rounding = 4.0 * f64::EPSILON * max_term * ((n + 1) as f64).sqrt();
                    return Ok(KernelValue {
                        value: sum * sign(m),
                        error: tail + rounding,
                    });
                }
            }
            prev_ratio = ratio;
        }
        Err(KernelError::NoConvergence {
            terms: self.spec.max_terms,
            modulus: r,
        })
    }

    /// Vertex and ray angle of the Hankel contour: the vertex sits at the real
    /// saddle of `v^α − τv`, the rays leave at `±φ` into the valleys of `e^{v^α}`.
    fn contour(&self, tau: Complex64) -> (f64, f64) {
        let a = self.spec.alpha;
        let v0 = (tau.re.max(0.0) / a).powf(1.0 / (a - 1.0));
        let phi = (PI / 2.0).min(0.9 * 3.0 * PI / (2.0 * a));
        (v0, phi)
    }

    fn integral_rounding(&self, m: usize, tau: Complex64) -> f64 {
        let a = self.spec.alpha;
        let (v0, phi) = self.contour(tau);
        // peak of |(−v)^m e^{v^α − τv}| along the contour
        let mut peak = f64::NEG_INFINITY;
        let mut rho: f64 = 0.0;
        while rho < 60.0 {
            for sgn in [1.0, -1.0] {
                let v = v0 + Complex64::from_polar(rho, sgn * phi);
                let e = v.powf(a) - tau * v;
                let lm = if m > 0 {
                    m as f64 * v.norm().max(1e-300).ln()
                } else {
                    0.0
                };
                peak = peak.max(e.re + lm);
            }
            rho = if rho == 0.0 { 1e-3 } else { rho * 1.05 };
        }
        (a / PI) * peak.exp() * 16.0 * f64::EPSILON
    }

    /// Integral route: `C^{(m)}(τ) = α/(2πi)·∫ (−v)^m e^{v^α − τv} dv` over a
    /// Hankel-type contour from `∞e^{−iφ}` through the real saddle to `∞e^{iφ}`.
    pub fn integral(&self, m: usize, tau: Complex64) -> Result<KernelValue, KernelError> {
        let a = self.spec.alpha;
        let (v0, phi) = self.contour(tau);
        let (d1, d2) = (
            Complex64::from_polar(1.0, phi),
            Complex64::from_polar(1.0, -phi),
        );
        let sgn = sign(m);
        let g = |v: Complex64| {
            let e = (v.powf(a) - tau * v).exp();
            if m > 0 {
                e * v.powu(m as u32) * sgn
            } else {
                e
            }
        };
        let f = |s: Complex64| {
            let rho = s.re;
            d1 * g(v0 + d1 * rho) - d2 * g(v0 + d2 * rho)
        };
        let ray = Ray::from_angle(Complex64::new(0.0, 0.0), 0.0);
        // absolute target tied to the integrand's peak, which sets the attainable accuracy
        let floor = self.integral_rounding(m, tau);
        let quad = self.quad.with_abs_tol(self.quad.abs_tol.max(64.0 * floor));
        let start = 4.0 + v0;
        let res = integrate_ray(f, &ray, TailBound::Probe { start }, &quad)?;
        let pref = Complex64::new(0.0, -a / (2.0 * PI)); // α/(2πi)
        Ok(KernelValue {
            value: res.value * pref,
            error: res.error_estimate * a / (2.0 * PI) + floor,
        })
    }
}

fn sign(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
