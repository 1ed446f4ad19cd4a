//! Cauchy data with one singular point `z0`: evaluation with branch
//! tracking, Taylor coefficients, Stokes directions and the variation
//! (monodromy) densities used by the branch-point jump formulas.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{normalize_angle, principal_arg, RayDirection};
use crate::kernels::ln_gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("evaluation at the singular point {z0}")]
    AtSingularity { z0: Complex64 },
    #[error(
        "point {point} is outside the convergence domain of the Laurent tail (radius {radius})"
    )]
    OutsideDomain { point: Complex64, radius: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid datum: {0}")]
    Invalid(String),
}

type Generator = Arc<dyn Fn(usize) -> Complex64 + Send + Sync>;

/// Coefficients `a₁, a₂, …` of `Σ aₙ/(z−z0)ⁿ`.
#[derive(Clone)]
pub enum LaurentCoefficients {
    /// `a₁..a_N`
    Finite(Vec<Complex64>),
    /// `aₙ = first·ratioⁿ⁻¹`
    Geometric { first: Complex64, ratio: Complex64 },
    /// `aₙ = f(n)` with a certified bound `lim sup |aₙ|^{1/n} ≤ radius_bound`.
    Generator { f: Generator, radius_bound: f64 },
}

impl fmt::Debug for LaurentCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(a) => f.debug_tuple("Finite").field(a).finish(),
            Self::Geometric { first, ratio } => f
                .debug_struct("Geometric")
                .field("first", first)
                .field("ratio", ratio)
                .finish(),
            Self::Generator { radius_bound, .. } => f
                .debug_struct("Generator")
                .field("radius_bound", radius_bound)
                .finish_non_exhaustive(),
        }
    }
}

impl LaurentCoefficients {
    /// `aₙ` for `n ≥ 1`.
    pub fn get(&self, n: usize) -> Complex64 {
        match self {
            Self::Finite(a) => a.get(n.wrapping_sub(1)).copied().unwrap_or_default(),
            Self::Geometric { first, ratio } => first * ratio.powu(n as u32 - 1),
            Self::Generator { f, .. } => f(n),
        }
    }

    /// Number of nonzero coefficients when finite.
    pub fn finite_len(&self) -> Option<usize> {
        match self {
            Self::Finite(a) => Some(a.len()),
            _ => None,
        }
    }

    /// Upper bound on `lim sup |aₙ|^{1/n}`: every singularity of the tail lies
    /// in the closed disk of this radius around `z0`.
    pub fn radius_bound(&self) -> f64 {
        match self {
            Self::Finite(_) => 0.0,
            Self::Geometric { ratio, .. } => ratio.norm(),
            Self::Generator { radius_bound, .. } => *radius_bound,
        }
    }
}

/// Prefix length used for the empirical root test on generated coefficients.
const ROOT_TEST_PREFIX: usize = 64;

#[derive(Debug, Clone)]
pub enum CauchyDatum {
    /// `Σ cⱼ zʲ`, ascending.
    Polynomial(Vec<Complex64>),
    LaurentTail {
        coeffs: LaurentCoefficients,
        z0: Complex64,
        entire: Vec<Complex64>,
    },
    /// `ln(z − z0)`
    LogBranch { z0: Complex64 },
    /// `(z − z0)^λ`, `λ ∉ ℤ`
    PowerBranch { lambda: f64, z0: Complex64 },
    /// `exp((z − z0)^{−λ})`, `λ > 0` irrational, or a positive integer
    /// (single-valued, handled as a Laurent tail).
    EssentialPower { lambda: f64, z0: Complex64 },
}

/// Sign of the half-turn phase in the power-branch variation: `(−1)^λ = e^{±iπλ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchPhase {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationOptions {
    pub series_tol: f64,
    pub phase: BranchPhase,
    pub max_terms: usize,
}

impl Default for VariationOptions {
    fn default() -> Self {
        Self {
            series_tol: 1e-12,
            phase: BranchPhase::Positive,
            max_terms: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CaseClass {
    One,
    Two,
    Three,
}

/// `coefficient·(z0 − z − s)^exponent`, whose `derivative_order`-th derivative
/// in `s` is one summand of the variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationTerm {
    pub coefficient: Complex64,
    pub exponent: f64,
    pub derivative_order: usize,
}

/// The variation `varF_z` on the ray `{z0 − z + x·e^{iθ_z} : x > 0}`,
/// stored as its transferred densities.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationDensity {
    pub case_class: CaseClass,
    pub start: Complex64,
    pub direction: RayDirection,
    /// `arg(z0 − z − s)` on the ray, i.e. `arg(z − z0)` shifted by the branch phase.
    pub phase_angle: f64,
    pub terms: Vec<VariationTerm>,
    /// Bound on the magnitude of the omitted terms (case 3).
    pub tail_bound: f64,
}

impl VariationDensity {
    /// Signed coordinate of `s` along the ray, measured from `start`.
    pub fn coordinate(&self, s: Complex64) -> f64 {
        ((s - self.start) * self.direction.unit().conj()).re
    }

    fn term_value(&self, term: &VariationTerm, x: f64, order: usize) -> Complex64 {
        if x <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // d^j/ds^j v^μ = (−1)^j μ(μ−1)…(μ−j+1) v^{μ−j}, v = z0 − z − s
        let mut falling = 1.0;
        for i in 0..order {
            falling *= -(term.exponent - i as f64);
        }
        let e = term.exponent - order as f64;
        term.coefficient * falling * Complex64::from_polar(x.powf(e), e * self.phase_angle)
    }

    /// Transferred density `varF̃` of one term at coordinate `x`.
    pub fn transferred_at(&self, term: &VariationTerm, x: f64) -> Complex64 {
        self.term_value(term, x, 0)
    }

    /// `varF_z` at coordinate `x` (zero for `x ≤ 0`).
    pub fn density_at(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| self.term_value(t, x, t.derivative_order))
            .sum()
    }

    /// `varF_z(s)` for `s` on the ray line.
    pub fn density(&self, s: Complex64) -> Complex64 {
        self.density_at(self.coordinate(s))
    }
}

/// Exponential growth certificate of a datum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GrowthCertificate {
    pub order: f64,
    pub admissible: bool,
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-12 * x.abs().max(1.0)
}

/// True when `x` is within `1e−12` (relative) of a fraction with denominator ≤ 1000.
pub fn is_small_rational(x: f64) -> bool {
    let tol = 1e-12 * x.abs().max(1.0);
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > 1000.0 {
            return false;
        }
        if (x - h2 / k2).abs() <= tol {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-300 {
            return true;
        }
        r = 1.0 / frac;
    }
    false
}

fn poly_eval(c: &[Complex64], w: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * w + a)
}

/// Taylor coefficients of a polynomial re-expanded around `w`.
fn poly_taylor(c: &[Complex64], w: Complex64, count: usize) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = c.to_vec();
    let mut out = Vec::with_capacity(count);
    // repeated synthetic division by (x − w)
    for _ in 0..count {
        if work.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut quotient = vec![Complex64::new(0.0, 0.0); work.len().saturating_sub(1)];
        for j in (0..work.len()).rev() {
            acc = acc * w + work[j];
            if j > 0 {
                quotient[j - 1] = acc;
            }
        }
        out.push(acc);
        work = quotient;
    }
    out
}

impl CauchyDatum {
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self, DataError> {
        if coeffs.is_empty() {
            return Err(DataError::Invalid(
                "polynomial needs at least one coefficient".into(),
            ));
        }
        Ok(Self::Polynomial(coeffs))
    }

    pub fn laurent(
        coeffs: LaurentCoefficients,
        z0: Complex64,
        entire: Vec<Complex64>,
    ) -> Result<Self, DataError> {
        check_z0(z0)?;
        match &coeffs {
            LaurentCoefficients::Finite(a) if a.is_empty() => {
                return Err(DataError::Invalid(
                    "Laurent tail needs at least one coefficient".into(),
                ))
            }
            LaurentCoefficients::Geometric { ratio, .. } if !(ratio.norm() < 1.0) => {
                return Err(DataError::Invalid(format!(
                    "lim sup |a_n|^(1/n) = |ratio| = {} must be below 1",
                    ratio.norm()
                )))
            }
            LaurentCoefficients::Generator { f, radius_bound } => {
                if !(*radius_bound >= 0.0 && *radius_bound < 1.0) {
                    return Err(DataError::Invalid(format!(
                        "certified radius bound {radius_bound} must lie in [0, 1)"
                    )));
                }
                // root test on the upper half of the prefix
                let worst = (ROOT_TEST_PREFIX / 2..=ROOT_TEST_PREFIX)
                    .map(|n| f(n).norm().powf(1.0 / n as f64))
                    .fold(0.0f64, f64::max);
                if !(worst < 1.0) {
                    return Err(DataError::Invalid(format!(
                        "coefficient prefix has |a_n|^(1/n) up to {worst}, not below 1"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self::LaurentTail { coeffs, z0, entire })
    }

    pub fn log_branch(z0: Complex64) -> Result<Self, DataError> {
        check_z0(z0)?;
        Ok(Self::LogBranch { z0 })
    }

    pub fn power_branch(lambda: f64, z0: Complex64) -> Result<Self, DataError> {
        check_z0(z0)?;
        if !lambda.is_finite() || is_integer(lambda) {
            return Err(DataError::Invalid(format!(
                "power exponent λ = {lambda} must not be an integer"
            )));
        }
        Ok(Self::PowerBranch { lambda, z0 })
    }

    pub fn essential_power(lambda: f64, z0: Complex64) -> Result<Self, DataError> {
        check_z0(z0)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(DataError::Invalid(format!(
                "essential exponent λ = {lambda} must be positive"
            )));
        }
        if !is_integer(lambda) && is_small_rational(lambda) {
            return Err(DataError::Invalid(format!(
                "essential exponent λ = {lambda} is rational; only irrational or integer λ are supported"
            )));
        }
        Ok(Self::EssentialPower { lambda, z0 })
    }

    pub fn singular_point(&self) -> Option<Complex64> {
        match self {
            Self::Polynomial(_) => None,
            Self::LaurentTail { z0, .. }
            | Self::LogBranch { z0 }
            | Self::PowerBranch { z0, .. }
            | Self::EssentialPower { z0, .. } => Some(*z0),
        }
    }

    /// Radius of the closed disk around `z0` holding every singularity.
    pub fn singular_radius(&self) -> f64 {
        match self {
            Self::LaurentTail { coeffs, .. } => coeffs.radius_bound(),
            _ => 0.0,
        }
    }

    pub fn is_multivalued(&self) -> bool {
        match self {
            Self::LogBranch { .. } | Self::PowerBranch { .. } => true,
            Self::EssentialPower { lambda, .. } => !is_integer(*lambda),
            _ => false,
        }
    }

    /// Laurent coefficients of a single-valued datum, if it has a singular part.
    pub fn laurent_coefficients(&self) -> Option<LaurentCoefficients> {
        match self {
            Self::LaurentTail { coeffs, .. } => Some(coeffs.clone()),
            Self::EssentialPower { lambda, .. } if is_integer(*lambda) => {
                let k = lambda.round() as usize;
                // exp(u^k) = Σ u^{kj}/j!
                let f: Generator = Arc::new(move |n: usize| {
                    if n.is_multiple_of(k) {
                        Complex64::new((-ln_gamma((n / k) as f64 + 1.0)).exp(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                Some(LaurentCoefficients::Generator {
                    f,
                    radius_bound: 0.0,
                })
            }
            _ => None,
        }
    }

    /// `ln(w − z0)` on `sheet`: principal argument plus `2π·sheet`.
    fn log_on_sheet(z0: Complex64, w: Complex64, sheet: i64) -> Complex64 {
        let d = w - z0;
        Complex64::new(d.norm().ln(), principal_arg(d) + 2.0 * PI * sheet as f64)
    }

    fn value_from_log(&self, log: Complex64) -> Complex64 {
        match self {
            Self::LogBranch { .. } => log,
            Self::PowerBranch { lambda, .. } => (log * *lambda).exp(),
            Self::EssentialPower { lambda, .. } => (-log * *lambda).exp().exp(),
            _ => unreachable!("single-valued datum has no logarithm"),
        }
    }

    /// `φ(w)` on the given sheet around `z0` (ignored for single-valued data).
    pub fn evaluate(&self, w: Complex64, sheet: i64) -> Result<Complex64, DataError> {
        match self {
            Self::Polynomial(c) => Ok(poly_eval(c, w)),
            Self::LaurentTail { coeffs, z0, entire } => {
                self.at_regular(w)?;
                Ok(laurent_eval(coeffs, *z0, w)? + poly_eval(entire, w))
            }
            Self::EssentialPower { lambda, z0 } if is_integer(*lambda) => {
                self.at_regular(w)?;
                Ok((w - z0).powi(-(lambda.round() as i32)).exp())
            }
            Self::LogBranch { z0 }
            | Self::PowerBranch { z0, .. }
            | Self::EssentialPower { z0, .. } => {
                self.at_regular(w)?;
                Ok(self.value_from_log(Self::log_on_sheet(*z0, w, sheet)))
            }
        }
    }

    /// `φ(w)` with `arg(w − z0)` prescribed (single-valued data ignore it).
    pub fn evaluate_on_arg(&self, w: Complex64, arg: f64) -> Result<Complex64, DataError> {
        if !self.is_multivalued() {
            return self.evaluate(w, 0);
        }
        let z0 = self.singular_point().expect("multivalued datum has z0");
        self.at_regular(w)?;
        let log = Complex64::new((w - z0).norm().ln(), arg);
        Ok(self.value_from_log(log))
    }

    /// `φ(w)` continued along the segment from `base` (principal at `base`).
    ///
    /// The continuation is analytic off the cut `{z0 + r(z0 − base) : r ≥ 0}`.
    pub fn evaluate_continued(
        &self,
        w: Complex64,
        base: Complex64,
    ) -> Result<Complex64, DataError> {
        if !self.is_multivalued() {
            return self.evaluate(w, 0);
        }
        let z0 = self.singular_point().expect("multivalued datum has z0");
        self.at_regular(w)?;
        self.at_regular(base)?;
        self.evaluate_on_arg(w, continued_arg(z0, w, base))
    }

    fn at_regular(&self, w: Complex64) -> Result<(), DataError> {
        match self.singular_point() {
            Some(z0) if w == z0 => Err(DataError::AtSingularity { z0 }),
            _ => Ok(()),
        }
    }

    /// `(δ, θ_z)`: the Stokes direction `q·arg(z0)/p` and `arg(z0 − z)`.
    pub fn stokes_direction(
        &self,
        z: Complex64,
        p: u32,
        q: u32,
    ) -> Option<(RayDirection, RayDirection)> {
        let z0 = self.singular_point()?;
        let delta = RayDirection::new(q as f64 * principal_arg(z0) / p as f64);
        Some((delta, RayDirection::of(z0 - z)))
    }

    pub fn growth_certificate(&self, p: u32, q: u32) -> GrowthCertificate {
        // polynomial growth at infinity for every catalog variant
        let order = 0.0;
        GrowthCertificate {
            order,
            admissible: q > p && order <= q as f64 / (q - p) as f64,
        }
    }

    /// Taylor coefficients `φ^{(m)}(w)/m!`, `m < count`, of the branch that is
    /// principal at `w`.
    pub fn taylor_coefficients(
        &self,
        w: Complex64,
        count: usize,
    ) -> Result<Vec<Complex64>, DataError> {
        self.at_regular(w)?;
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Self::Polynomial(c) => Ok(poly_taylor(c, w, count)),
            Self::LaurentTail { coeffs, z0, entire } => {
                let mut t = laurent_taylor(coeffs, *z0, w, count)?;
                for (a, b) in t.iter_mut().zip(poly_taylor(entire, w, count)) {
                    *a += b;
                }
                Ok(t)
            }
            Self::LogBranch { z0 } => {
                let u = 1.0 / (w - z0);
                let mut out = vec![self.evaluate(w, 0)?];
                let mut um = Complex64::new(1.0, 0.0);
                for m in 1..count {
                    um *= u;
                    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                    out.push(um * sign / m as f64);
                }
                out.truncate(count);
                Ok(out)
            }
            Self::PowerBranch { lambda, z0 } => {
                let u = 1.0 / (w - z0);
                let mut cur = self.evaluate(w, 0)?;
                let mut out = Vec::with_capacity(count);
                for m in 0..count {
                    if m > 0 {
                        cur *= u * (lambda - (m - 1) as f64) / m as f64;
                    }
                    out.push(cur);
                }
                Ok(out)
            }
            Self::EssentialPower { lambda, z0 } => {
                // h = exp(g), g(w+ε) = Σ g_k ε^k with g = (w − z0)^{−λ}
                let u = 1.0 / (w - z0);
                let mut g = Vec::with_capacity(count);
                let mut cur = if is_integer(*lambda) {
                    u.powi(lambda.round() as i32)
                } else {
                    (-Self::log_on_sheet(*z0, w, 0) * *lambda).exp()
                };
                for k in 0..count {
                    if k > 0 {
                        cur *= u * (-lambda - (k - 1) as f64) / k as f64;
                    }
                    g.push(cur);
                }
                let mut h = vec![zero; count];
                if count > 0 {
                    h[0] = g[0].exp();
                }
                for m in 1..count {
                    let mut acc = zero;
                    for k in 0..m {
                        acc += g[k + 1] * (k + 1) as f64 * h[m - 1 - k];
                    }
                    h[m] = acc / m as f64;
                }
                Ok(h)
            }
        }
    }

    /// Variation with default options.
    pub fn variation(&self, z: Complex64) -> Result<VariationDensity, DataError> {
        self.variation_with(z, &VariationOptions::default())
    }

    /// The variation `varF_z` of a multi-valued datum seen from `z`.
    pub fn variation_with(
        &self,
        z: Complex64,
        opts: &VariationOptions,
    ) -> Result<VariationDensity, DataError> {
        if !self.is_multivalued() {
            return Err(DataError::Unsupported(
                "single-valued data have no variation; use the delta-series jump".into(),
            ));
        }
        let z0 = self.singular_point().expect("multivalued datum has z0");
        self.at_regular(z)?;
        let base = principal_arg(z - z0);
        let phase_angle = match opts.phase {
            BranchPhase::Positive => base,
            BranchPhase::Negative => base - 2.0 * PI,
        };
        let i2 = Complex64::new(0.0, 2.0);
        let (case_class, terms, tail_bound) = match self {
            Self::LogBranch { .. } => (
                CaseClass::One,
                vec![VariationTerm {
                    coefficient: Complex64::new(0.0, 2.0 * PI),
                    exponent: 0.0,
                    derivative_order: 0,
                }],
                0.0,
            ),
            Self::PowerBranch { lambda, .. } if *lambda > -1.0 => (
                CaseClass::One,
                vec![VariationTerm {
                    coefficient: i2 * (lambda * PI).sin(),
                    exponent: *lambda,
                    derivative_order: 0,
                }],
                0.0,
            ),
            Self::PowerBranch { lambda, .. } => {
                let m = (-lambda).floor() as usize;
                let mu = lambda + m as f64;
                let prod: f64 = (1..=m).map(|j| lambda + j as f64).product();
                (
                    CaseClass::Two,
                    vec![VariationTerm {
                        coefficient: i2 * (mu * PI).sin() / prod,
                        exponent: mu,
                        derivative_order: m,
                    }],
                    0.0,
                )
            }
            Self::EssentialPower { lambda, .. } => {
                let n_max = essential_term_count(*lambda, opts.series_tol, opts.max_terms)?;
                let mut terms = Vec::with_capacity(n_max);
                for n in 1..=n_max {
                    terms.push(essential_term(*lambda, n));
                }
                let tail = essential_tail_bound(*lambda, n_max + 1);
                (CaseClass::Three, terms, tail)
            }
            _ => unreachable!(),
        };
        Ok(VariationDensity {
            case_class,
            start: z0 - z,
            direction: RayDirection::of(z0 - z),
            phase_angle,
            terms,
            tail_bound,
        })
    }
}

fn check_z0(z0: Complex64) -> Result<(), DataError> {
    if z0 == Complex64::new(0.0, 0.0) {
        return Err(DataError::Invalid(
            "singular point z0 must be nonzero".into(),
        ));
    }
    if !(z0.re.is_finite() && z0.im.is_finite()) {
        return Err(DataError::Invalid(
            "singular point z0 must be finite".into(),
        ));
    }
    Ok(())
}

/// `arg(w − z0)` continued from `base` along the straight segment.
pub fn continued_arg(z0: Complex64, w: Complex64, base: Complex64) -> f64 {
    principal_arg(base - z0) + principal_arg((w - z0) / (base - z0))
}

/// `k_n = ⌊λn⌋`
pub fn essential_k(lambda: f64, n: usize) -> usize {
    (lambda * n as f64).floor() as usize
}

/// The `n`-th term of the essential-power variation: `(z0−z−s)^{−λn+k_n}`
/// scaled by `2i·sin((−λn+k_n)π) / (n!·(−λn+1)⋯(−λn+k_n))`.
fn essential_term(lambda: f64, n: usize) -> VariationTerm {
    let k = essential_k(lambda, n);
    let ln = lambda * n as f64;
    let mu = -ln + k as f64;
    // magnitude in log form; the product has sign (−1)^{#negative factors}
    let mut log_mag = ln_gamma(n as f64 + 1.0);
    let mut sign = 1.0;
    for j in 1..=k {
        let f = j as f64 - ln;
        log_mag += f.abs().ln();
        if f < 0.0 {
            sign = -sign;
        }
    }
    VariationTerm {
        coefficient: Complex64::new(0.0, 2.0 * (mu * PI).sin() * sign * (-log_mag).exp()),
        exponent: mu,
        derivative_order: k,
    }
}

/// `1/(n!)^{λ/2+1}`
fn essential_tail_bound(lambda: f64, n: usize) -> f64 {
    (-(lambda / 2.0 + 1.0) * ln_gamma(n as f64 + 1.0)).exp()
}

/// First `N` with `1/((N+1)!)^{λ/2+1} < series_tol`.
pub fn essential_term_count(
    lambda: f64,
    series_tol: f64,
    max_terms: usize,
) -> Result<usize, DataError> {
    (1..=max_terms)
        .find(|&n| essential_tail_bound(lambda, n + 1) < series_tol)
        .ok_or_else(|| {
            DataError::Unsupported(format!(
                "essential-power tail not below {series_tol} within {max_terms} terms"
            ))
        })
}

const LAURENT_MAX_TERMS: usize = 100_000;

fn laurent_eval(
    coeffs: &LaurentCoefficients,
    z0: Complex64,
    w: Complex64,
) -> Result<Complex64, DataError> {
    let u = 1.0 / (w - z0);
    match coeffs {
        LaurentCoefficients::Finite(a) => Ok(poly_eval(a, u) * u),
        LaurentCoefficients::Geometric { first, ratio } => {
            if (w - z0).norm() <= ratio.norm() {
                return Err(DataError::OutsideDomain {
                    point: w,
                    radius: ratio.norm(),
                });
            }
            Ok(first / (w - z0 - ratio))
        }
        LaurentCoefficients::Generator { f, radius_bound } => {
            let q = radius_bound * u.norm();
            if q >= 1.0 {
                return Err(DataError::OutsideDomain {
                    point: w,
                    radius: *radius_bound,
                });
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut un = Complex64::new(1.0, 0.0);
            let mut small = 0;
            for n in 1..LAURENT_MAX_TERMS {
                un *= u;
                let term = f(n) * un;
                sum += term;
                if term.norm() <= 1e-18 * sum.norm().max(1e-300) && n > 8 {
                    small += 1;
                    if small >= 6 {
                        break;
                    }
                } else {
                    small = 0;
                }
            }
            Ok(sum)
        }
    }
}

/// Taylor coefficients at `w` of `Σ aₙ (w−z0)^{−n}`:
/// `(−1)^m Σₙ aₙ C(n+m−1, m) (w−z0)^{−n−m}`.
fn laurent_taylor(
    coeffs: &LaurentCoefficients,
    z0: Complex64,
    w: Complex64,
    count: usize,
) -> Result<Vec<Complex64>, DataError> {
    let u = 1.0 / (w - z0);
    let sign = |m: usize| if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    match coeffs {
        LaurentCoefficients::Geometric { first, ratio } => {
            if (w - z0).norm() <= ratio.norm() {
                return Err(DataError::OutsideDomain {
                    point: w,
                    radius: ratio.norm(),
                });
            }
            // first/(w − a), a = z0 + ratio
            let v = 1.0 / (w - z0 - ratio);
            Ok((0..count)
                .map(|m| first * sign(m) * v.powu(m as u32 + 1))
                .collect())
        }
        LaurentCoefficients::Finite(a) => Ok((0..count)
            .map(|m| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut binom = 1.0; // C(n+m−1, m) at n = 1
                let mut un = u.powu(m as u32);
                for (i, an) in a.iter().enumerate() {
                    let n = i + 1;
                    if n > 1 {
                        binom *= (n + m - 1) as f64 / (n - 1) as f64;
                    }
                    un *= u;
                    acc += an * binom * un;
                }
                acc * sign(m)
            })
            .collect()),
        LaurentCoefficients::Generator { f, radius_bound } => {
            if radius_bound * u.norm() >= 1.0 {
                return Err(DataError::OutsideDomain {
                    point: w,
                    radius: *radius_bound,
                });
            }
            Ok((0..count)
                .map(|m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut log_binom = 0.0;
                    let um = u.powu(m as u32);
                    let mut un = um;
                    let mut small = 0;
                    for n in 1..LAURENT_MAX_TERMS {
                        if n > 1 {
                            log_binom += ((n + m - 1) as f64 / (n - 1) as f64).ln();
                        }
                        un *= u;
                        let term = f(n) * log_binom.exp() * un;
                        acc += term;
                        if n > m + 8 && term.norm() <= 1e-18 * acc.norm().max(1e-300) {
                            small += 1;
                            if small >= 6 {
                                break;
                            }
                        } else {
                            small = 0;
                        }
                    }
                    acc * sign(m)
                })
                .collect())
        }
    }
}

/// Normalized argument of `z0 − z`.
pub fn theta_z(z0: Complex64, z: Complex64) -> f64 {
    normalize_angle((z0 - z).arg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_sheets() {
        let d = CauchyDatum::log_branch(c(1.0, 0.0)).unwrap();
        assert!(d.evaluate(c(2.0, 0.0), 0).unwrap().norm() < 1e-16);
        assert!((d.evaluate(c(2.0, 0.0), 1).unwrap() - c(0.0, 2.0 * PI)).norm() < 1e-15);
        assert!(matches!(
            d.evaluate(c(1.0, 0.0), 0),
            Err(DataError::AtSingularity { .. })
        ));
    }

    #[test]
    fn power_sheets() {
        let d = CauchyDatum::power_branch(0.5, c(1.0, 0.0)).unwrap();
        assert!((d.evaluate(c(2.0, 0.0), 0).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d.evaluate(c(2.0, 0.0), 1).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn constructor_validation() {
        assert!(CauchyDatum::power_branch(2.0, c(1.0, 0.0)).is_err());
        assert!(CauchyDatum::log_branch(c(0.0, 0.0)).is_err());
        assert!(CauchyDatum::essential_power(1.5, c(1.0, 0.0)).is_err());
        assert!(CauchyDatum::essential_power(-1.0, c(1.0, 0.0)).is_err());
        assert!(CauchyDatum::essential_power(2f64.sqrt(), c(1.0, 0.0)).is_ok());
        assert!(CauchyDatum::essential_power(1.0, c(1.0, 0.0)).is_ok());
        let bad = LaurentCoefficients::Geometric {
            first: c(1.0, 0.0),
            ratio: c(1.2, 0.0),
        };
        assert!(CauchyDatum::laurent(bad, c(1.0, 0.0), vec![]).is_err());
        let liar = LaurentCoefficients::Generator {
            f: Arc::new(|n| c(2f64.powi(n as i32), 0.0)),
            radius_bound: 0.5,
        };
        assert!(CauchyDatum::laurent(liar, c(1.0, 0.0), vec![]).is_err());
    }

    #[test]
    fn rational_detection() {
        assert!(is_small_rational(1.5));
        assert!(is_small_rational(355.0 / 113.0));
        assert!(!is_small_rational(2f64.sqrt()));
        assert!(!is_small_rational(PI));
    }

    #[test]
    fn stokes_directions() {
        let d = CauchyDatum::log_branch(c(1.0, 0.0)).unwrap();
        let (delta, th) = d.stokes_direction(c(0.0, 0.0), 1, 2).unwrap();
        assert_eq!((delta.angle(), th.angle()), (0.0, 0.0));
        let d = CauchyDatum::log_branch(c(0.0, 1.0)).unwrap();
        let (delta, th) = d.stokes_direction(c(0.0, 0.0), 1, 2).unwrap();
        assert!((delta.angle() - PI).abs() < 1e-15);
        assert!((th.angle() - PI / 2.0).abs() < 1e-15);
        let d = CauchyDatum::log_branch(c(1.0, 0.0)).unwrap();
        let (delta, _) = d.stokes_direction(c(0.0, 0.0), 1, 3).unwrap();
        assert_eq!(delta.angle(), 0.0);
        assert!(CauchyDatum::Polynomial(vec![c(1.0, 0.0)])
            .stokes_direction(c(0.0, 0.0), 1, 2)
            .is_none());
    }

    #[test]
    fn variation_examples() {
        let z = c(0.0, 0.0);
        let log = CauchyDatum::log_branch(c(1.0, 0.0))
            .unwrap()
            .variation(z)
            .unwrap();
        assert_eq!(log.case_class, CaseClass::One);
        assert!((log.density(c(3.0, 0.0)) - c(0.0, 2.0 * PI)).norm() < 1e-15);
        assert_eq!(log.density(c(0.5, 0.0)), c(0.0, 0.0));

        let half = CauchyDatum::power_branch(0.5, c(1.0, 0.0))
            .unwrap()
            .variation(z)
            .unwrap();
        assert!((half.density(c(2.0, 0.0)) - c(-2.0, 0.0)).norm() < 1e-15);

        let neg = CauchyDatum::power_branch(-2.5, c(1.0, 0.0))
            .unwrap()
            .variation(z)
            .unwrap();
        assert_eq!(neg.case_class, CaseClass::Two);
        assert_eq!(neg.terms[0].derivative_order, 2);

        let ess = CauchyDatum::essential_power(2f64.sqrt(), c(1.0, 0.0))
            .unwrap()
            .variation(z)
            .unwrap();
        assert_eq!(ess.case_class, CaseClass::Three);
        assert_eq!(essential_k(2f64.sqrt(), 3), 4);
        assert_eq!(ess.terms[2].derivative_order, 4);
    }

    #[test]
    fn single_valued_has_no_variation() {
        let p = CauchyDatum::Polynomial(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            p.variation(c(0.0, 0.0)),
            Err(DataError::Unsupported(_))
        ));
    }

    #[test]
    fn laurent_taylor_of_simple_pole() {
        // 1/(z−1) at 0: φ^{(m)}(0)/m! = −1
        let d = CauchyDatum::laurent(
            LaurentCoefficients::Finite(vec![c(1.0, 0.0)]),
            c(1.0, 0.0),
            vec![],
        )
        .unwrap();
        for t in d.taylor_coefficients(c(0.0, 0.0), 20).unwrap() {
            assert!((t + 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn taylor_coefficients_match_finite_differences() {
        let data = [
            CauchyDatum::log_branch(c(1.0, 0.5)).unwrap(),
            CauchyDatum::power_branch(-2.5, c(1.0, 0.0)).unwrap(),
            CauchyDatum::essential_power(2f64.sqrt(), c(1.0, 0.0)).unwrap(),
            CauchyDatum::essential_power(1.0, c(1.0, 0.0)).unwrap(),
            CauchyDatum::laurent(
                LaurentCoefficients::Finite(vec![c(1.0, 0.0), c(0.5, -1.0), c(0.2, 0.0)]),
                c(1.0, 1.0),
                vec![c(1.0, 0.0), c(0.0, 2.0)],
            )
            .unwrap(),
        ];
        let w = c(-0.3, 0.2);
        let h = 1e-3;
        for d in &data {
            let t = d.taylor_coefficients(w, 3).unwrap();
            let f = |x: Complex64| d.evaluate_continued(x, w).unwrap();
            assert!((t[0] - f(w)).norm() < 1e-13);
            let d1 = (f(w + h) - f(w - h)) / (2.0 * h);
            let d2 = (f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h) / 2.0;
            assert!((t[1] - d1).norm() < 1e-5 * (1.0 + d1.norm()), "{d:?}");
            assert!((t[2] - d2).norm() < 1e-4 * (1.0 + d2.norm()), "{d:?}");
        }
    }

    #[test]
    fn generator_and_geometric_agree() {
        let z0 = c(1.0, 0.0);
        let geo = CauchyDatum::laurent(
            LaurentCoefficients::Geometric {
                first: c(1.0, 0.0),
                ratio: c(0.5, 0.0),
            },
            z0,
            vec![],
        )
        .unwrap();
        let gen = CauchyDatum::laurent(
            LaurentCoefficients::Generator {
                f: Arc::new(|n| c(0.5f64.powi(n as i32 - 1), 0.0)),
                radius_bound: 0.5,
            },
            z0,
            vec![],
        )
        .unwrap();
        let w = c(-0.5, 0.3);
        assert!((geo.evaluate(w, 0).unwrap() - gen.evaluate(w, 0).unwrap()).norm() < 1e-14);
        let a = geo.taylor_coefficients(w, 10).unwrap();
        let b = gen.taylor_coefficients(w, 10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12 * x.norm().max(1.0));
        }
    }

    #[test]
    fn sheet_additivity() {
        let log = CauchyDatum::log_branch(c(1.0, 0.0)).unwrap();
        let pow = CauchyDatum::power_branch(0.3, c(1.0, 0.0)).unwrap();
        let w = c(0.2, 0.7);
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                let l = log.evaluate(w, a + b).unwrap() - log.evaluate(w, a).unwrap();
                assert!((l - c(0.0, 2.0 * PI * b as f64)).norm() < 1e-13);
                let p = pow.evaluate(w, a + b).unwrap() / pow.evaluate(w, a).unwrap();
                let expected = Complex64::from_polar(1.0, 2.0 * PI * 0.3 * b as f64);
                assert!((p - expected).norm() < 1e-13);
            }
        }
    }

    fn monodromy(d: &CauchyDatum, z: Complex64, s: Complex64) -> Complex64 {
        let z0 = d.singular_point().unwrap();
        let base = principal_arg(z - z0);
        let w = z + s;
        d.evaluate_on_arg(w, base + PI).unwrap() - d.evaluate_on_arg(w, base - PI).unwrap()
    }

    proptest! {
        #[test]
        fn variation_matches_monodromy(
            x in 0.05f64..4.0,
            zr in -0.5f64..0.5,
            zi in -0.5f64..0.5,
            which in 0usize..4,
        ) {
            let z0 = c(1.0, 0.3);
            let d = match which {
                0 => CauchyDatum::log_branch(z0).unwrap(),
                1 => CauchyDatum::power_branch(0.5, z0).unwrap(),
                2 => CauchyDatum::power_branch(-2.5, z0).unwrap(),
                _ => CauchyDatum::essential_power(2f64.sqrt(), z0).unwrap(),
            };
            // the truncated essential series is only accurate at moderate |s − start|
            let x = if which == 3 { x.max(0.8) } else { x };
            let z = c(zr, zi);
            let v = d.variation_with(z, &VariationOptions { series_tol: 1e-15, ..Default::default() }).unwrap();
            let s = v.start + v.direction.unit() * x;
            let direct = monodromy(&d, z, s);
            let got = v.density(s);
            // the essential series is summed only to its truncation
            let tol = if which == 3 { 1e-8 } else { 1e-10 } * direct.norm().max(1.0);
            prop_assert!((got - direct).norm() <= tol, "{} vs {}", got, direct);
        }

        #[test]
        fn variation_vanishes_before_start(x in -5.0f64..0.0, which in 0usize..4) {
            let z0 = c(1.0, 0.0);
            let d = match which {
                0 => CauchyDatum::log_branch(z0).unwrap(),
                1 => CauchyDatum::power_branch(0.5, z0).unwrap(),
                2 => CauchyDatum::power_branch(-2.5, z0).unwrap(),
                _ => CauchyDatum::essential_power(2f64.sqrt(), z0).unwrap(),
            };
            let v = d.variation(c(0.0, 0.0)).unwrap();
            prop_assert_eq!(v.density_at(x), c(0.0, 0.0));
            for term in &v.terms {
                prop_assert_eq!(v.transferred_at(term, x), c(0.0, 0.0));
            }
        }
    }
}
