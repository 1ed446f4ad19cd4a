//! Validation reports, sweeps and the single-evaluation commands.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use stokes_core::data::CauchyDatum;
use stokes_core::jump::{
    jump_closed_form, jump_numeric, stokes_direction_at, JumpMethod, JumpOptions,
};
use stokes_core::lateral::{lateral_sum, LateralSumRequest};

use crate::scenario::{ExpectedTag, Scenario};

pub const REL_ERR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub upper_error_estimate: f64,
    pub lower_error_estimate: f64,
    pub evaluations: usize,
    pub max_truncation_radius: f64,
    pub closed_methods: Vec<JumpMethod>,
    pub truncation_terms: usize,
    pub tail_bound: f64,
    pub closed_error_estimate: f64,
}

/// Jumps of every datum of a scenario at one `(t, z)`, summed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointJump {
    pub numeric: Complex64,
    pub closed: Complex64,
    pub upper: Complex64,
    pub lower: Complex64,
    pub diagnostics: Diagnostics,
}

pub fn evaluate_point(
    data: &[CauchyDatum],
    z: Complex64,
    t: Complex64,
    opts: &JumpOptions,
) -> Result<PointJump, String> {
    let mut out = PointJump {
        numeric: Complex64::new(0.0, 0.0),
        closed: Complex64::new(0.0, 0.0),
        upper: Complex64::new(0.0, 0.0),
        lower: Complex64::new(0.0, 0.0),
        diagnostics: Diagnostics {
            upper_error_estimate: 0.0,
            lower_error_estimate: 0.0,
            evaluations: 0,
            max_truncation_radius: 0.0,
            closed_methods: Vec::new(),
            truncation_terms: 0,
            tail_bound: 0.0,
            closed_error_estimate: 0.0,
        },
    };
    for datum in data {
        let n = jump_numeric(datum, z, t, opts).map_err(|e| e.to_string())?;
        let c = jump_closed_form(datum, z, t, opts).map_err(|e| e.to_string())?;
        out.numeric += n.value;
        out.closed += c.value;
        out.upper += n.upper.value;
        out.lower += n.lower.value;
        let d = &mut out.diagnostics;
        d.upper_error_estimate += n.upper.error_estimate;
        d.lower_error_estimate += n.lower.error_estimate;
        d.evaluations += n.upper.evaluations + n.lower.evaluations;
        d.max_truncation_radius = d
            .max_truncation_radius
            .max(n.upper.truncation_radius_used)
            .max(n.lower.truncation_radius_used);
        d.closed_methods.push(c.method);
        d.truncation_terms += c.truncation_terms;
        d.tail_bound += c.tail_bound;
        d.closed_error_estimate += c.error_estimate;
    }
    Ok(out)
}

pub fn relative_error(value: Complex64, reference: Complex64) -> f64 {
    (value - reference).norm() / reference.norm().max(REL_ERR_FLOOR)
}

/// Reference value of a tag for a single datum.
pub fn reference_value(
    tag: ExpectedTag,
    datum: &CauchyDatum,
    z: Complex64,
    t: Complex64,
) -> Result<Complex64, String> {
    let c = match datum.singular_point() {
        Some(z0) => z0 - z,
        None if tag == ExpectedTag::Zero => return Ok(Complex64::new(0.0, 0.0)),
        None => return Err("reference tag needs a singular point".into()),
    };
    match tag {
        ExpectedTag::Zero => Ok(Complex64::new(0.0, 0.0)),
        ExpectedTag::HeatSimplePole => {
            Ok(Complex64::new(0.0, -2.0 * PI) / (4.0 * PI * t).sqrt() * (-c * c / (4.0 * t)).exp())
        }
        ExpectedTag::HeatLogErfc => {
            let x = c / (2.0 * t.sqrt());
            if x.im.abs() > 1e-14 * x.norm() {
                return Err(format!("erfc reference needs a real argument, got {x}"));
            }
            Ok(Complex64::new(0.0, -PI * libm::erfc(x.re)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub t: Complex64,
    pub numeric_jump: Option<Complex64>,
    pub closed_jump: Option<Complex64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub upper: Option<Complex64>,
    pub lower: Option<Complex64>,
    pub diagnostics: Option<Diagnostics>,
    pub reference: Option<Complex64>,
    pub reference_rel_err: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub tolerance: f64,
    pub abs_tolerance: f64,
    pub rows: Vec<ValidationRow>,
    pub all_pass: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn validation_row(scenario: &Scenario, data: &[CauchyDatum], t: Complex64) -> ValidationRow {
    let mut row = ValidationRow {
        t,
        numeric_jump: None,
        closed_jump: None,
        abs_err: None,
        rel_err: None,
        upper: None,
        lower: None,
        diagnostics: None,
        reference: None,
        reference_rel_err: None,
        pass: false,
        error: None,
    };
    let point = match evaluate_point(data, scenario.z, t, &scenario.jump_options()) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    let abs_err = (point.numeric - point.closed).norm();
    let rel_err = relative_error(point.numeric, point.closed);
    let mut pass = if point.closed == Complex64::new(0.0, 0.0) {
        abs_err <= scenario.abs_tolerance
    } else {
        rel_err <= scenario.tolerance
    };
    if let Some(tag) = scenario.expected {
        match reference_value(tag, &data[0], scenario.z, t) {
            Ok(r) => {
                let e = if r == Complex64::new(0.0, 0.0) {
                    (point.closed - r).norm()
                } else {
                    relative_error(point.closed, r)
                };
                pass &= e <= scenario.tolerance;
                row.reference = Some(r);
                row.reference_rel_err = Some(e);
            }
            Err(e) => {
                pass = false;
                row.error = Some(e);
            }
        }
    }
    row.numeric_jump = Some(point.numeric);
    row.closed_jump = Some(point.closed);
    row.abs_err = Some(abs_err);
    row.rel_err = Some(rel_err);
    row.upper = Some(point.upper);
    row.lower = Some(point.lower);
    row.diagnostics = Some(point.diagnostics);
    row.pass = pass;
    row
}

/// Compare numeric and closed-form jumps for every `t` of the scenario.
/// Row failures are recorded in the row.
pub fn run_validation(scenario: &Scenario) -> ValidationReport {
    let data = scenario.data();
    let rows: Vec<ValidationRow> = scenario
        .t
        .par_iter()
        .map(|&t| validation_row(scenario, &data, t))
        .collect();
    let all_pass = rows.iter().all(|r| r.pass);
    ValidationReport {
        scenario: scenario.name.clone(),
        tolerance: scenario.tolerance,
        abs_tolerance: scenario.abs_tolerance,
        rows,
        all_pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    TModulus,
    ZReal,
    EpsDir,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub numeric: Option<Complex64>,
    pub closed: Option<Complex64>,
    pub rel_err: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

fn sweep_row(scenario: &Scenario, data: &[CauchyDatum], axis: SweepAxis, x: f64) -> SweepRow {
    let mut opts = scenario.jump_options();
    let mut z = scenario.z;
    let mut t = scenario.t[0];
    let mut setup_error = None;
    match axis {
        SweepAxis::TModulus => {
            if x > 0.0 {
                t = Complex64::from_polar(x, t.arg());
            } else {
                setup_error = Some(format!("t modulus {x} must be positive"));
            }
        }
        SweepAxis::ZReal => {
            z = Complex64::new(x, z.im);
            if !(z.norm() < scenario.radius) {
                setup_error = Some(format!(
                    "|z| = {} is not below radius {}",
                    z.norm(),
                    scenario.radius
                ));
            }
        }
        SweepAxis::EpsDir => {
            if x > 0.0 {
                opts.eps_dir = x;
            } else {
                setup_error = Some(format!("eps_dir {x} must be positive"));
            }
        }
    }
    let result = match setup_error {
        Some(e) => Err(e),
        None => evaluate_point(data, z, t, &opts),
    };
    match result {
        Ok(p) => {
            let rel_err = relative_error(p.numeric, p.closed);
            let pass = if p.closed == Complex64::new(0.0, 0.0) {
                (p.numeric - p.closed).norm() <= scenario.abs_tolerance
            } else {
                rel_err <= scenario.tolerance
            };
            SweepRow {
                axis: x,
                numeric: Some(p.numeric),
                closed: Some(p.closed),
                rel_err: Some(rel_err),
                pass,
                error: None,
            }
        }
        Err(e) => SweepRow {
            axis: x,
            numeric: None,
            closed: None,
            rel_err: None,
            pass: false,
            error: Some(e),
        },
    }
}

/// One row per grid value, in grid order.
pub fn sweep(scenario: &Scenario, axis: SweepAxis, grid: &[f64]) -> Vec<SweepRow> {
    let data = scenario.data();
    grid.par_iter()
        .map(|&x| sweep_row(scenario, &data, axis, x))
        .collect()
}

pub const SWEEP_HEADER: [&str; 6] = [
    "axis",
    "re_num",
    "im_num",
    "re_closed",
    "im_closed",
    "rel_err",
];

/// CSV with the fixed header; failed rows carry `NaN` values.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    for r in rows {
        let n = r.numeric.unwrap_or(nan);
        let c = r.closed.unwrap_or(nan);
        w.write_record([
            r.axis.to_string(),
            n.re.to_string(),
            n.im.to_string(),
            c.re.to_string(),
            c.im.to_string(),
            r.rel_err.unwrap_or(f64::NAN).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRow {
    pub t: Complex64,
    pub theta: f64,
    pub value: Option<Complex64>,
    pub error_estimate: Option<f64>,
    pub evaluations: Option<usize>,
    pub error: Option<String>,
}

/// Lateral sums at direction `theta`, by default just above the Stokes
/// direction of the first datum.
pub fn lateral_rows(scenario: &Scenario, theta: Option<f64>) -> Vec<SumRow> {
    let data = scenario.data();
    let theta = theta.unwrap_or_else(|| {
        stokes_direction_at(&data[0], scenario.z, scenario.p, scenario.q).angle() + scenario.eps_dir
    });
    scenario
        .t
        .par_iter()
        .map(|&t| {
            let mut value = Complex64::new(0.0, 0.0);
            let mut err = 0.0;
            let mut evals = 0;
            for d in &data {
                let req = LateralSumRequest {
                    datum: d.clone(),
                    theta,
                    t,
                    z: scenario.z,
                    p: scenario.p,
                    q: scenario.q,
                    settings: scenario.quadrature,
                    sector_margin: scenario.sector_margin,
                    radius: scenario.radius,
                    clearance: scenario.clearance,
                };
                match lateral_sum(&req) {
                    Ok(r) => {
                        value += r.value;
                        err += r.error_estimate;
                        evals += r.evaluations;
                    }
                    Err(e) => {
                        return SumRow {
                            t,
                            theta,
                            value: None,
                            error_estimate: None,
                            evaluations: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            SumRow {
                t,
                theta,
                value: Some(value),
                error_estimate: Some(err),
                evaluations: Some(evals),
                error: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRow {
    pub t: Complex64,
    pub value: Option<Complex64>,
    pub methods: Vec<JumpMethod>,
    pub truncation_terms: usize,
    pub tail_bound: f64,
    pub error_estimate: f64,
    pub error: Option<String>,
}

/// Closed-form jumps for every `t`.
pub fn jump_rows(scenario: &Scenario) -> Vec<JumpRow> {
    let data = scenario.data();
    let opts = scenario.jump_options();
    scenario
        .t
        .par_iter()
        .map(|&t| {
            let mut row = JumpRow {
                t,
                value: Some(Complex64::new(0.0, 0.0)),
                methods: Vec::new(),
                truncation_terms: 0,
                tail_bound: 0.0,
                error_estimate: 0.0,
                error: None,
            };
            for d in &data {
                match jump_closed_form(d, scenario.z, t, &opts) {
                    Ok(j) => {
                        row.value = row.value.map(|v| v + j.value);
                        row.methods.push(j.method);
                        row.truncation_terms += j.truncation_terms;
                        row.tail_bound += j.tail_bound;
                        row.error_estimate += j.error_estimate;
                    }
                    Err(e) => {
                        row.value = None;
                        row.error = Some(e.to_string());
                        break;
                    }
                }
            }
            row
        })
        .collect()
}
