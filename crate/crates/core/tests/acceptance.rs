//! Acceptance suite. Every criterion prints one PASS/FAIL line on stderr,
//! bypassing output capture, and then asserts.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use stokes_core::data::{CauchyDatum, LaurentCoefficients, VariationOptions};
use stokes_core::geometry::RayDirection;
use stokes_core::jump::{
    jump_closed_form, jump_numeric, jump_representation, jump_variation, JumpKernel, JumpMethod,
    JumpOptions, JumpRepresentation,
};
use stokes_core::kernels::{
    ecalle_kernel, gaussian_derivative, heaviside_ray, reciprocal_gamma, EcalleKernel,
    EcalleKernelSpec, GaussianDerivativeRequest,
};
use stokes_core::lateral::{lateral_sum, LateralSumRequest};
use stokes_core::quadrature::QuadratureSettings;
use stokes_core::series::{accelerate, decelerate_exact, formal_solution_exact_laurent};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn verdict(n: u32, title: &str, ok: bool, detail: String) {
    let line = format!(
        "acceptance {n:>2} {} {title}: {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{}", line.trim_end());
}

fn pole() -> CauchyDatum {
    CauchyDatum::laurent(
        LaurentCoefficients::Finite(vec![c(1.0, 0.0)]),
        c(1.0, 0.0),
        vec![],
    )
    .unwrap()
}

const ORIGIN: Complex64 = Complex64::new(0.0, 0.0);

#[test]
fn criterion_01_simple_pole() {
    let opts = JumpOptions::default();
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for t in [0.1, 0.25] {
        let start = Instant::now();
        let j = jump_numeric(&pole(), ORIGIN, c(t, 0.0), &opts).unwrap();
        slowest = slowest.max(start.elapsed());
        let expected = c(0.0, -(PI / t).sqrt() * (-1.0 / (4.0 * t)).exp());
        worst = worst.max(rel(j.value, expected));
    }
    verdict(
        1,
        "simple-pole jump vs -i sqrt(pi/t) e^(-1/4t)",
        worst <= 1e-6 && slowest < Duration::from_secs(1),
        format!("max rel err {worst:.2e} (tol 1e-6), slowest {slowest:.2?} (< 1 s)"),
    );
}

#[test]
fn criterion_02_log_branch() {
    let d = CauchyDatum::log_branch(c(1.0, 0.0)).unwrap();
    let t = 0.25;
    let j = jump_numeric(&d, ORIGIN, c(t, 0.0), &JumpOptions::default()).unwrap();
    let oracle = c(0.0, -PI * libm::erfc(1.0 / (2.0 * f64::sqrt(t))));
    let err = rel(j.value, oracle);
    verdict(
        2,
        "log-branch jump vs -i pi erfc(1/(2 sqrt t))",
        err <= 1e-6,
        format!("rel err {err:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_03_power_branches() {
    let opts = JumpOptions::default();
    let kernel_settings = QuadratureSettings::default();
    let mut worst_numeric = 0.0f64;
    let mut worst_oracle = 0.0f64;
    // high-precision quadrature of the case-2 display, λ = −5/2, z0 = 1, z = 0
    let oracle = [
        (0.1, 3.588_095_183_339_675_5),
        (0.25, 2.286_665_906_044_711_3),
    ];
    for lambda in [0.5, -2.5] {
        let d = CauchyDatum::power_branch(lambda, c(1.0, 0.0)).unwrap();
        let rep = match jump_representation(&d, ORIGIN).unwrap() {
            JumpRepresentation::VariationIntegral(v) => v,
            other => panic!("{other:?}"),
        };
        for t in [0.1, 0.25] {
            let kernel = JumpKernel::heat(c(t, 0.0));
            let closed = jump_variation(&rep, &kernel, &kernel_settings, opts.series_tol).unwrap();
            let numeric = jump_numeric(&d, ORIGIN, c(t, 0.0), &opts).unwrap();
            worst_numeric = worst_numeric.max(rel(numeric.value, closed.value));
            if lambda < 0.0 {
                assert_eq!(closed.method, JumpMethod::VariationCase2);
                let (_, v) = oracle.iter().find(|(tt, _)| *tt == t).unwrap();
                worst_oracle = worst_oracle.max(rel(closed.value, c(*v, 0.0)));
            }
        }
    }
    verdict(
        3,
        "power-branch jumps, lambda = 1/2 and -5/2",
        worst_numeric <= 1e-6 && worst_oracle <= 1e-8,
        format!("numeric vs closed {worst_numeric:.2e} (tol 1e-6), case 2 vs oracle {worst_oracle:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_04_essential_power() {
    let d = CauchyDatum::essential_power(2f64.sqrt(), c(1.0, 0.0)).unwrap();
    let opts = JumpOptions::default();
    let mut worst = 0.0f64;
    let mut terms = 0;
    for t in [0.1, 0.25] {
        let closed = jump_closed_form(&d, ORIGIN, c(t, 0.0), &opts).unwrap();
        assert_eq!(closed.method, JumpMethod::VariationCase3);
        terms = terms.max(closed.truncation_terms);
        let numeric = jump_numeric(&d, ORIGIN, c(t, 0.0), &opts).unwrap();
        worst = worst.max(rel(numeric.value, closed.value));
    }
    verdict(
        4,
        "essential power lambda = sqrt 2, case-3 series vs numeric",
        worst <= 1e-5,
        format!("max rel err {worst:.2e} (tol 1e-5), up to {terms} terms"),
    );
}

#[test]
fn criterion_05_ecalle_gaussian_identity() {
    let spec = EcalleKernelSpec::new(2.0).unwrap();
    let kernel = EcalleKernel::new(spec).unwrap();
    let mut worst = 0.0f64;
    // 100 points on a 10 × 10 polar grid in |τ| ≤ 5
    for i in 0..10 {
        for j in 0..10 {
            let tau = Complex64::from_polar(
                0.5 * (i + 1) as f64,
                2.0 * PI * j as f64 / 10.0 + 0.1 * i as f64,
            );
            let exact = (-tau * tau / 4.0).exp() / PI.sqrt();
            let series = ecalle_kernel(&spec, tau).unwrap();
            let integral = kernel.integral(0, tau).unwrap().value;
            worst = worst
                .max((series - exact).norm())
                .max((integral - exact).norm());
        }
    }
    verdict(
        5,
        "C_2(tau) = e^(-tau^2/4)/sqrt(pi) on 100 points",
        worst <= 1e-10,
        format!("max abs err {worst:.2e} over series and contour routes (tol 1e-10)"),
    );
}

#[test]
fn criterion_06_acceleration_consistency() {
    let settings = QuadratureSettings::default();
    let cert = pole().growth_certificate(1, 2);
    let mut worst = 0.0f64;
    for t in [0.1, 0.2, 0.3] {
        for theta in [-0.6, 0.4, 0.8] {
            let acc = accelerate(
                |s| -1.0 / (1.0 - s),
                Some(cert),
                1.0,
                theta,
                c(t, 0.0),
                &settings,
            )
            .unwrap();
            let lat =
                lateral_sum(&LateralSumRequest::heat(pole(), theta, c(t, 0.0), ORIGIN)).unwrap();
            worst = worst.max(rel(acc.value, lat.value));
        }
    }
    verdict(
        6,
        "accelerate(-1/(1-s), k=1) vs heat lateral sum, 3x3 grid",
        worst <= 1e-6,
        format!("max rel err {worst:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_07_exact_deceleration() {
    let one = BigRational::from_integer(BigInt::from(1));
    let zero = BigRational::from_integer(BigInt::from(0));
    let u =
        formal_solution_exact_laurent(std::slice::from_ref(&one), &one, &zero, 31, 1, 2).unwrap();
    let g = decelerate_exact(&u, 1).unwrap();
    let ok = g.len() == 31 && g.iter().all(|x| *x == -one.clone());
    verdict(
        7,
        "deceleration of the formal heat solution of 1/(z-1)",
        ok,
        format!("{} coefficients, all exactly -1: {ok}", g.len()),
    );
}

#[test]
fn criterion_08_conservation() {
    let poly = |k: &[f64]| CauchyDatum::polynomial(k.iter().map(|&x| c(x, 0.0)).collect()).unwrap();
    let mut worst_const = 0.0f64;
    let mut worst_poly = 0.0f64;
    for (t, theta, z) in [
        (c(0.3, 0.0), 0.2, c(0.2, 0.1)),
        (c(0.2, 0.1), -0.4, c(-0.3, 0.0)),
    ] {
        for (p, q) in [(1, 2), (1, 3)] {
            let one =
                lateral_sum(&LateralSumRequest::heat(poly(&[1.0]), theta, t, z).with_pq(p, q))
                    .unwrap();
            worst_const = worst_const.max((one.value - 1.0).norm());
        }
        let sq = lateral_sum(&LateralSumRequest::heat(
            poly(&[0.0, 0.0, 1.0]),
            theta,
            t,
            z,
        ))
        .unwrap();
        worst_poly = worst_poly.max(rel(sq.value, z * z + 2.0 * t));
        let cube = lateral_sum(
            &LateralSumRequest::heat(poly(&[0.0, 0.0, 0.0, 1.0]), theta, t, z).with_pq(1, 3),
        )
        .unwrap();
        worst_poly = worst_poly.max(rel(cube.value, z * z * z + 6.0 * t));
    }
    verdict(
        8,
        "constants, z^2+2t (heat) and z^3+6t (p,q = 1,3)",
        worst_const <= 1e-8 && worst_poly <= 1e-7,
        format!("constants {worst_const:.2e} (tol 1e-8), polynomials {worst_poly:.2e} (tol 1e-7)"),
    );
}

#[test]
fn criterion_09_deformation_invariance() {
    let t = c(0.2, 0.0);
    let mut worst = 0.0f64;
    for d in [pole(), CauchyDatum::log_branch(c(1.0, 0.0)).unwrap()] {
        for (a, b) in [(0.3, 1.0), (-0.3, -1.0)] {
            let ua = lateral_sum(&LateralSumRequest::heat(d.clone(), a, t, ORIGIN)).unwrap();
            let ub = lateral_sum(&LateralSumRequest::heat(d.clone(), b, t, ORIGIN)).unwrap();
            worst = worst.max(rel(ua.value, ub.value));
        }
        let jumps: Vec<Complex64> = [0.2, 0.3, 0.4]
            .iter()
            .map(|&eps| {
                let opts = JumpOptions {
                    eps_dir: eps,
                    ..JumpOptions::default()
                };
                jump_numeric(&d, ORIGIN, t, &opts).unwrap().value
            })
            .collect();
        for j in &jumps[1..] {
            worst = worst.max(rel(*j, jumps[0]));
        }
    }
    verdict(
        9,
        "direction changes off the Stokes line and eps_dir in {0.2, 0.3, 0.4}",
        worst <= 1e-6,
        format!("max rel change {worst:.2e} (tol 1e-6)"),
    );
}

fn run_property<S, F>(name: &str, cases: u32, strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

#[test]
fn criterion_10_property_suite() {
    let mut failures = Vec::new();
    let mut record = |r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(e);
        }
    };

    record(run_property(
        "linearity of lateral sums",
        16,
        (-2.0f64..2.0, -2.0f64..2.0, 0.2f64..1.2, 0.05f64..0.5),
        |(a, b, theta, t)| {
            let t = c(t, 0.0);
            let mix = CauchyDatum::laurent(
                LaurentCoefficients::Finite(vec![c(a, 0.0), c(b, 0.0)]),
                c(1.0, 0.0),
                vec![],
            )
            .unwrap();
            let first = pole();
            let second = CauchyDatum::laurent(
                LaurentCoefficients::Finite(vec![c(0.0, 0.0), c(1.0, 0.0)]),
                c(1.0, 0.0),
                vec![],
            )
            .unwrap();
            let sum = |d: CauchyDatum| {
                lateral_sum(&LateralSumRequest::heat(d, theta, t, ORIGIN))
                    .unwrap()
                    .value
            };
            let lhs = sum(mix);
            let rhs = a * sum(first) + b * sum(second);
            prop_assert!(
                (lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()),
                "{lhs} vs {rhs}"
            );
            Ok(())
        },
    ));

    record(run_property(
        "linearity of jumps",
        16,
        (-2.0f64..2.0, -2.0f64..2.0, 0.05f64..0.5),
        |(a, b, t)| {
            let t = c(t, 0.0);
            let opts = JumpOptions::default();
            let datum = |coeffs: Vec<Complex64>| {
                CauchyDatum::laurent(LaurentCoefficients::Finite(coeffs), c(1.0, 0.0), vec![])
                    .unwrap()
            };
            let j = |d: &CauchyDatum| jump_closed_form(d, ORIGIN, t, &opts).unwrap().value;
            let n = |d: &CauchyDatum| jump_numeric(d, ORIGIN, t, &opts).unwrap().value;
            let mix = datum(vec![c(a, 0.0), c(b, 0.0)]);
            let e1 = datum(vec![c(1.0, 0.0)]);
            let e2 = datum(vec![c(0.0, 0.0), c(1.0, 0.0)]);
            let closed = a * j(&e1) + b * j(&e2);
            prop_assert!((j(&mix) - closed).norm() <= 1e-12 * (1.0 + closed.norm()));
            let numeric = a * n(&e1) + b * n(&e2);
            prop_assert!((n(&mix) - numeric).norm() <= 1e-9 * (1.0 + numeric.norm()));
            Ok(())
        },
    ));

    record(run_property(
        "gaussian derivatives vs finite differences",
        64,
        (
            1usize..=12,
            -2.0f64..2.0,
            -1.0f64..1.0,
            0.2f64..1.0,
            -0.3f64..0.3,
        ),
        |(m, sr, si, tr, ti)| {
            let s = c(sr, si);
            let t = c(tr, ti);
            let g = |order: usize, point: Complex64| {
                gaussian_derivative(GaussianDerivativeRequest {
                    order,
                    point,
                    time: t,
                })
            };
            let h = 1e-4;
            let fd = (g(m - 1, s + h) - g(m - 1, s - h)) / (2.0 * h);
            let exact = g(m, s);
            // scale of the neighbouring derivatives sets the error floor
            let scale = exact
                .norm()
                .max(g(m - 1, s).norm())
                .max(g(m + 1, s).norm())
                .max(1e-300);
            prop_assert!(
                (fd - exact).norm() <= 1e-6 * scale,
                "m={m} fd {fd} exact {exact}"
            );
            Ok(())
        },
    ));

    record(run_property(
        "reciprocal gamma reflection",
        256,
        (-6.0f64..6.0, -3.0f64..3.0),
        |(re, im)| {
            let z = c(re, im);
            let lhs = reciprocal_gamma(z) * reciprocal_gamma(1.0 - z);
            let rhs = (PI * z).sin() / PI;
            prop_assert!(
                (lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0),
                "{z}: {lhs} vs {rhs}"
            );
            Ok(())
        },
    ));

    record(run_property(
        "support vanishing of Heaviside and variation densities",
        64,
        (0.0f64..1.0, -PI..PI, 0.2f64..2.0),
        |(frac, arg, r0)| {
            let z0 = Complex64::from_polar(r0, arg);
            let z = z0 * 0.5;
            let dir = RayDirection::new((z0 - z).arg());
            let inside = dir.unit() * (frac * (z0 - z).norm());
            prop_assert_eq!(heaviside_ray(dir, inside, z0 - z).unwrap(), 0.0);
            for d in [
                CauchyDatum::log_branch(z0).unwrap(),
                CauchyDatum::power_branch(0.5, z0).unwrap(),
                CauchyDatum::power_branch(-2.5, z0).unwrap(),
                CauchyDatum::essential_power(2f64.sqrt(), z0).unwrap(),
            ] {
                let v = d.variation_with(z, &VariationOptions::default()).unwrap();
                prop_assert_eq!(v.density(inside), c(0.0, 0.0));
                prop_assert_eq!(v.density_at(-frac), c(0.0, 0.0));
            }
            Ok(())
        },
    ));

    let ok = failures.is_empty();
    verdict(
        10,
        "property suite (linearity, gaussian derivatives, reflection, support)",
        ok,
        if ok {
            "5 properties hold".to_string()
        } else {
            failures.join("; ")
        },
    );
}
