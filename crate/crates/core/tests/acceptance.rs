//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p indef-lyap --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use indef_lyap::certificates::{
    iiss_pi1, iiss_pi2, Certificate, ComparisonFn, ISSEstimate, IissVariant, Role, Theorem,
};
use indef_lyap::exprlang::{parse, Binding, Expr, VectorField};
use indef_lyap::gronwall::{gronwall_bound, kappa, DriftPair};
use indef_lyap::odesim::{euclidean, simulate, InputSignal};
use indef_lyap::quadsig::{
    classify, default_t0_samples, integrate, ScalarSignal, StabilityClass, TransitionFactor,
    DEFAULT_ALPHA_MIN,
};
use indef_lyap::verify::{
    catalog_entry, containment_of, dense_points, reference_containment, ReferenceEnvelope,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn seeded_runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

const ABS_COS_MU: &str = "2/(1+t) - t*abs(cos(t))";

fn sin_denominator_envelope() -> Outcome {
    let field = VectorField::parse(&["-x1/(t + sin(x1))"], 0).map_err(s)?;
    let start = Instant::now();
    let traj = simulate(
        &field,
        &InputSignal::zero(0),
        2.0,
        &[1.0],
        50.0,
        1e-9,
        1e-12,
    )
    .map_err(s)?;
    let samples: Vec<(f64, f64, f64)> = dense_points(&traj, 4)
        .into_iter()
        .map(|t| {
            Ok((
                t,
                euclidean(&traj.interpolate(t).map_err(s)?),
                3.0 / (1.0 + t),
            ))
        })
        .collect::<Result<_, String>>()?;
    let rep = containment_of(&samples, 1e-6);
    let elapsed = start.elapsed().as_secs_f64();
    ensure(traj.t_end() == 50.0, || {
        format!("stopped at t = {}", traj.t_end())
    })?;
    ensure(rep.pass, || format!("{:?}", rep.failure))?;
    ensure(elapsed < 1.0, || format!("runtime {elapsed:.3} s"))?;
    Ok(format!(
        "{} points, worst |x|/bound {:.6}, {:.3} s",
        rep.points, rep.worst_ratio, elapsed
    ))
}

fn quadrature_exactness() -> Outcome {
    let mu = ScalarSignal::parse("-2/(1+t)", 0.0).map_err(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b): (f64, f64) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let (t0, t) = (a.min(b), a.max(b));
        let got = integrate(&mu, t0, t, 1e-12).map_err(s)?;
        worst = worst.max((got - 2.0 * ((1.0 + t0) / (1.0 + t)).ln()).abs());
    }
    ensure(worst <= 1e-9, || format!("worst error {worst:e}"))?;
    Ok(format!("100 pairs, worst error {worst:.2e}"))
}

fn abs_cos_window_and_pair() -> Outcome {
    let mu = ScalarSignal::parse(ABS_COS_MU, 0.0).map_err(s)?;
    let mut worst_window = f64::NEG_INFINITY;
    for i in 0..=3000 {
        let t = i as f64 * 0.01;
        worst_window = worst_window.max(integrate(&mu, t, t + 1.5 * PI, 1e-10).map_err(s)?);
    }
    ensure(worst_window <= -2.0 + 1e-6, || {
        format!("window integral reaches {worst_window}")
    })?;
    let alpha = 4.0 / (3.0 * PI);
    let beta = 2.0 * (1.0 + 1.5 * PI).ln() + 2.0;
    let table = TransitionFactor::build(&mu, 0.0, 200.0, 0.05, 1e-10, &[]).map_err(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut margin = f64::INFINITY;
    for _ in 0..10_000 {
        let (a, b): (f64, f64) = (rng.random_range(0.0..200.0), rng.random_range(0.0..200.0));
        let (t0, t) = (a.min(b), a.max(b));
        let slack = -alpha * (t - t0) + beta - table.log_phi(t, t0).map_err(s)?;
        margin = margin.min(slack);
    }
    ensure(margin >= 0.0, || {
        format!("certified pair violated, margin {margin}")
    })?;
    Ok(format!(
        "max window integral {worst_window:.6}, pair margin {margin:.4} over 1e4 pairs"
    ))
}

fn abs_cos_free_response() -> Outcome {
    let entry = catalog_entry("abs_cos_free").ok_or("missing catalog entry")?;
    let a = &entry.analysis;
    let traj = simulate(
        &a.field,
        &InputSignal::zero(1),
        0.0,
        &[1.0],
        60.0,
        a.rtol,
        a.atol,
    )
    .map_err(s)?;
    let rate = 2.0 / (3.0 * PI);
    let formula = ReferenceEnvelope::Exponential {
        scale: ((1.0 + 1.5 * PI).ln() + 1.0).exp(),
        rate,
    };
    let literal = ReferenceEnvelope::Exponential {
        scale: 15.52817,
        rate: 0.212207,
    };
    let rep = reference_containment(&traj, &formula, 1e-6).map_err(s)?;
    let rep_lit = reference_containment(&traj, &literal, 1e-6).map_err(s)?;
    ensure(traj.t_end() == 60.0, || {
        format!("stopped at t = {}", traj.t_end())
    })?;
    ensure(rep.pass, || format!("formula envelope: {:?}", rep.failure))?;
    ensure(rep_lit.pass, || {
        format!("decimal envelope: {:?}", rep_lit.failure)
    })?;
    Ok(format!(
        "{} points, worst ratio {:.4}",
        rep.points, rep.worst_ratio
    ))
}

fn planar_rotation_envelopes() -> Outcome {
    let mut parts = Vec::new();
    for (name, k) in [
        ("planar_rotation_k1_r1", 1.0f64),
        ("planar_rotation_k2_r2", 2.0),
    ] {
        let entry = catalog_entry(name).ok_or("missing catalog entry")?;
        let a = &entry.analysis;
        let traj =
            simulate(&a.field, &a.input, 0.0, &[1.0, 1.0], 100.0, a.rtol, a.atol).map_err(s)?;
        let x0 = 2f64.sqrt();
        let samples: Vec<(f64, f64, f64)> = dense_points(&traj, 4)
            .into_iter()
            .map(|t| {
                let bound =
                    2f64.powf((k - 1.0) / (2.0 * k)) * x0 / (1.0 + t).powf(1.0 - 1.0 / (2.0 * k));
                Ok((t, euclidean(&traj.interpolate(t).map_err(s)?), bound))
            })
            .collect::<Result<_, String>>()?;
        let rep = containment_of(&samples, 1e-6);
        ensure(traj.t_end() == 100.0, || {
            format!("{name} stopped at t = {}", traj.t_end())
        })?;
        ensure(rep.pass, || format!("{name}: {:?}", rep.failure))?;
        parts.push(format!("k={k}: worst ratio {:.4}", rep.worst_ratio));
    }
    Ok(parts.join(", "))
}

fn gronwall_oracle() -> Outcome {
    let mut runner = seeded_runner(200);
    let strategy = (
        common::arb_piecewise(10.0, -1.5, 0.5),
        common::arb_piecewise(10.0, 0.0, 1.0),
        0.0f64..2.0,
        prop_oneof![Just(0.0), 0.0f64..1.0],
    );
    let stops = [2.5, 5.0, 7.5, 10.0];
    let mut equalities = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let cell = std::cell::RefCell::new((&mut equalities, &mut worst));
    runner
        .run(&strategy, |(mu, pi, y0, slack)| {
            let b = indef_lyap::quadsig::PiecewiseConstant::new(
                pi.breaks().to_vec(),
                pi.values().iter().map(|v| v - slack).collect(),
            )
            .unwrap();
            let ys = common::rk4_scalar_piecewise(&mu, &b, y0, 1e-4, &stops);
            let (mu_s, pi_s) = (common::piecewise_signal(&mu), common::piecewise_signal(&pi));
            let mut c = cell.borrow_mut();
            if slack == 0.0 {
                *c.0 += 1;
            }
            for (&t, &y) in stops.iter().zip(&ys) {
                let bound = gronwall_bound(&mu_s, &pi_s, y0, 0.0, t).unwrap();
                prop_assert!(y <= bound + 1e-7, "y({t}) = {y} above bound {bound}");
                if slack == 0.0 {
                    prop_assert!(
                        (y - bound).abs() <= 1e-7,
                        "equality case: y({t}) = {y}, bound {bound}"
                    );
                }
                *c.1 = c.1.max(if slack == 0.0 {
                    (y - bound).abs()
                } else {
                    y - bound
                });
            }
            Ok(())
        })
        .map_err(s)?;
    Ok(format!(
        "200 instances ({equalities} with zero slack), worst signed gap {worst:.2e}"
    ))
}

fn classifier_goldens() -> Outcome {
    let run = |src: &str| {
        let sig = ScalarSignal::parse(src, 0.0).map_err(s)?;
        classify(
            &sig,
            200.0,
            &default_t0_samples(0.0, 200.0),
            DEFAULT_ALPHA_MIN,
        )
        .map_err(s)
    };
    let v = run("-1")?;
    ensure(
        v.class == StabilityClass::UniformExponential && (v.alpha - 1.0).abs() <= 1e-3,
        || format!("-1: {:?} alpha {}", v.class, v.alpha),
    )?;
    for src in ["-2/(1+t)", "-2*t/(1+t^2)"] {
        let v = run(src)?;
        ensure(v.class == StabilityClass::Asymptotic, || {
            format!("{src}: {:?}", v.class)
        })?;
    }
    let v = run("sin(t)")?;
    ensure(v.class == StabilityClass::None && !v.inconclusive, || {
        format!("sin(t): {:?}", v.class)
    })?;
    let v = run(ABS_COS_MU)?;
    ensure(v.class == StabilityClass::UniformExponential, || {
        format!("abs-cos rate: {:?}", v.class)
    })?;
    Ok(format!("5 rates classified, abs-cos alpha {:.4}", v.alpha))
}

fn kappa_engine() -> Outcome {
    let mu = ScalarSignal::parse("-2*t/(1+t^2)", 0.0).map_err(s)?;
    let pi = ScalarSignal::parse("1/(1+t^2)", 0.0).map_err(s)?;
    let pair = DriftPair::new(mu, pi, 100.0).map_err(s)?;
    let curve = kappa(&pair, 0.0, 100.0, 0.05).map_err(s)?;
    let worst = curve
        .samples
        .iter()
        .map(|&(t, k)| (k - t / (1.0 + t * t)).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, || format!("curve error {worst:e}"))?;
    ensure((curve.sup_value - 0.5).abs() <= 1e-6, || {
        format!("sup {}", curve.sup_value)
    })?;
    ensure((curve.tail_value - 100.0 / 10001.0).abs() <= 1e-6, || {
        format!("tail {}", curve.tail_value)
    })?;
    Ok(format!(
        "{} samples, worst error {worst:.2e}, sup {:.9}, tail {:.9}",
        curve.samples.len(),
        curve.sup_value,
        curve.tail_value
    ))
}

fn iiss_formulas() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    let e = std::f64::consts::E;
    let spots = [
        (iiss_pi1(IissVariant::TwoGain, 0.0), 0.0),
        (iiss_pi2(IissVariant::TwoGain, 1.0, 0.0), 0.0),
        (iiss_pi1(IissVariant::TwoGain, 2.0), 4.0),
        (
            iiss_pi2(IissVariant::TwoGain, 1.0, 1.0),
            0.5 * (e - 1.0).powi(2) + e,
        ),
        (iiss_pi1(IissVariant::SingleGain, 2.0), 2.0),
        (iiss_pi2(IissVariant::SingleGain, 0.5, 2.0), 2.0 * e),
    ];
    for (i, (got, want)) in spots.iter().enumerate() {
        ensure(close(*got, *want), || {
            format!("spot value {i}: {got} vs {want}")
        })?;
    }
    ensure(close(spots[3].0, 4.194528), || {
        format!("pi2(1) = {}", spots[3].0)
    })?;
    let alpha = 4.0 / (3.0 * PI);
    let beta = 2.0 * (1.0 + 1.5 * PI).ln() + 2.0;
    let mut shapes = Vec::new();
    for (variant, theorem) in [
        (IissVariant::TwoGain, Theorem::T4Iiss),
        (IissVariant::SingleGain, Theorem::C1Iiss),
    ] {
        let cert = Certificate::new(
            theorem,
            parse("0.5*x1^2").map_err(s)?,
            ScalarSignal::parse(ABS_COS_MU, 0.0).map_err(s)?,
            ComparisonFn::power_const(0.5, 2.0, Role::Lower).map_err(s)?,
            ComparisonFn::power_const(0.5, 2.0, Role::Upper).map_err(s)?,
        )
        .with_rho(parse("s").map_err(s)?);
        let est = ISSEstimate::new(alpha, beta, variant, cert);
        let rep = est.kl_surrogate_check(10.0, 50.0).map_err(s)?;
        ensure(rep.pass(), || format!("{variant:?}: {rep:?}"))?;
        shapes.push(format!("{variant:?} ok"));
    }
    Ok(format!("6 spot values, KL shape: {}", shapes.join(", ")))
}

fn parser_suite() -> Outcome {
    let b = Binding::default();
    let goldens: [(&str, f64); 8] = [
        ("2+3*4", 14.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("8/2/2", 2.0),
        ("1-2-3", -4.0),
        ("(1+2)*3", 9.0),
        ("-(3-5)*2", 4.0),
    ];
    for (src, want) in goldens {
        let got = parse(src).map_err(s)?.eval(&b).map_err(s)?;
        ensure(got == want, || format!("{src} = {got}, want {want}"))?;
    }
    let mut runner = seeded_runner(1000);
    runner
        .run(&common::arb_expr(), |e: Expr| {
            let printed = e.to_string();
            let back =
                parse(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), printed);
            Ok(())
        })
        .map_err(s)?;
    Ok(format!("{} goldens, 1000 round trips", goldens.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("scalar rational envelope", sin_denominator_envelope),
        ("quadrature exactness", quadrature_exactness),
        (
            "window integral and certified pair",
            abs_cos_window_and_pair,
        ),
        ("exponential envelope, free response", abs_cos_free_response),
        (
            "planar rotation power-law envelopes",
            planar_rotation_envelopes,
        ),
        ("Gronwall bound against RK4", gronwall_oracle),
        ("classifier goldens", classifier_goldens),
        ("drift convolution", kappa_engine),
        ("integral ISS formulas and KL shape", iiss_formulas),
        ("parser goldens and round trip", parser_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]",
                i + 1
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
