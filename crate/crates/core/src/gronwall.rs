//! Gronwall–Bellman bounds for `ẏ ≤ μ(t)y + π(t)`, the drift convolution
//! `κ(t, t₀) = ∫_{t₀}^{t} φ(t, s) π(s) ds`, Gelig-type convolution decay
//! checks and the `φ(t, s) ≤ ϖ(t − s)` majorant test.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exprlang::EvalError;
use crate::quadsig::{
    adaptive_gk, guarded_exp, integrate, transition_factor, QuadError, ScalarSignal,
    TransitionFactor, DEFAULT_MAX_DEPTH, LOG_OVERFLOW,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GronwallError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("drift must be nonnegative: pi({t}) = {value}")]
    NegativeDrift { t: f64, value: f64 },
    #[error("{which} fails its declared class {class}: {reason}")]
    Membership {
        which: &'static str,
        class: String,
        reason: String,
    },
    #[error("invalid arguments: {0}")]
    Precondition(String),
}

const TOL: f64 = 1e-10;

/// `(μ, π)` with `π ≥ 0`, checked by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPair {
    mu: ScalarSignal,
    pi: ScalarSignal,
}

impl DriftPair {
    /// Samples `π` on `[t#, t# + check_span]` and rejects values below `−1e−12`.
    pub fn new(mu: ScalarSignal, pi: ScalarSignal, check_span: f64) -> Result<Self, GronwallError> {
        let start = pi.domain_start().max(mu.domain_start());
        for i in 0..=2000 {
            let t = start + check_span * i as f64 / 2000.0;
            let value = pi.value(t)?;
            if !(value >= -1e-12) {
                return Err(GronwallError::NegativeDrift { t, value });
            }
        }
        Ok(DriftPair { mu, pi })
    }

    pub fn mu(&self) -> &ScalarSignal {
        &self.mu
    }

    pub fn pi(&self) -> &ScalarSignal {
        &self.pi
    }
}

fn union_breaks(
    a: &ScalarSignal,
    b: &ScalarSignal,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, EvalError> {
    let mut pts = a.breakpoints(lo, hi)?;
    pts.extend(b.breakpoints(lo, hi)?);
    Ok(pts)
}

/// `∫ₛᵗ φ(t, λ) π(λ) dλ` using a cumulative integral of `μ` tabulated on `[s, t]`.
fn drift_integral(
    tf: &TransitionFactor,
    pi: &ScalarSignal,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<f64, GronwallError> {
    if t == s {
        return Ok(0.0);
    }
    let mt = tf.cumulative(t)?;
    let breaks = union_breaks(tf.signal(), pi, s, t)?;
    let integrand = |lam: f64| -> Result<f64, QuadError> {
        Ok(guarded_exp(mt - tf.cumulative(lam)?) * pi.value(lam)?)
    };
    Ok(adaptive_gk(integrand, s, t, &breaks, tol, DEFAULT_MAX_DEPTH)?.value)
}

/// Bound on `y(t)` for any `y` with `ẏ ≤ μy + π` on `[s, t]`:
/// `y(s)·φ(t, s) + ∫ₛᵗ φ(t, λ) π(λ) dλ`.
pub fn gronwall_bound(
    mu: &ScalarSignal,
    pi: &ScalarSignal,
    y_s: f64,
    s: f64,
    t: f64,
) -> Result<f64, GronwallError> {
    if !(y_s >= 0.0) {
        return Err(GronwallError::Precondition(format!(
            "y(s) must be nonnegative, got {y_s}"
        )));
    }
    if !(t >= s) {
        return Err(GronwallError::Precondition(format!(
            "need t >= s, got s = {s}, t = {t}"
        )));
    }
    if t == s {
        return Ok(y_s);
    }
    let tf = TransitionFactor::build(mu, s, t, (t - s) / 64.0, TOL * 0.1, &[])?;
    let log_phi = tf.log_phi(t, s)?;
    let homogeneous = if y_s == 0.0 {
        0.0
    } else {
        y_s * guarded_exp(log_phi)
    };
    Ok(homogeneous + drift_integral(&tf, pi, s, t, TOL)?)
}

/// Sampled `κ(·, t₀)` with trend flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaCurve {
    pub t0: f64,
    pub horizon: f64,
    /// `(t, κ(t, t₀))`.
    pub samples: Vec<(f64, f64)>,
    pub sup_value: f64,
    pub sup_time: f64,
    /// `κ(horizon, t₀)`.
    pub tail_value: f64,
    pub bounded: bool,
    pub vanishing: bool,
    /// `φ` or `κ` left the representable range.
    pub overflow: bool,
}

impl KappaCurve {
    pub fn at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .map(|(_, k)| *k)
    }
}

/// Relative slack when comparing the late and early maxima of `κ`.
const TREND_SLACK: f64 = 1e-6;
/// `κ` at the horizon must be below this fraction of its supremum to count as vanishing.
const VANISH_FRACTION: f64 = 0.05;

/// `κ(t, t₀)` on `[t₀, horizon]` by the recursion
/// `κ(t_{k+1}) = φ(t_{k+1}, t_k)·κ(t_k) + ∫_{t_k}^{t_{k+1}} φ(t_{k+1}, λ) π(λ) dλ`.
pub fn kappa(
    pair: &DriftPair,
    t0: f64,
    horizon: f64,
    grid_step: f64,
) -> Result<KappaCurve, GronwallError> {
    if !(horizon > t0) {
        return Err(GronwallError::Precondition(format!(
            "horizon {horizon} must exceed t0 = {t0}"
        )));
    }
    if !(grid_step > 0.0) {
        return Err(GronwallError::Precondition(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let count = ((horizon - t0) / grid_step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=count)
        .map(|i| {
            if i == count {
                horizon
            } else {
                t0 + (horizon - t0) * i as f64 / count as f64
            }
        })
        .collect();
    let cell_tol = (TOL / count as f64).max(1e-15);
    let cells = grid
        .par_windows(2)
        .map(|w| -> Result<(f64, f64), GronwallError> {
            let tf =
                TransitionFactor::build(&pair.mu, w[0], w[1], w[1] - w[0], cell_tol * 0.1, &[])?;
            let log_phi = tf.log_phi(w[1], w[0])?;
            Ok((
                log_phi,
                drift_integral(&tf, &pair.pi, w[0], w[1], cell_tol)?,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut samples = Vec::with_capacity(grid.len());
    samples.push((t0, 0.0));
    let mut k = 0.0;
    let mut overflow = false;
    for (&t, (log_phi, local)) in grid[1..].iter().zip(&cells) {
        if *log_phi > LOG_OVERFLOW {
            overflow = true;
        }
        k = guarded_exp(*log_phi) * k + local;
        if !k.is_finite() {
            overflow = true;
            break;
        }
        samples.push((t, k));
    }

    let (mut sup_time, mut sup_value) = (t0, 0.0);
    for &(t, v) in &samples {
        if v > sup_value {
            sup_value = v;
            sup_time = t;
        }
    }
    if !overflow && sup_value > 0.0 {
        (sup_time, sup_value) = refine_max(pair, &samples, sup_time, sup_value)?;
    }
    let tail_value = samples.last().map(|s| s.1).unwrap_or(0.0);
    let split = t0 + 0.5 * (horizon - t0);
    let late_max = |from: f64| {
        samples
            .iter()
            .filter(|s| s.0 >= from)
            .map(|s| s.1)
            .fold(0.0, f64::max)
    };
    let head_max = samples
        .iter()
        .filter(|s| s.0 < split)
        .map(|s| s.1)
        .fold(0.0, f64::max);
    let bounded = !overflow && late_max(split) <= head_max * (1.0 + TREND_SLACK) + 1e-12;
    let three_quarter = t0 + 0.75 * (horizon - t0);
    let decreasing = late_max(three_quarter) <= late_max(split) * (1.0 + TREND_SLACK) + 1e-12
        && tail_value <= late_max(three_quarter) + 1e-12;
    let vanishing =
        bounded && decreasing && (sup_value <= 1e-12 || tail_value <= VANISH_FRACTION * sup_value);
    Ok(KappaCurve {
        t0,
        horizon,
        samples,
        sup_value,
        sup_time,
        tail_value,
        bounded,
        vanishing,
        overflow,
    })
}

/// Golden-section refinement of the grid maximum of `κ` between its neighbours.
fn refine_max(
    pair: &DriftPair,
    samples: &[(f64, f64)],
    t_best: f64,
    v_best: f64,
) -> Result<(f64, f64), GronwallError> {
    let idx = samples.iter().position(|s| s.0 == t_best).unwrap_or(0);
    let lo_idx = idx.saturating_sub(1);
    let hi_idx = (idx + 1).min(samples.len() - 1);
    let (base_t, base_k) = samples[lo_idx];
    let eval = |t: f64| -> Result<f64, GronwallError> {
        if t <= base_t {
            return Ok(base_k);
        }
        let phi = transition_factor(&pair.mu, t, base_t)?;
        Ok(phi * base_k + gronwall_bound(&pair.mu, &pair.pi, 0.0, base_t, t)?)
    };
    let (mut a, mut b) = (base_t, samples[hi_idx].0);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    for _ in 0..60 {
        if (b - a) <= 1e-9 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = eval(d)?;
        }
    }
    let (t, v) = if fc > fd { (c, fc) } else { (d, fd) };
    Ok(if v > v_best { (t, v) } else { (t_best, v_best) })
}

/// Declared function class for the Gelig-type convolution checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GeligClass {
    /// Integrable to the power `p`.
    Lp(f64),
    /// Tends to zero.
    Z,
}

impl std::fmt::Display for GeligClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeligClass::Lp(p) => write!(f, "L{p}"),
            GeligClass::Z => f.write_str("Z"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeligReport {
    pub classes: (GeligClass, GeligClass),
    pub tau: f64,
    pub horizon: f64,
    /// `(t, ∫_τ^t φ₁(t − s) φ₂(s) ds)`.
    pub samples: Vec<(f64, f64)>,
    pub sup_value: f64,
    pub sup_time: f64,
    pub tail_value: f64,
    /// Tail below a twentieth of the supremum (or negligible).
    pub decaying: bool,
    pub notes: Vec<String>,
}

fn lp_norm(f: &ScalarSignal, a: f64, b: f64, p: f64) -> Result<f64, GronwallError> {
    let breaks = f.breakpoints(a, b)?;
    let r = adaptive_gk(
        |t| f.value(t).map(|v| v.abs().powf(p)),
        a,
        b,
        &breaks,
        1e-12,
        DEFAULT_MAX_DEPTH,
    )?;
    Ok(r.value.powf(1.0 / p))
}

fn check_membership(
    which: &'static str,
    f: &ScalarSignal,
    class: GeligClass,
    start: f64,
    horizon: f64,
) -> Result<String, GronwallError> {
    let fail = |reason: String| GronwallError::Membership {
        which,
        class: class.to_string(),
        reason,
    };
    let half = start + 0.5 * (horizon - start);
    match class {
        GeligClass::Lp(p) => {
            let short = lp_norm(f, start, half, p)?;
            let long = lp_norm(f, start, horizon, p)?;
            if long > 1e-12 && (long - short).abs() > 0.01 * long {
                return Err(fail(format!(
                    "truncated L{p} norm moves from {short:.6e} to {long:.6e} over the last horizon doubling"
                )));
            }
            Ok(format!("{which}: truncated L{p} norm {long:.6e} settled"))
        }
        GeligClass::Z => {
            let mut head = 0.0_f64;
            let mut tail = 0.0_f64;
            for i in 0..=2000 {
                let t = start + (horizon - start) * i as f64 / 2000.0;
                let v = f.value(t)?.abs();
                if t < half {
                    head = head.max(v);
                } else {
                    tail = tail.max(v);
                }
            }
            if !(tail < 0.5 * head || tail < 1e-9) {
                return Err(fail(format!(
                    "late sup {tail:.6e} against early sup {head:.6e}"
                )));
            }
            Ok(format!("{which}: decays from {head:.6e} to {tail:.6e}"))
        }
    }
}

/// Checks the declared memberships `φ₁ ∈ C₁` (on `[0, ∞)`) and `φ₂ ∈ C₂`
/// (on `J`), then tabulates `∫_τ^t φ₁(t − s) φ₂(s) ds` on `[τ, horizon]`.
///
/// Admissible pairs are conjugate `(Lp, Lq)` with `p, q ≥ 1`, `(L1, Z)` and `(Z, L1)`.
pub fn gelig_check(
    phi1_class: GeligClass,
    phi2_class: GeligClass,
    phi1: &ScalarSignal,
    phi2: &ScalarSignal,
    horizon: f64,
) -> Result<GeligReport, GronwallError> {
    let tau = phi2.domain_start();
    if !(horizon > tau + 1.0) {
        return Err(GronwallError::Precondition(format!(
            "horizon {horizon} too close to tau = {tau}"
        )));
    }
    let admissible = match (phi1_class, phi2_class) {
        (GeligClass::Lp(p), GeligClass::Lp(q)) => {
            if p < 1.0 || q < 1.0 {
                return Err(GronwallError::Precondition(format!(
                    "exponents must be at least 1 (Hölder), got p = {p}, q = {q}"
                )));
            }
            p > 1.0 && q > 1.0 && (1.0 / p + 1.0 / q - 1.0).abs() < 1e-12
        }
        (GeligClass::Lp(p), GeligClass::Z) | (GeligClass::Z, GeligClass::Lp(p)) => p == 1.0,
        (GeligClass::Z, GeligClass::Z) => false,
    };
    if !admissible {
        return Err(GronwallError::Precondition(format!(
            "({phi1_class}, {phi2_class}) is not an admissible pair"
        )));
    }
    let notes = vec![
        check_membership("phi1", phi1, phi1_class, 0.0, horizon - tau)?,
        check_membership("phi2", phi2, phi2_class, tau, horizon)?,
    ];

    let conv = |t: f64| -> Result<f64, GronwallError> {
        if t <= tau {
            return Ok(0.0);
        }
        let mut breaks = phi2.breakpoints(tau, t)?;
        breaks.extend(phi1.breakpoints(0.0, t - tau)?.into_iter().map(|b| t - b));
        let r = adaptive_gk(
            |s| -> Result<f64, EvalError> { Ok(phi1.value(t - s)? * phi2.value(s)?) },
            tau,
            t,
            &breaks,
            TOL,
            DEFAULT_MAX_DEPTH,
        )?;
        Ok(r.value)
    };
    let count = 400;
    let samples = (0..=count)
        .into_par_iter()
        .map(|i| {
            let t = tau + (horizon - tau) * i as f64 / count as f64;
            conv(t).map(|v| (t, v))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mut sup_time, mut sup_value) = (tau, 0.0_f64);
    let mut best = 0;
    for (i, &(t, v)) in samples.iter().enumerate() {
        if v.abs() > sup_value {
            sup_value = v.abs();
            sup_time = t;
            best = i;
        }
    }
    if sup_value > 0.0 {
        let (mut a, mut b) = (
            samples[best.saturating_sub(1)].0,
            samples[(best + 1).min(count)].0,
        );
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if conv(c)?.abs() > conv(d)?.abs() {
                b = d;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        let v = conv(t)?.abs();
        if v > sup_value {
            sup_value = v;
            sup_time = t;
        }
    }
    let tail_value = samples[count].1;
    let decaying = tail_value.abs() <= 1e-9 || tail_value.abs() <= VANISH_FRACTION * sup_value;
    Ok(GeligReport {
        classes: (phi1_class, phi2_class),
        tau,
        horizon,
        samples,
        sup_value,
        sup_time,
        tail_value,
        decaying,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantReport {
    pub pass: bool,
    /// Largest `φ(t, s) / ϖ(t − s)`.
    pub worst_ratio: f64,
    /// `(s, t)` where the worst ratio occurs.
    pub worst_at: (f64, f64),
    pub samples: usize,
}

/// Checks `φ(t, s) ≤ ϖ(t − s)·(1 + 1e−9)` at each `(s, t)` sample.
pub fn majorant_check(
    mu: &ScalarSignal,
    varpi: &ScalarSignal,
    samples: &[(f64, f64)],
) -> Result<MajorantReport, GronwallError> {
    let ratios = samples
        .par_iter()
        .map(|&(s, t)| -> Result<f64, GronwallError> {
            if t < s {
                return Err(GronwallError::Precondition(format!(
                    "sample needs t >= s, got ({s}, {t})"
                )));
            }
            let phi = transition_factor(mu, t, s)?;
            let bound = varpi.value(t - s)?;
            Ok(if bound > 0.0 {
                phi / bound
            } else if phi > 0.0 {
                f64::INFINITY
            } else {
                0.0
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_at = (f64::NAN, f64::NAN);
    for (r, at) in ratios.iter().zip(samples) {
        if *r > worst_ratio {
            worst_ratio = *r;
            worst_at = *at;
        }
    }
    Ok(MajorantReport {
        pass: worst_ratio <= 1.0 + 1e-9,
        worst_ratio,
        worst_at,
        samples: samples.len(),
    })
}

/// `∫ₐᵇ π` helper used by reports.
pub fn drift_mass(pi: &ScalarSignal, a: f64, b: f64) -> Result<f64, GronwallError> {
    Ok(integrate(pi, a, b, TOL)?)
}
