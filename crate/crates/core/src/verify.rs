//! Numeric checks of certificate hypotheses and envelopes, the shipped
//! example catalog, and the end-to-end analysis pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

use crate::certificates::{
    check_t2, envelope_t1, envelope_t2, iiss_envelope, iiss_estimate_t4, iss_envelope_t3,
    CertError, Certificate, ComparisonFn, DriftVerdict, Envelope, EnvelopeParams, Grade,
    InputHistory, KlReport, Role, Theorem,
};
use crate::exprlang::{parse_in, Binding, EvalError, Expr, FieldError, Scope, VectorField};
use crate::gronwall::{kappa, DriftPair, GronwallError};
use crate::odesim::{
    euclidean, simulate_with, InputSignal, SimError, SimOptions, StepStats, Termination, Trajectory,
};
use crate::quadsig::{
    classify, default_t0_samples, QuadError, ScalarSignal, StabilityClass, StabilityVerdict,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Gronwall(#[from] GronwallError),
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("invalid sampling box: {0}")]
    Box(String),
    #[error("invalid analysis: {0}")]
    Invalid(String),
}

fn fd_step(c: f64) -> f64 {
    let h = f64::EPSILON.cbrt() * c.abs().max(1.0);
    // keep c ± h exactly representable apart
    (c + h) - c
}

/// `∂V/∂t + ∂V/∂x · f(t, x, u)` by central differences.
pub fn vdot(
    v: &Expr,
    field: &VectorField,
    t: f64,
    x: &[f64],
    u: &[f64],
) -> Result<f64, VerifyError> {
    let val = |t: f64, x: &[f64]| v.eval(&Binding::state(t, x, &[]));
    let f = field.eval(t, x, u)?;
    let ht = fd_step(t);
    let mut total = if v.mentions(crate::exprlang::Var::T) {
        (val(t + ht, x)? - val(t - ht, x)?) / (2.0 * ht)
    } else {
        0.0
    };
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        if f[i] == 0.0 {
            continue;
        }
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let up = val(t, &xp)?;
        xp[i] = x[i] - h;
        let down = val(t, &xp)?;
        xp[i] = x[i];
        total += (up - down) / (2.0 * h) * f[i];
    }
    if !total.is_finite() {
        return Err(VerifyError::NonFinite {
            what: "derivative of V",
            t,
        });
    }
    Ok(total)
}

/// Axis-aligned region of `(t, x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub x: Vec<(f64, f64)>,
    pub u: Vec<(f64, f64)>,
}

fn parse_range(s: &str) -> Result<(f64, f64), VerifyError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| VerifyError::Box(format!("expected lo:hi, got {s:?}")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| VerifyError::Box(format!("not a number: {v:?}")))
    };
    let (lo, hi) = (num(a)?, num(b)?);
    if !(lo <= hi) {
        return Err(VerifyError::Box(format!("empty range {lo}:{hi}")));
    }
    Ok((lo, hi))
}

impl SampleBox {
    /// `t ∈ [t_lo, t_hi]`, `|xᵢ| ≤ x_half`, `|uⱼ| ≤ u_half`.
    pub fn symmetric(t: (f64, f64), x_half: f64, n: usize, u_half: f64, m: usize) -> Self {
        SampleBox {
            t,
            x: vec![(-x_half, x_half); n],
            u: vec![(-u_half, u_half); m],
        }
    }

    /// Parses `t=0:20 x=-3:3 u=-1:1`; fields separated by spaces or `;`.
    /// A single range applies to every component, otherwise give one range
    /// per component separated by commas.
    pub fn parse(src: &str, n: usize, m: usize) -> Result<Self, VerifyError> {
        let mut t = None;
        let mut x = None;
        let mut u = None;
        for part in src
            .split(|c: char| c == ';' || c.is_whitespace())
            .filter(|p| !p.is_empty())
        {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| VerifyError::Box(format!("expected key=range, got {part:?}")))?;
            let ranges = val
                .split(',')
                .map(parse_range)
                .collect::<Result<Vec<_>, _>>()?;
            let expand = |dim: usize, name: &str| -> Result<Vec<(f64, f64)>, VerifyError> {
                match ranges.len() {
                    1 => Ok(vec![ranges[0]; dim]),
                    k if k == dim => Ok(ranges.clone()),
                    k => Err(VerifyError::Box(format!(
                        "{name} has {k} ranges for dimension {dim}"
                    ))),
                }
            };
            match key.trim() {
                "t" if ranges.len() == 1 => t = Some(ranges[0]),
                "x" => x = Some(expand(n, "x")?),
                "u" => u = Some(expand(m, "u")?),
                other => return Err(VerifyError::Box(format!("unknown box key {other:?}"))),
            }
        }
        Ok(SampleBox {
            t: t.ok_or_else(|| VerifyError::Box("missing t range".into()))?,
            x: x.ok_or_else(|| VerifyError::Box("missing x range".into()))?,
            u: u.unwrap_or_else(|| vec![(0.0, 0.0); m]),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub region: SampleBox,
    pub count: usize,
    pub seed: u64,
}

/// Which inequality on `V̇` a certificate asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `V̇ ≤ μV`
    RateBound,
    /// `V̇ ≤ μV + π`
    Drift,
    /// `V ≥ ρ(|u|) ⇒ V̇ ≤ μV`
    Implication,
    /// `V̇ ≤ (ρ₁(|u|) + μ)V + ρ₂(|u|)`
    IntegralGain,
    /// `V̇ ≤ μV + ρ(|u|)`
    AdditiveGain,
}

impl Hypothesis {
    pub fn for_theorem(t: Theorem) -> Hypothesis {
        match t {
            Theorem::T1 => Hypothesis::RateBound,
            Theorem::T2 => Hypothesis::Drift,
            Theorem::T3Iss => Hypothesis::Implication,
            Theorem::T4Iiss => Hypothesis::IntegralGain,
            Theorem::C1Iiss => Hypothesis::AdditiveGain,
        }
    }

    fn uses_input(self) -> bool {
        !matches!(self, Hypothesis::RateBound | Hypothesis::Drift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub hypothesis: Hypothesis,
    pub samples: usize,
    pub tested: usize,
    /// Samples where the implication's antecedent failed.
    pub skipped: usize,
    /// Samples where `f`, `V` or the bound could not be evaluated.
    pub undefined: usize,
    pub skip_rate: f64,
    /// `lhs − rhs` at the worst sample.
    pub worst_residual: f64,
    /// `(lhs − rhs) / (1 + |rhs|)` at the worst sample.
    pub worst_scaled: f64,
    pub tolerance: f64,
    pub worst_at: Option<SamplePoint>,
    pub pass: bool,
    pub inconclusive: bool,
}

pub const RESIDUAL_TOL: f64 = 1e-8;
const PARTITIONS: u64 = 16;

#[derive(Default)]
struct Partial {
    tested: usize,
    skipped: usize,
    undefined: usize,
    worst: Option<(f64, f64, SamplePoint)>,
}

/// `(lhs, rhs)` of the hypothesis at one point, or `None` when the
/// implication's antecedent fails.
fn sides(
    cert: &Certificate,
    hyp: Hypothesis,
    field: &VectorField,
    p: &SamplePoint,
) -> Result<Option<(f64, f64)>, VerifyError> {
    let v = cert.v.eval(&Binding::state(p.t, &p.x, &[]))?;
    let mu = cert.mu.value(p.t)?;
    let unorm = euclidean(&p.u);
    let gain = |e: &Option<Expr>| -> Result<f64, VerifyError> {
        let e = e
            .as_ref()
            .ok_or(CertError::Invalid("certificate lacks a gain".into()))?;
        Ok(e.eval(&Binding::gain(unorm))?)
    };
    let rhs = match hyp {
        Hypothesis::RateBound => mu * v,
        Hypothesis::Drift => {
            let pi = cert
                .pi
                .as_ref()
                .ok_or(CertError::Invalid("certificate lacks pi".into()))?;
            mu * v + pi.value(p.t)?
        }
        Hypothesis::Implication => {
            if v < gain(&cert.rho)? {
                return Ok(None);
            }
            mu * v
        }
        Hypothesis::IntegralGain => (gain(&cert.rho1)? + mu) * v + gain(&cert.rho2)?,
        Hypothesis::AdditiveGain => mu * v + gain(&cert.rho)?,
    };
    let lhs = vdot(&cert.v, field, p.t, &p.x, &p.u)?;
    if !rhs.is_finite() {
        return Err(VerifyError::NonFinite {
            what: "bound on V̇",
            t: p.t,
        });
    }
    Ok(Some((lhs, rhs)))
}

/// Samples the certificate's hypothesis on the box with a fixed seed.
/// Partitions draw from separate streams of one ChaCha generator and run in
/// parallel; the merge is in partition order, so the report does not depend
/// on the thread count.
pub fn residual_check(
    cert: &Certificate,
    field: &VectorField,
    sampler: &Sampler,
) -> Result<ResidualReport, VerifyError> {
    let hyp = Hypothesis::for_theorem(cert.theorem);
    let n = field.state_dim();
    let m = field.input_dim();
    let b = &sampler.region;
    if b.x.len() != n || b.u.len() != m {
        return Err(VerifyError::Box(format!(
            "box has {} state and {} input ranges, the system has {n} and {m}",
            b.x.len(),
            b.u.len()
        )));
    }
    let parts: Vec<Partial> = (0..PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let share = sampler.count / PARTITIONS as usize
                + usize::from((p as usize) < sampler.count % PARTITIONS as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
            rng.set_stream(p);
            let mut acc = Partial::default();
            let draw = |r: (f64, f64), rng: &mut ChaCha8Rng| {
                if r.0 == r.1 {
                    r.0
                } else {
                    rng.random_range(r.0..=r.1)
                }
            };
            for _ in 0..share {
                let t = draw(b.t, &mut rng);
                let x: Vec<f64> = b.x.iter().map(|&r| draw(r, &mut rng)).collect();
                let mut u: Vec<f64> = b.u.iter().map(|&r| draw(r, &mut rng)).collect();
                if !hyp.uses_input() {
                    u.iter_mut().for_each(|v| *v = 0.0);
                }
                let point = SamplePoint { t, x, u };
                match sides(cert, hyp, field, &point) {
                    Ok(Some((lhs, rhs))) => {
                        acc.tested += 1;
                        let raw = lhs - rhs;
                        let scaled = raw / (1.0 + rhs.abs());
                        if acc.worst.as_ref().is_none_or(|w| scaled > w.1) {
                            acc.worst = Some((raw, scaled, point));
                        }
                    }
                    Ok(None) => acc.skipped += 1,
                    Err(_) => acc.undefined += 1,
                }
            }
            acc
        })
        .collect();

    let mut total = Partial::default();
    for p in parts {
        total.tested += p.tested;
        total.skipped += p.skipped;
        total.undefined += p.undefined;
        if let Some(w) = p.worst {
            if total.worst.as_ref().is_none_or(|cur| w.1 > cur.1) {
                total.worst = Some(w);
            }
        }
    }
    let inconclusive = total.tested == 0;
    let (worst_residual, worst_scaled, worst_at) = match total.worst {
        Some((r, s, p)) => (r, s, Some(p)),
        None => (f64::NAN, f64::NAN, None),
    };
    Ok(ResidualReport {
        hypothesis: hyp,
        samples: sampler.count,
        tested: total.tested,
        skipped: total.skipped,
        undefined: total.undefined,
        skip_rate: if sampler.count == 0 {
            0.0
        } else {
            total.skipped as f64 / sampler.count as f64
        },
        worst_residual,
        worst_scaled,
        tolerance: RESIDUAL_TOL,
        worst_at,
        pass: !inconclusive && worst_scaled <= RESIDUAL_TOL,
        inconclusive,
    })
}

/// Sampled check of `α₁(t, |x|) ≤ V(t, x) ≤ α₂(t, |x|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub tested: usize,
    /// Largest `(α₁ − V) / (1 + V)`.
    pub worst_lower: f64,
    /// Largest `(V − α₂) / (1 + V)`.
    pub worst_upper: f64,
    pub worst_at: Option<SamplePoint>,
    pub pass: bool,
}

pub fn sandwich_check(
    cert: &Certificate,
    sampler: &Sampler,
) -> Result<SandwichReport, VerifyError> {
    let b = &sampler.region;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    rng.set_stream(PARTITIONS);
    let count = sampler.count.min(5000);
    let mut rep = SandwichReport {
        tested: 0,
        worst_lower: f64::NEG_INFINITY,
        worst_upper: f64::NEG_INFINITY,
        worst_at: None,
        pass: true,
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let t = if b.t.0 == b.t.1 {
            b.t.0
        } else {
            rng.random_range(b.t.0..=b.t.1)
        };
        let x: Vec<f64> =
            b.x.iter()
                .map(|r| {
                    if r.0 == r.1 {
                        r.0
                    } else {
                        rng.random_range(r.0..=r.1)
                    }
                })
                .collect();
        let v = cert.v.eval(&Binding::state(t, &x, &[]))?;
        let norm = euclidean(&x);
        let lo = (cert.alpha1.eval(t, norm)? - v) / (1.0 + v.abs());
        let hi = (v - cert.alpha2.eval(t, norm)?) / (1.0 + v.abs());
        rep.tested += 1;
        rep.worst_lower = rep.worst_lower.max(lo);
        rep.worst_upper = rep.worst_upper.max(hi);
        if lo.max(hi) > worst {
            worst = lo.max(hi);
            rep.worst_at = Some(SamplePoint {
                t,
                x,
                u: Vec::new(),
            });
        }
    }
    rep.pass = worst <= RESIDUAL_TOL;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub pass: bool,
    pub points: usize,
    pub epsilon: f64,
    /// Largest `|x(t)| / bound(t)` over points with a positive bound.
    pub worst_ratio: f64,
    pub worst_at: f64,
    pub failure: Option<String>,
}

/// Step points of the trajectory plus `interior` evenly spaced points inside
/// each step.
pub fn dense_points(traj: &Trajectory, interior: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.times.len() * (interior + 1));
    for w in traj.times.windows(2) {
        out.push(w[0]);
        for j in 1..=interior {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / (interior + 1) as f64);
        }
    }
    out.push(traj.t_end());
    out
}

/// Checks `norm ≤ bound·(1 + ε)` on `(t, norm, bound)` triples.
pub fn containment_of(samples: &[(f64, f64, f64)], epsilon: f64) -> ContainmentReport {
    let mut rep = ContainmentReport {
        pass: true,
        points: samples.len(),
        epsilon,
        worst_ratio: 0.0,
        worst_at: samples.first().map_or(f64::NAN, |s| s.0),
        failure: None,
    };
    for &(t, norm, bound) in samples {
        if bound <= 0.0 || !bound.is_finite() {
            if norm > 0.0 && !(bound == f64::INFINITY) {
                if rep.failure.is_none() {
                    rep.failure = Some(format!("bound is {bound} at t = {t} while |x| = {norm:e}"));
                }
                rep.pass = false;
            }
            continue;
        }
        let ratio = norm / bound;
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.worst_at = t;
        }
        if norm > bound * (1.0 + epsilon) {
            if rep.failure.is_none() {
                rep.failure = Some(format!("|x| = {norm:e} exceeds bound {bound:e} at t = {t}"));
            }
            rep.pass = false;
        }
    }
    rep
}

/// `(t, |x(t)|, env(t))` at the dense points, with the input history
/// (running sup of `|u|` and running integral of the envelope's input rate)
/// accumulated along the way.
pub fn envelope_samples(
    traj: &Trajectory,
    env: &Envelope,
    u: &InputSignal,
) -> Result<Vec<(f64, f64, f64)>, VerifyError> {
    envelope_samples_at(traj, env, u, &dense_points(traj, 4))
}

/// As [`envelope_samples`] at caller-chosen ascending points.
pub fn envelope_samples_at(
    traj: &Trajectory,
    env: &Envelope,
    u: &InputSignal,
    points: &[f64],
) -> Result<Vec<(f64, f64, f64)>, VerifyError> {
    let mut hist = InputHistory::ZERO;
    let mut prev: Option<(f64, f64)> = None;
    let mut out = Vec::with_capacity(points.len());
    for &t in points {
        let unorm = u.norm(t)?;
        if env.uses_input() {
            hist.sup = hist.sup.max(unorm);
            let rate = env.input_rate(unorm)?;
            if let Some((tp, rp)) = prev {
                hist.gain_integral += 0.5 * (t - tp) * (rate + rp);
            }
            prev = Some((t, rate));
        }
        let norm = euclidean(&traj.interpolate(t)?);
        out.push((t, norm, env.bound_with(t, &hist)?));
    }
    Ok(out)
}

pub fn envelope_containment(
    traj: &Trajectory,
    env: &Envelope,
    u: &InputSignal,
    epsilon: f64,
) -> Result<ContainmentReport, VerifyError> {
    Ok(containment_of(&envelope_samples(traj, env, u)?, epsilon))
}

/// Closed-form envelopes stored with catalog entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ReferenceEnvelope {
    /// `scale·|x₀|·(1+t₀)/(1+t)^power`
    Rational { scale: f64, power: f64 },
    /// `scale·|x₀|·e^{−rate(t−t₀)}`
    Exponential { scale: f64, rate: f64 },
}

impl ReferenceEnvelope {
    pub fn eval(&self, t0: f64, x0_norm: f64, t: f64) -> f64 {
        match *self {
            ReferenceEnvelope::Rational { scale, power } => {
                scale * x0_norm * (1.0 + t0) / (1.0 + t).powf(power)
            }
            ReferenceEnvelope::Exponential { scale, rate } => {
                scale * x0_norm * (-rate * (t - t0)).exp()
            }
        }
    }
}

pub fn reference_containment(
    traj: &Trajectory,
    r: &ReferenceEnvelope,
    epsilon: f64,
) -> Result<ContainmentReport, VerifyError> {
    let t0 = traj.t0();
    let x0 = euclidean(&traj.states[0]);
    let samples = dense_points(traj, 4)
        .into_iter()
        .map(|t| Ok((t, euclidean(&traj.interpolate(t)?), r.eval(t0, x0, t))))
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(containment_of(&samples, epsilon))
}

/// One self-contained analysis: system, certificate, initial condition and
/// numerical settings.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub name: String,
    pub field: VectorField,
    pub input: InputSignal,
    pub certificate: Certificate,
    /// Hand-derived `(α, β)` for `μ`, checked and then used for envelopes.
    pub certified_pair: Option<(f64, f64)>,
    pub reference: Option<ReferenceEnvelope>,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub tf: f64,
    pub horizon: f64,
    pub alpha_min: f64,
    pub rtol: f64,
    pub atol: f64,
    pub sampler: Sampler,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Violation,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub alpha: f64,
    pub beta: f64,
    pub certified: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaSummary {
    pub t0: f64,
    pub horizon: f64,
    pub sup: f64,
    pub sup_time: f64,
    pub tail: f64,
    pub bounded: bool,
    pub vanishing: bool,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub termination: Termination,
    pub diagnostic: Option<String>,
    pub t_end: f64,
    pub final_norm: f64,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub name: String,
    pub status: Status,
    pub reasons: Vec<String>,
    pub certificate: BTreeMap<String, String>,
    pub verdict: StabilityVerdict,
    pub certified_pair: Option<PairReport>,
    pub grade: Option<Grade>,
    pub residual: ResidualReport,
    pub bounds: SandwichReport,
    pub drift: Option<DriftVerdict>,
    pub kappa: Option<KappaSummary>,
    pub envelope: Option<EnvelopeParams>,
    pub iiss_shape: Option<KlReport>,
    pub simulation: SimulationSummary,
    pub containment: Option<ContainmentReport>,
    pub reference_containment: Option<ContainmentReport>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub report: AnalysisReport,
    pub trajectory: Trajectory,
    pub envelope: Option<Envelope>,
}

fn worsen(status: &mut Status, to: Status) {
    *status = match (*status, to) {
        (Status::Violation, _) | (_, Status::Violation) => Status::Violation,
        (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
        _ => Status::Pass,
    };
}

/// Classify `μ`, check the hypothesis on samples, build the envelope,
/// simulate and test containment.
pub fn run_analysis(a: &Analysis) -> Result<AnalysisOutcome, VerifyError> {
    let cert = &a.certificate;
    let n = a.field.state_dim();
    if a.x0.len() != n {
        return Err(VerifyError::Invalid(format!(
            "x0 has {} components, the system has {n}",
            a.x0.len()
        )));
    }
    if !(a.horizon > a.t0) {
        return Err(VerifyError::Invalid(format!(
            "horizon {} must exceed t0 {}",
            a.horizon, a.t0
        )));
    }
    let probe: Vec<f64> = (0..=8)
        .map(|i| a.t0 + (a.tf - a.t0) * i as f64 / 8.0)
        .collect();
    cert.validate(n, &probe)?;
    a.field.check_origin(&probe, 1e-12)?;
    a.input.check_bounded(a.t0, a.tf, 400)?;

    let mut status = Status::Pass;
    let mut reasons = Vec::new();

    let mut t0s = default_t0_samples(cert.mu.domain_start(), a.horizon);
    if !t0s.contains(&a.t0) {
        t0s.push(a.t0);
        t0s.sort_by(f64::total_cmp);
    }
    let mut verdict = classify(&cert.mu, a.horizon, &t0s, a.alpha_min)?;
    let mut pair_report = None;
    if let Some((alpha, beta)) = a.certified_pair {
        let pv = StabilityVerdict::from_certified_pair(&cert.mu, alpha, beta, a.horizon, &t0s)?;
        pair_report = Some(PairReport {
            alpha,
            beta,
            certified: pv.certified,
            margin: pv.margin,
        });
        if pv.certified {
            verdict = pv;
        } else {
            worsen(&mut status, Status::Violation);
            reasons.push(format!(
                "supplied (alpha, beta) = ({alpha}, {beta}) fails by {:e}",
                -pv.margin
            ));
        }
    }

    let residual = residual_check(cert, &a.field, &a.sampler)?;
    if residual.inconclusive {
        worsen(&mut status, Status::Inconclusive);
        reasons.push("every residual sample was skipped or undefined".into());
    } else if !residual.pass {
        worsen(&mut status, Status::Violation);
        reasons.push(format!(
            "hypothesis fails on samples (worst scaled residual {:e})",
            residual.worst_scaled
        ));
    }

    let sandwich = sandwich_check(cert, &a.sampler)?;
    if !sandwich.pass {
        worsen(&mut status, Status::Violation);
        reasons.push(format!(
            "alpha1 <= V <= alpha2 fails on samples (lower {:e}, upper {:e})",
            sandwich.worst_lower, sandwich.worst_upper
        ));
    }

    let x0_norm = euclidean(&a.x0);
    let mut grade = None;
    let mut drift = None;
    let mut kappa_summary = None;
    let mut iiss_shape = None;
    let need = |cls: StabilityClass, status: &mut Status, reasons: &mut Vec<String>| {
        if verdict.class >= cls {
            return true;
        }
        worsen(
            status,
            if verdict.inconclusive {
                Status::Inconclusive
            } else {
                Status::Violation
            },
        );
        reasons.push(format!(
            "rate function is {}, the theorem needs {cls}",
            verdict.class
        ));
        false
    };
    let envelope = match cert.theorem {
        Theorem::T1 => match Grade::best_for(verdict.class, &cert.alpha1, &cert.alpha2) {
            Some(g) => {
                grade = Some(g);
                Some(envelope_t1(cert, &verdict, g, a.t0, x0_norm)?)
            }
            None => {
                need(StabilityClass::Asymptotic, &mut status, &mut reasons);
                None
            }
        },
        Theorem::T2 => {
            let span = a.horizon.max(a.tf);
            let pi = cert
                .pi
                .clone()
                .ok_or(CertError::Invalid("T2 needs pi".into()))?;
            let pair = DriftPair::new(cert.mu.clone(), pi, span - a.t0)?;
            let curve = kappa(&pair, a.t0, span, 0.05)?;
            let dv = check_t2(cert, &verdict, &curve)?;
            kappa_summary = Some(KappaSummary {
                t0: curve.t0,
                horizon: curve.horizon,
                sup: curve.sup_value,
                sup_time: curve.sup_time,
                tail: curve.tail_value,
                bounded: curve.bounded,
                vanishing: curve.vanishing,
                overflow: curve.overflow,
            });
            if !dv.certified {
                worsen(
                    &mut status,
                    if dv.inconclusive {
                        Status::Inconclusive
                    } else {
                        Status::Violation
                    },
                );
                reasons.push(dv.reason.clone());
            }
            let env = if curve.overflow {
                None
            } else {
                Some(envelope_t2(cert, a.t0, x0_norm, span)?)
            };
            drift = Some(dv);
            env
        }
        Theorem::T3Iss => {
            if need(
                StabilityClass::UniformExponential,
                &mut status,
                &mut reasons,
            ) {
                Some(iss_envelope_t3(cert, &verdict, a.t0, x0_norm)?)
            } else {
                None
            }
        }
        Theorem::T4Iiss | Theorem::C1Iiss => {
            if need(
                StabilityClass::UniformExponential,
                &mut status,
                &mut reasons,
            ) {
                let est = iiss_estimate_t4(cert, &verdict)?;
                let kl = est.kl_surrogate_check(10.0, 50.0)?;
                if !kl.pass() {
                    worsen(&mut status, Status::Violation);
                    reasons.push("sigma fails the class-KL shape checks".into());
                }
                iiss_shape = Some(kl);
                Some(iiss_envelope(cert, &verdict, a.t0, x0_norm)?)
            } else {
                None
            }
        }
    };

    let opts = SimOptions {
        rtol: a.rtol,
        atol: a.atol,
        ..SimOptions::default()
    };
    let traj = simulate_with(&a.field, &a.input, a.t0, &a.x0, a.tf, &opts)?;
    match traj.termination {
        Termination::Completed => {}
        Termination::Diverged => {
            worsen(&mut status, Status::Violation);
            reasons.push(traj.diagnostic.clone().unwrap_or_default());
        }
        _ => {
            worsen(&mut status, Status::Inconclusive);
            reasons.push(traj.diagnostic.clone().unwrap_or_default());
        }
    }
    let containment = match &envelope {
        Some(env) => {
            let c = envelope_containment(&traj, env, &a.input, a.epsilon)?;
            if !c.pass {
                worsen(&mut status, Status::Violation);
                reasons.push(format!(
                    "envelope: {}",
                    c.failure.clone().unwrap_or_default()
                ));
            }
            Some(c)
        }
        None => None,
    };
    let reference_containment = match &a.reference {
        Some(r) => {
            let c = reference_containment(&traj, r, a.epsilon)?;
            if !c.pass {
                worsen(&mut status, Status::Violation);
                reasons.push(format!(
                    "reference envelope: {}",
                    c.failure.clone().unwrap_or_default()
                ));
            }
            Some(c)
        }
        None => None,
    };
    if verdict.inconclusive && status == Status::Pass {
        worsen(&mut status, Status::Inconclusive);
        reasons.push("rate classification is inconclusive at this horizon".into());
    }

    let report = AnalysisReport {
        name: a.name.clone(),
        status,
        reasons,
        certificate: cert.describe(),
        verdict,
        certified_pair: pair_report,
        grade,
        residual,
        bounds: sandwich,
        drift,
        kappa: kappa_summary,
        envelope: envelope.as_ref().map(|e| e.params()),
        iiss_shape,
        simulation: SimulationSummary {
            termination: traj.termination,
            diagnostic: traj.diagnostic.clone(),
            t_end: traj.t_end(),
            final_norm: euclidean(traj.final_state()),
            stats: traj.stats,
        },
        containment,
        reference_containment,
    };
    Ok(AnalysisOutcome {
        report,
        trajectory: traj,
        envelope,
    })
}

/// A shipped system with its certificate and the closed forms it should
/// reproduce.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub summary: &'static str,
    pub analysis: Analysis,
    /// `κ(t, t₀)` in closed form, for drift certificates.
    pub reference_kappa: Option<fn(f64, f64) -> f64>,
}

/// `α = 4/(3π)` for `μ(t) = 2/(1+t) − t|cos t|`.
pub const ABS_COS_ALPHA: f64 = 4.0 / (3.0 * PI);

/// `β = 2 ln(1 + 3π/2) + 2` for `μ(t) = 2/(1+t) − t|cos t|`.
pub fn abs_cos_beta() -> f64 {
    2.0 * (1.0 + 1.5 * PI).ln() + 2.0
}

fn expr(src: &str, scope: &Scope) -> Expr {
    parse_in(src, scope).expect("catalog expression parses")
}

fn signal(src: &str, start: f64) -> ScalarSignal {
    ScalarSignal::parse(src, start).expect("catalog rate parses")
}

fn power(k: &str, m: f64, role: Role) -> ComparisonFn {
    ComparisonFn::parse_power(k, m, role).expect("catalog bound is valid")
}

struct Recipe<'a> {
    name: &'a str,
    f: &'a [&'a str],
    m: usize,
    u: Option<&'a [&'a str]>,
    cert: Certificate,
    t0: f64,
    x0: Vec<f64>,
    tf: f64,
    region: SampleBox,
}

fn entry(s: Recipe<'_>) -> Analysis {
    Analysis {
        name: s.name.to_string(),
        field: VectorField::parse(s.f, s.m).expect("catalog field parses"),
        input: match s.u {
            Some(u) => InputSignal::parse(u).expect("catalog input parses"),
            None => InputSignal::zero(s.m),
        },
        certificate: s.cert,
        certified_pair: None,
        reference: None,
        t0: s.t0,
        x0: s.x0,
        tf: s.tf,
        horizon: 200.0,
        alpha_min: crate::quadsig::DEFAULT_ALPHA_MIN,
        rtol: 1e-9,
        atol: 1e-12,
        sampler: Sampler {
            region: s.region,
            count: 20_000,
            seed: 7,
        },
        epsilon: 1e-6,
    }
}

/// `ẋ₁ = −x₁/(1+t) + t²x₂^{2k−1} − t x₁^{2r−1}`, `ẋ₂ = −x₂/(1+t) − t²x₁^{2k−1} − t x₂^{2r−1}`
/// with `V = (x₁^{2k} + x₂^{2k})(1+t)`.
pub fn planar_rotation(k: u32, r: u32) -> CatalogEntry {
    let (a, b) = (2 * k - 1, 2 * r - 1);
    let f1 = format!("-x1/(1+t) + t^2*x2^{a} - t*x1^{b}");
    let f2 = format!("-x2/(1+t) - t^2*x1^{a} - t*x2^{b}");
    let m = 2.0 * k as f64;
    let cert = Certificate::new(
        Theorem::T1,
        expr(&format!("(x1^{m} + x2^{m})*(1+t)"), &Scope::system(2, 0)),
        signal(&format!("-{a}/(1+t)"), 0.0),
        power(&format!("2^(1-{k})*(1+t)"), m, Role::Lower),
        power("1+t", m, Role::Upper),
    );
    let name = format!("planar_rotation_k{k}_r{r}");
    let mut a = entry(Recipe {
        name: &name,
        f: &[&f1, &f2],
        m: 0,
        u: None,
        cert,
        t0: 0.0,
        x0: vec![1.0, 1.0],
        tf: 100.0,
        region: SampleBox::symmetric((0.0, 20.0), 3.0, 2, 0.0, 0),
    });
    a.reference = Some(ReferenceEnvelope::Rational {
        scale: 2f64.powf((k as f64 - 1.0) / m),
        power: 1.0 - 1.0 / m,
    });
    CatalogEntry {
        name: name.clone(),
        summary: "planar rotation with polynomial damping, power-law decay",
        analysis: a,
        reference_kappa: None,
    }
}

fn drift_entry(
    name: &'static str,
    summary: &'static str,
    f: &str,
    pi: &str,
    kref: fn(f64, f64) -> f64,
) -> CatalogEntry {
    let cert = Certificate::new(
        Theorem::T2,
        expr("x1^2", &Scope::system(1, 0)),
        signal("-2*t/(1+t^2)", 0.0),
        power("1", 2.0, Role::Lower),
        power("1", 2.0, Role::Upper),
    )
    .with_pi(signal(pi, 0.0));
    CatalogEntry {
        name: name.to_string(),
        summary,
        analysis: entry(Recipe {
            name,
            f: &[f],
            m: 0,
            u: None,
            cert,
            t0: 0.0,
            x0: vec![2.0],
            tf: 50.0,
            region: SampleBox::symmetric((0.0, 50.0), 5.0, 1, 0.0, 0),
        }),
        reference_kappa: Some(kref),
    }
}

fn abs_cos_entry(iss: bool) -> CatalogEntry {
    let (name, summary) = if iss {
        (
            "abs_cos_iss",
            "scalar system with sign-changing rate, bounded input, ISS sum envelope",
        )
    } else {
        (
            "abs_cos_free",
            "scalar system with sign-changing rate, free response, uniform exponential envelope",
        )
    };
    let mut cert = Certificate::new(
        if iss { Theorem::T3Iss } else { Theorem::T1 },
        expr("0.5*x1^2", &Scope::system(1, 0)),
        signal("2/(1+t) - t*abs(cos(t))", 0.0),
        power("0.5", 2.0, Role::Lower),
        power("0.5", 2.0, Role::Upper),
    );
    if iss {
        cert = cert.with_rho(expr("s", &Scope::GAIN));
    }
    let mut a = entry(Recipe {
        name,
        f: &["(1/(1+t+x1^2) - t*abs(cos(t)))*x1 + 2*t*cos(abs(t))/(1+x1^2)*u1"],
        m: 1,
        u: Some(if iss { &["0.1*sin(t)"] } else { &["0"] }),
        cert,
        t0: 0.0,
        x0: vec![1.0],
        tf: 60.0,
        region: SampleBox::symmetric((0.0, 30.0), 3.0, 1, if iss { 1.0 } else { 0.0 }, 1),
    });
    a.certified_pair = Some((ABS_COS_ALPHA, abs_cos_beta()));
    if !iss {
        a.reference = Some(ReferenceEnvelope::Exponential {
            scale: ((1.0 + 1.5 * PI).ln() + 1.0).exp(),
            rate: 2.0 / (3.0 * PI),
        });
    }
    CatalogEntry {
        name: name.to_string(),
        summary,
        analysis: a,
        reference_kappa: None,
    }
}

/// Every shipped system.
pub fn catalog() -> Vec<CatalogEntry> {
    let sin_den = {
        let name = "sin_denominator";
        let summary = "scalar decay with denominator t + sin x, rational envelope";
        let cert = Certificate::new(
            Theorem::T1,
            expr("x1^2", &Scope::system(1, 0)),
            signal("-2/(1+t)", 1.0),
            power("1", 2.0, Role::Lower),
            power("1", 2.0, Role::Upper),
        );
        let mut a = entry(Recipe {
            name,
            f: &["-x1/(t + sin(x1))"],
            m: 0,
            u: None,
            cert,
            t0: 2.0,
            x0: vec![1.0],
            tf: 50.0,
            region: SampleBox::symmetric((2.0, 50.0), 3.0, 1, 0.0, 0),
        });
        a.reference = Some(ReferenceEnvelope::Rational {
            scale: 1.0,
            power: 1.0,
        });
        CatalogEntry {
            name: name.to_string(),
            summary,
            analysis: a,
            reference_kappa: None,
        }
    };
    vec![
        sin_den,
        planar_rotation(1, 1),
        planar_rotation(2, 2),
        drift_entry(
            "drift_linear_h",
            "bounded sinusoidal drift with h(x) = x, vanishing kappa",
            "-(1+t)/(1+t^2)*x1 + sin(x1)/(1+t^2)",
            "2/(1+t^2)",
            |t, t0| 2.0 * (t - t0) / (1.0 + t * t),
        ),
        drift_entry(
            "drift_cubic_h",
            "bounded sinusoidal drift with h(x) = x^3, vanishing kappa",
            "-(1+t)/(1+t^2)*x1 + sin(x1^3)/(1+t^2)",
            "2/(1+t^2)",
            |t, t0| 2.0 * (t - t0) / (1.0 + t * t),
        ),
        abs_cos_entry(false),
        abs_cos_entry(true),
        drift_entry(
            "drift_not_exponential",
            "drift certificate whose rate is asymptotic but not exponential",
            "-t/(1+t^2)*x1 + sin(x1)/((1+t^2)*(1+x1^2))",
            "1/(1+t^2)",
            |t, t0| (t - t0) / (1.0 + t * t),
        ),
    ]
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}
