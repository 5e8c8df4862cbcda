//! Scalar rate functions `μ(t)`: integration, the transition factor
//! `φ(t, t₀) = exp ∫ μ`, and finite-horizon stability classification.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{parse_in, Binding, EvalError, Expr, ParseError, Scope};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 60;
/// `exp` of anything above this is reported as `+∞`.
pub const LOG_OVERFLOW: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("adaptive quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    NoConvergence { achieved: f64, requested: f64 },
    #[error("integrand is not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid arguments: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("a scalar signal may only depend on t, found `{0}`")]
    Scope(String),
    #[error("piecewise signal needs strictly increasing breaks and one more value than breaks")]
    Piecewise,
}

/// Piecewise constant function, right-continuous at its breaks:
/// `values[0]` before `breaks[0]`, `values[i]` on `[breaks[i-1], breaks[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() != breaks.len() + 1
            || breaks.windows(2).any(|w| w[0] >= w[1])
            || breaks.iter().chain(&values).any(|v| !v.is_finite())
        {
            return Err(SignalError::Piecewise);
        }
        Ok(PiecewiseConstant { breaks, values })
    }

    pub fn value(&self, t: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= t);
        self.values[idx]
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalBody {
    Expr(Expr),
    Piecewise(PiecewiseConstant),
}

/// Where the integrand is allowed to be non-smooth.
#[derive(Debug, Clone, PartialEq)]
pub enum KinkHints {
    None,
    Points(Vec<f64>),
    /// `offset + k·period` for integer `k`.
    Periodic {
        offset: f64,
        period: f64,
    },
    /// Sign changes of every `abs` / `min` / `max` argument, located by
    /// scanning with the given step and bisecting.
    Detect {
        step: f64,
    },
}

/// A function of time on `J = [t#, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSignal {
    body: SignalBody,
    domain_start: f64,
    kinks: KinkHints,
}

impl fmt::Display for ScalarSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            SignalBody::Expr(e) => write!(f, "{e}"),
            SignalBody::Piecewise(p) => write!(f, "piecewise{:?}/{:?}", p.breaks, p.values),
        }
    }
}

impl ScalarSignal {
    pub fn from_expr(expr: Expr, domain_start: f64) -> Result<Self, SignalError> {
        if let Some(v) = expr.check_scope(&Scope::TIME) {
            return Err(SignalError::Scope(v.to_string()));
        }
        Ok(ScalarSignal {
            body: SignalBody::Expr(expr),
            domain_start,
            kinks: KinkHints::Detect { step: 0.02 },
        })
    }

    /// Parses an expression in `t`; kinks of `abs`/`min`/`max` are detected.
    pub fn parse(source: &str, domain_start: f64) -> Result<Self, SignalError> {
        ScalarSignal::from_expr(parse_in(source, &Scope::TIME)?, domain_start)
    }

    pub fn constant(c: f64, domain_start: f64) -> Self {
        ScalarSignal {
            body: SignalBody::Expr(Expr::constant(c)),
            domain_start,
            kinks: KinkHints::None,
        }
    }

    pub fn piecewise(p: PiecewiseConstant, domain_start: f64) -> Self {
        ScalarSignal {
            body: SignalBody::Piecewise(p),
            domain_start,
            kinks: KinkHints::None,
        }
    }

    pub fn with_kinks(mut self, kinks: KinkHints) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn body(&self) -> &SignalBody {
        &self.body
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.body {
            SignalBody::Expr(e) => Some(e),
            SignalBody::Piecewise(_) => None,
        }
    }

    pub fn domain_start(&self) -> f64 {
        self.domain_start
    }

    pub fn kinks(&self) -> &KinkHints {
        &self.kinks
    }

    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        match &self.body {
            SignalBody::Expr(e) => e.eval(&Binding::time(t)),
            SignalBody::Piecewise(p) => Ok(p.value(t)),
        }
    }

    /// Non-smooth points strictly inside `(a, b)`, sorted.
    pub fn breakpoints(&self, a: f64, b: f64) -> Result<Vec<f64>, EvalError> {
        let mut pts = Vec::new();
        if let SignalBody::Piecewise(p) = &self.body {
            pts.extend(p.breaks.iter().copied());
        }
        match &self.kinks {
            KinkHints::None => {}
            KinkHints::Points(v) => pts.extend(v.iter().copied()),
            KinkHints::Periodic { offset, period } if *period > 0.0 => {
                let k0 = ((a - offset) / period).floor() as i64;
                let k1 = ((b - offset) / period).ceil() as i64;
                pts.extend((k0..=k1).map(|k| offset + k as f64 * period));
            }
            KinkHints::Periodic { .. } => {}
            KinkHints::Detect { step } => {
                if let SignalBody::Expr(e) = &self.body {
                    for g in e.kink_arguments() {
                        pts.extend(sign_changes(|t| g.eval(&Binding::time(t)), a, b, *step)?);
                    }
                }
            }
        }
        Ok(clean_points(pts, a, b))
    }
}

fn clean_points(mut pts: Vec<f64>, a: f64, b: f64) -> Vec<f64> {
    let guard = 1e-13 * (1.0 + a.abs().max(b.abs()));
    pts.retain(|&p| p.is_finite() && p > a + guard && p < b - guard);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    pts.dedup_by(|x, y| (*x - *y).abs() <= guard);
    pts
}

/// Zeros of `g` on `[a, b]` where it changes sign between scan points.
pub fn sign_changes<F>(g: F, a: f64, b: f64, step: f64) -> Result<Vec<f64>, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if b <= a {
        return Ok(Vec::new());
    }
    let count = (((b - a) / step).ceil() as usize).max(1);
    let h = (b - a) / count as f64;
    let mut roots = Vec::new();
    let mut prev_t = a;
    let mut prev = g(a)?;
    for i in 1..=count {
        let t = if i == count { b } else { a + i as f64 * h };
        let cur = g(t)?;
        if prev == 0.0 {
            roots.push(prev_t);
        } else if prev * cur < 0.0 {
            let (mut lo, mut hi, mut glo) = (prev_t, t, prev);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid)?;
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev = cur;
    }
    Ok(roots)
}

// 21-point Gauss–Kronrod rule: Kronrod abscissae and weights, and the
// weights of the embedded 10-point Gauss rule (odd-indexed abscissae).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208745466639,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F, E>(f: &F, a: f64, b: f64, depth: u32) -> Result<Panel, QuadError>
where
    F: Fn(f64) -> Result<f64, E>,
    E: Into<QuadError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> Result<f64, QuadError> {
        let v = f(t).map_err(Into::into)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { t })
        }
    };
    let fc = eval(center)?;
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let dh = half.abs();
    resabs *= dh;
    resasc *= dh;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    Ok(Panel {
        a,
        b,
        value: resk * half,
        error: err,
        abs: resabs,
        depth,
    })
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

const MAX_PANELS: usize = 200_000;

/// Globally adaptive 21-point Gauss–Kronrod quadrature of `f` on `[a, b]`,
/// starting from panels split at `breaks`.
///
/// Converges when the summed error estimate drops below
/// `max(tol, 100·ε·∫|f|)`; the second term is the floating-point floor.
pub fn adaptive_gk<F, E>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    max_depth: u32,
) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> Result<f64, E>,
    E: Into<QuadError>,
{
    if !(tol > 0.0) {
        return Err(QuadError::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    edges.extend(clean_points(breaks.to_vec(), lo, hi));
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Panel> = Vec::new();
    for w in edges.windows(2) {
        heap.push(gk21(&f, w[0], w[1], 0)?);
    }
    let mut total_panels = heap.len();
    loop {
        let (mut val, mut err, mut abs) = (0.0, 0.0, 0.0);
        for p in heap.iter().chain(&settled) {
            val += p.value;
            err += p.error;
            abs += p.abs;
        }
        let target = tol.max(100.0 * f64::EPSILON * abs);
        if err <= target {
            return Ok(QuadResult {
                value: sign * val,
                error: err,
                panels: total_panels,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Err(QuadError::NoConvergence {
                    achieved: err,
                    requested: tol,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= max_depth || mid <= worst.a || mid >= worst.b {
            settled.push(worst);
            continue;
        }
        if total_panels >= MAX_PANELS {
            return Err(QuadError::NoConvergence {
                achieved: err,
                requested: tol,
            });
        }
        heap.push(gk21(&f, worst.a, mid, worst.depth + 1)?);
        heap.push(gk21(&f, mid, worst.b, worst.depth + 1)?);
        total_panels += 1;
    }
}

fn check_interval(signal: &ScalarSignal, a: f64, b: f64) -> Result<(), QuadError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::Precondition(format!(
            "non-finite interval [{a}, {b}]"
        )));
    }
    if a < signal.domain_start {
        return Err(QuadError::Precondition(format!(
            "interval start {a} precedes the domain start {}",
            signal.domain_start
        )));
    }
    if b < a {
        return Err(QuadError::Precondition(format!(
            "interval end {b} precedes start {a}"
        )));
    }
    Ok(())
}

/// `∫ₐᵇ μ(s) ds` with absolute error at most `tol`.
pub fn integrate(signal: &ScalarSignal, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    integrate_report(signal, a, b, tol).map(|r| r.value)
}

pub fn integrate_report(
    signal: &ScalarSignal,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult, QuadError> {
    check_interval(signal, a, b)?;
    let breaks = signal.breakpoints(a, b)?;
    adaptive_gk(|t| signal.value(t), a, b, &breaks, tol, DEFAULT_MAX_DEPTH)
}

/// `φ(t, t₀) = exp ∫_{t₀}^{t} μ`; `+∞` once the exponent exceeds 700.
pub fn transition_factor(signal: &ScalarSignal, t: f64, t0: f64) -> Result<f64, QuadError> {
    Ok(guarded_exp(integrate(signal, t0, t, DEFAULT_TOL)?))
}

pub fn guarded_exp(log: f64) -> f64 {
    if log > LOG_OVERFLOW {
        f64::INFINITY
    } else {
        log.exp()
    }
}

/// Maximum over start points in one period of `∫ₜ^{t+T} μ`.
/// A negative value certifies stability of a `T`-periodic `μ`.
pub fn periodic_test(signal: &ScalarSignal, period: f64) -> Result<f64, QuadError> {
    if !(period > 0.0) {
        return Err(QuadError::Precondition(format!(
            "period must be positive, got {period}"
        )));
    }
    let start = signal.domain_start;
    (0..64)
        .into_par_iter()
        .map(|i| {
            let t = start + period * i as f64 / 64.0;
            integrate(signal, t, t + period, DEFAULT_TOL)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `∫ₐᵇ max{μ(s), 0} ds`, with panels split where `μ` crosses zero.
pub fn positive_part_integral(signal: &ScalarSignal, a: f64, b: f64) -> Result<f64, QuadError> {
    check_interval(signal, a, b)?;
    let mut breaks = signal.breakpoints(a, b)?;
    breaks.extend(sign_changes(|t| signal.value(t), a, b, 0.02)?);
    adaptive_gk(
        |t| signal.value(t).map(|v| v.max(0.0)),
        a,
        b,
        &breaks,
        DEFAULT_TOL,
        DEFAULT_MAX_DEPTH,
    )
    .map(|r| r.value)
}

/// Cumulative integral `M(t) = ∫_{start}^{t} μ` tabulated once on a grid,
/// so that `φ(t, s) = exp(M(t) − M(s))`.
#[derive(Debug, Clone)]
pub struct TransitionFactor {
    signal: ScalarSignal,
    tol: f64,
    grid: Vec<f64>,
    cum: Vec<f64>,
}

impl TransitionFactor {
    /// Tabulates on `[start, end]` with spacing at most `step`; `extra`
    /// points (and the signal's breakpoints) are inserted into the grid.
    pub fn build(
        signal: &ScalarSignal,
        start: f64,
        end: f64,
        step: f64,
        tol: f64,
        extra: &[f64],
    ) -> Result<Self, QuadError> {
        check_interval(signal, start, end)?;
        if !(step > 0.0) {
            return Err(QuadError::Precondition(format!(
                "grid step must be positive, got {step}"
            )));
        }
        let count = (((end - start) / step).ceil() as usize).max(1);
        let mut pts: Vec<f64> = (1..count)
            .map(|i| start + (end - start) * i as f64 / count as f64)
            .collect();
        pts.extend_from_slice(extra);
        pts.extend(signal.breakpoints(start, end)?);
        let mut grid = vec![start];
        grid.extend(clean_points(pts, start, end));
        if end > start {
            grid.push(end);
        }
        let span = (end - start).max(f64::MIN_POSITIVE);
        let pieces = grid
            .par_windows(2)
            .map(|w| {
                let cell_tol = (tol * (w[1] - w[0]) / span).max(f64::MIN_POSITIVE);
                let breaks = signal.breakpoints(w[0], w[1])?;
                adaptive_gk(
                    |t| signal.value(t),
                    w[0],
                    w[1],
                    &breaks,
                    cell_tol,
                    DEFAULT_MAX_DEPTH,
                )
                .map(|r| r.value)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut cum = Vec::with_capacity(grid.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for p in pieces {
            acc += p;
            cum.push(acc);
        }
        Ok(TransitionFactor {
            signal: signal.clone(),
            tol,
            grid,
            cum,
        })
    }

    pub fn signal(&self) -> &ScalarSignal {
        &self.signal
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap_or(&self.grid[0])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `M` at each grid point.
    pub fn cumulative_table(&self) -> &[f64] {
        &self.cum
    }

    /// `M(t) = ∫_{start}^{t} μ` for any `t ≥ start` (past the table end the
    /// remainder is integrated on demand).
    pub fn cumulative(&self, t: f64) -> Result<f64, QuadError> {
        if t < self.start() {
            return Err(QuadError::Precondition(format!(
                "t = {t} precedes the tabulated start {}",
                self.start()
            )));
        }
        let idx = self.grid.partition_point(|&g| g <= t).saturating_sub(1);
        let base = self.grid[idx];
        if base == t {
            return Ok(self.cum[idx]);
        }
        let span = (self.end() - self.start()).max(1.0);
        let local_tol = (self.tol * (t - base).max(1e-3) / span).max(1e-15);
        Ok(self.cum[idx] + integrate(&self.signal, base, t, local_tol)?)
    }

    /// `ln φ(t, s) = ∫ₛᵗ μ`.
    pub fn log_phi(&self, t: f64, s: f64) -> Result<f64, QuadError> {
        Ok(self.cumulative(t)? - self.cumulative(s)?)
    }

    pub fn phi(&self, t: f64, s: f64) -> Result<f64, QuadError> {
        Ok(guarded_exp(self.log_phi(t, s)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    None,
    Asymptotic,
    Exponential,
    UniformExponential,
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityClass::None => "none",
            StabilityClass::Asymptotic => "asymptotic",
            StabilityClass::Exponential => "exponential",
            StabilityClass::UniformExponential => "uniform_exponential",
        })
    }
}

/// Classification of a rate function on a finite horizon, with the
/// `(α, β(t₀))` evidence for `∫_{t₀}^{t} μ ≤ −α(t − t₀) + β(t₀)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    pub alpha: f64,
    /// `(t₀, β(t₀))` pairs.
    pub beta_of_t0: Vec<(f64, f64)>,
    pub horizon: f64,
    pub t0_samples: Vec<f64>,
    /// Smallest slack `−α(t−t₀) + β(t₀) − ∫μ` over the checked grid.
    pub margin: f64,
    /// Verified on the finite horizon; never a proof.
    pub certified: bool,
    pub inconclusive: bool,
    pub notes: Vec<String>,
}

impl StabilityVerdict {
    /// `β` for `t₀`, or the maximum over the samples when `t₀` was not sampled.
    pub fn beta_at(&self, t0: f64) -> Option<f64> {
        self.beta_of_t0
            .iter()
            .find(|(s, _)| (s - t0).abs() <= 1e-12 * (1.0 + t0.abs()))
            .map(|(_, b)| *b)
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_of_t0.iter().map(|(_, b)| *b).fold(0.0, f64::max)
    }

    /// Checks a hand-derived pair `(α, β)` against the tabulated integral for
    /// every `t₀` sample and grid point up to the horizon.
    pub fn from_certified_pair(
        signal: &ScalarSignal,
        alpha: f64,
        beta: f64,
        horizon: f64,
        t0_samples: &[f64],
    ) -> Result<Self, QuadError> {
        let start = t0_samples.iter().copied().fold(horizon, f64::min);
        let tf = TransitionFactor::build(signal, start, horizon, 0.05, DEFAULT_TOL, t0_samples)?;
        let mut margin = f64::INFINITY;
        for &t0 in t0_samples {
            let m0 = tf.cumulative(t0)?;
            for (g, c) in tf.grid.iter().zip(&tf.cum).filter(|(g, _)| **g >= t0) {
                margin = margin.min(-alpha * (g - t0) + beta - (c - m0));
            }
        }
        let ok = margin >= -1e-8 && alpha > 0.0;
        Ok(StabilityVerdict {
            class: if ok {
                StabilityClass::UniformExponential
            } else {
                StabilityClass::None
            },
            alpha,
            beta_of_t0: t0_samples.iter().map(|&t| (t, beta)).collect(),
            horizon,
            t0_samples: t0_samples.to_vec(),
            margin,
            certified: ok,
            inconclusive: false,
            notes: vec![if ok {
                "supplied (alpha, beta) pair holds on the sampled grid".to_string()
            } else {
                format!("supplied (alpha, beta) pair violated by {:.3e}", -margin)
            }],
        })
    }
}

/// Tuning for [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    /// Integral value that counts as "has gone to −∞".
    pub divergence_threshold: f64,
    /// Minimum decrease of the running tail maximum per doubling of the
    /// elapsed time for the integral to count as diverging.
    pub drop_per_doubling: f64,
    /// Windowed decay rate on the last window over the rate on the
    /// previous one; below this the rate is fading (asymptotic only).
    pub rate_retention: f64,
    pub beta_cap: f64,
    /// Allowed growth of `e^β` across later `t₀` samples, as a ratio.
    pub uniform_ratio: f64,
    pub min_uniform_samples: usize,
    /// Shortest `horizon − t₀` the tests can work with.
    pub min_elapsed: f64,
    pub grid_step: f64,
    pub tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            divergence_threshold: -30.0,
            drop_per_doubling: 0.1,
            rate_retention: 0.6,
            beta_cap: 1e4,
            uniform_ratio: 1.1,
            min_uniform_samples: 8,
            min_elapsed: 16.0,
            grid_step: 0.05,
            tol: DEFAULT_TOL,
        }
    }
}

pub const DEFAULT_HORIZON: f64 = 200.0;
pub const DEFAULT_ALPHA_MIN: f64 = 1e-3;

/// Eight `t₀` samples spread over the first quarter of the horizon.
pub fn default_t0_samples(domain_start: f64, horizon: f64) -> Vec<f64> {
    let span = (horizon - domain_start) / 4.0;
    (0..8)
        .map(|i| domain_start + span * i as f64 / 7.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Trend {
    Diverging,
    Bounded,
    Unclear,
}

struct T0Analysis {
    t0: f64,
    trend: Trend,
    exponential: bool,
    alpha_hi: f64,
    note: Option<String>,
}

/// Integral `∫_{t₀}^{grid}` over grid points from `t₀` on, as `(t, I)`.
fn integral_from(tf: &TransitionFactor, t0: f64) -> Result<Vec<(f64, f64)>, QuadError> {
    let m0 = tf.cumulative(t0)?;
    let first = tf.grid.partition_point(|&g| g < t0);
    let mut out = vec![(t0, 0.0)];
    out.extend(
        tf.grid[first..]
            .iter()
            .zip(&tf.cum[first..])
            .filter(|(g, _)| **g > t0)
            .map(|(g, c)| (*g, c - m0)),
    );
    Ok(out)
}

/// `β(t₀) = max over the grid of ∫_{t₀}^{t} μ + α(t − t₀)`, never below 0.
pub fn beta_for(tf: &TransitionFactor, t0: f64, alpha: f64) -> Result<f64, QuadError> {
    Ok(integral_from(tf, t0)?
        .iter()
        .map(|(t, i)| i + alpha * (t - t0))
        .fold(0.0, f64::max))
}

/// Head and tail maxima of `∫ + α(t − t₀)` split at the half-way point.
fn head_tail(curve: &[(f64, f64)], t0: f64, split: f64, alpha: f64) -> (f64, f64) {
    let mut head = f64::NEG_INFINITY;
    let mut tail = f64::NEG_INFINITY;
    for (t, i) in curve {
        let g = i + alpha * (t - t0);
        if *t <= split {
            head = head.max(g);
        } else {
            tail = tail.max(g);
        }
    }
    (head, tail)
}

fn alpha_feasible(curve: &[(f64, f64)], t0: f64, split: f64, alpha: f64, cap: f64) -> bool {
    let (head, tail) = head_tail(curve, t0, split, alpha);
    head.max(tail) <= cap && tail <= head + 1e-9 * (1.0 + head.abs())
}

fn analyse_t0(
    tf: &TransitionFactor,
    t0: f64,
    horizon: f64,
    alpha_min: f64,
    cfg: &ClassifyConfig,
) -> Result<T0Analysis, QuadError> {
    let elapsed = horizon - t0;
    if elapsed < cfg.min_elapsed {
        return Ok(T0Analysis {
            t0,
            trend: Trend::Unclear,
            exponential: false,
            alpha_hi: 0.0,
            note: Some(format!(
                "horizon too short: {elapsed} past t0 = {t0}, need {}",
                cfg.min_elapsed
            )),
        });
    }
    let curve = integral_from(tf, t0)?;
    let checkpoints: Vec<f64> = [16.0, 8.0, 4.0, 2.0]
        .iter()
        .map(|d| t0 + elapsed / d)
        .collect();
    let tail_sup = |c: f64| {
        curve
            .iter()
            .filter(|(t, _)| *t >= c)
            .map(|(_, i)| *i)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let sups: Vec<f64> = checkpoints.iter().map(|&c| tail_sup(c)).collect();
    let drops: Vec<f64> = sups.windows(2).map(|w| w[0] - w[1]).collect();
    let last_value = curve.last().map(|(_, i)| *i).unwrap_or(0.0);
    let diverging = (last_value <= cfg.divergence_threshold && drops[2] > 0.0)
        || drops.iter().all(|&d| d >= cfg.drop_per_doubling);
    let trend = if diverging {
        Trend::Diverging
    } else if drops.iter().all(|&d| d < cfg.drop_per_doubling) {
        Trend::Bounded
    } else {
        Trend::Unclear
    };
    if trend != Trend::Diverging {
        let note = match trend {
            Trend::Bounded => format!("integral from t0 = {t0} does not diverge on the horizon"),
            _ => format!("integral from t0 = {t0} decreases irregularly; extend the horizon"),
        };
        return Ok(T0Analysis {
            t0,
            trend,
            exponential: false,
            alpha_hi: 0.0,
            note: Some(note),
        });
    }

    // average decay rates over [E/8, E/4], [E/4, E/2], [E/2, E] past t0
    let marks = [checkpoints[1], checkpoints[2], checkpoints[3], horizon];
    let m: Vec<f64> = marks
        .iter()
        .map(|&c| tf.cumulative(c))
        .collect::<Result<_, _>>()?;
    let rates: Vec<f64> = (0..3)
        .map(|j| -(m[j + 1] - m[j]) / (marks[j + 1] - marks[j]))
        .collect();
    let sustained =
        rates[1] >= alpha_min && rates[2] >= alpha_min && rates[2] >= cfg.rate_retention * rates[1];
    let alpha_hi = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let note = if sustained {
        None
    } else {
        Some(format!(
            "not exponential at horizon: windowed decay rates {:.3e}, {:.3e}, {:.3e} from t0 = {t0} are fading",
            rates[0], rates[1], rates[2]
        ))
    };
    Ok(T0Analysis {
        t0,
        trend,
        exponential: sustained,
        alpha_hi,
        note,
    })
}

/// Largest `α ≤ alpha_hi` for which the `β` bound is already attained in
/// the first half of the window and stays below the cap.
fn fit_alpha(
    tf: &TransitionFactor,
    t0: f64,
    horizon: f64,
    alpha_hi: f64,
    cap: f64,
) -> Result<f64, QuadError> {
    let curve = integral_from(tf, t0)?;
    let split = t0 + 0.5 * (horizon - t0);
    if alpha_feasible(&curve, t0, split, alpha_hi, cap) {
        return Ok(alpha_hi);
    }
    if !alpha_feasible(&curve, t0, split, 0.0, cap) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, alpha_hi);
    while hi - lo > 1e-10 * alpha_hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if alpha_feasible(&curve, t0, split, mid, cap) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Classifies `μ` as not stable, asymptotically stable, exponentially
/// stable or uniformly exponentially stable, on `[t₀, horizon]` for every
/// sampled `t₀`.
pub fn classify(
    signal: &ScalarSignal,
    horizon: f64,
    t0_samples: &[f64],
    alpha_min: f64,
) -> Result<StabilityVerdict, QuadError> {
    classify_with(
        signal,
        horizon,
        t0_samples,
        alpha_min,
        &ClassifyConfig::default(),
    )
}

pub fn classify_with(
    signal: &ScalarSignal,
    horizon: f64,
    t0_samples: &[f64],
    alpha_min: f64,
    cfg: &ClassifyConfig,
) -> Result<StabilityVerdict, QuadError> {
    if t0_samples.is_empty() {
        return Err(QuadError::Precondition(
            "at least one t0 sample is required".into(),
        ));
    }
    if !(alpha_min > 0.0) {
        return Err(QuadError::Precondition(format!(
            "alpha_min must be positive, got {alpha_min}"
        )));
    }
    let mut t0s = t0_samples.to_vec();
    t0s.sort_by(f64::total_cmp);
    if t0s.last().is_some_and(|&t| t >= horizon) {
        return Err(QuadError::Precondition(format!(
            "horizon {horizon} must exceed every t0 sample"
        )));
    }
    let tf = TransitionFactor::build(signal, t0s[0], horizon, cfg.grid_step, cfg.tol, &t0s)?;
    let analyses = t0s
        .iter()
        .map(|&t0| analyse_t0(&tf, t0, horizon, alpha_min, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut notes: Vec<String> = analyses.iter().filter_map(|a| a.note.clone()).collect();
    notes.dedup();
    let mut verdict = StabilityVerdict {
        class: StabilityClass::None,
        alpha: 0.0,
        beta_of_t0: Vec::new(),
        horizon,
        t0_samples: t0s.clone(),
        margin: f64::NAN,
        certified: false,
        inconclusive: false,
        notes,
    };
    if analyses.iter().any(|a| a.trend == Trend::Bounded) {
        return Ok(verdict);
    }
    if analyses.iter().any(|a| a.trend == Trend::Unclear) {
        verdict.inconclusive = true;
        return Ok(verdict);
    }
    verdict.class = StabilityClass::Asymptotic;
    verdict.certified = true;
    if !analyses.iter().all(|a| a.exponential) {
        verdict
            .notes
            .push(format!("not exponential at horizon {horizon}"));
        return Ok(verdict);
    }

    let alphas = analyses
        .iter()
        .map(|a| fit_alpha(&tf, a.t0, horizon, a.alpha_hi, cfg.beta_cap))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    if alpha < alpha_min {
        verdict.notes.push(format!(
            "fitted alpha {alpha:.3e} is below alpha_min {alpha_min:.3e}: not exponential at horizon {horizon}"
        ));
        return Ok(verdict);
    }
    let mut margin = f64::INFINITY;
    let mut betas = Vec::with_capacity(t0s.len());
    for &t0 in &t0s {
        let curve = integral_from(&tf, t0)?;
        let beta = curve
            .iter()
            .map(|(t, i)| i + alpha * (t - t0))
            .fold(0.0, f64::max);
        for (t, i) in &curve {
            margin = margin.min(-alpha * (t - t0) + beta - i);
        }
        betas.push((t0, beta));
    }
    verdict.class = StabilityClass::Exponential;
    verdict.alpha = alpha;
    verdict.margin = margin;
    verdict.beta_of_t0 = betas;

    if t0s.len() < cfg.min_uniform_samples {
        verdict.notes.push(format!(
            "uniformity needs at least {} t0 samples, got {}",
            cfg.min_uniform_samples,
            t0s.len()
        ));
        return Ok(verdict);
    }
    let half = t0s.len() / 2;
    let early = verdict.beta_of_t0[..half]
        .iter()
        .map(|(_, b)| *b)
        .fold(0.0, f64::max);
    let late = verdict.beta_of_t0[half..]
        .iter()
        .map(|(_, b)| *b)
        .fold(0.0, f64::max);
    if late <= early + cfg.uniform_ratio.ln() {
        verdict.class = StabilityClass::UniformExponential;
    } else {
        verdict.notes.push(format!(
            "beta grows with t0 ({early:.4} early, {late:.4} late): not uniform"
        ));
    }
    Ok(verdict)
}

/// Classification of a `T`-periodic rate: stable exactly when the
/// one-period integral is negative, in which case `α = c/T`.
pub fn classify_periodic(
    signal: &ScalarSignal,
    period: f64,
) -> Result<StabilityVerdict, QuadError> {
    let worst = periodic_test(signal, period)?;
    let start = signal.domain_start;
    let mut verdict = StabilityVerdict {
        class: StabilityClass::None,
        alpha: 0.0,
        beta_of_t0: Vec::new(),
        horizon: start + 2.0 * period,
        t0_samples: Vec::new(),
        margin: f64::NAN,
        certified: false,
        inconclusive: false,
        notes: vec![format!("maximum one-period integral {worst:.6e}")],
    };
    if worst >= -1e-9 {
        verdict
            .notes
            .push("one-period integral is not negative".into());
        return Ok(verdict);
    }
    let alpha = -worst / period;
    let tf = TransitionFactor::build(
        signal,
        start,
        start + 2.0 * period,
        period / 256.0,
        DEFAULT_TOL,
        &[],
    )?;
    let starts: Vec<f64> = tf
        .grid
        .iter()
        .copied()
        .filter(|&g| g < start + period)
        .collect();
    let mut beta: f64 = 0.0;
    for &s in &starts {
        let curve = integral_from(&tf, s)?;
        for (t, i) in curve.iter().filter(|(t, _)| *t <= s + period) {
            beta = beta.max(i + alpha * (t - s));
        }
    }
    verdict.class = StabilityClass::UniformExponential;
    verdict.alpha = alpha;
    verdict.beta_of_t0 = starts.iter().map(|&s| (s, beta)).collect();
    verdict.t0_samples = starts;
    verdict.margin = 0.0;
    verdict.certified = true;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sig(src: &str) -> ScalarSignal {
        ScalarSignal::parse(src, 0.0).unwrap()
    }

    #[test]
    fn inverse_time_integral_closed_form() {
        let mu = sig("-2/(1+t)");
        for (t0, t) in [(0.0, 1.0), (2.0, 50.0), (10.0, 100.0)] {
            let got = integrate(&mu, t0, t, 1e-10).unwrap();
            let exact = 2.0 * ((1.0 + t0) / (1.0 + t)).ln();
            assert!((got - exact).abs() <= 1e-9, "{t0} {t}: {got} vs {exact}");
        }
    }

    #[test]
    fn zero_signal_integrates_to_zero() {
        let z = sig("0");
        assert_eq!(integrate(&z, 0.0, 17.0, 1e-10).unwrap(), 0.0);
        assert_eq!(integrate(&z, 3.0, 3.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn interval_preconditions() {
        let mu = ScalarSignal::parse("-1", 1.0).unwrap();
        assert!(matches!(
            integrate(&mu, 0.0, 2.0, 1e-10),
            Err(QuadError::Precondition(_))
        ));
        assert!(matches!(
            integrate(&mu, 2.0, 1.5, 1e-10),
            Err(QuadError::Precondition(_))
        ));
        assert!(matches!(
            integrate(&mu, 1.0, 2.0, 0.0),
            Err(QuadError::Precondition(_))
        ));
    }

    #[test]
    fn domain_errors_propagate() {
        let mu = sig("ln(t-1)");
        assert!(matches!(
            integrate(&mu, 0.0, 2.0, 1e-10),
            Err(QuadError::Eval(_))
        ));
    }

    #[test]
    fn transition_factor_closed_forms() {
        let mu = sig("-2/(1+t)");
        let (t0, t) = (2.0_f64, 9.0_f64);
        let want = ((1.0 + t0) / (1.0 + t)).powi(2);
        assert!((transition_factor(&mu, t, t0).unwrap() - want).abs() < 1e-12);
        assert_eq!(transition_factor(&mu, 4.0, 4.0).unwrap(), 1.0);

        let r1 = sig("-2*t/(1+t^2)");
        let (s, t) = (1.5_f64, 7.25_f64);
        let want = (1.0 + s * s) / (1.0 + t * t);
        assert!((transition_factor(&r1, t, s).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn transition_factor_overflow_is_flagged() {
        let mu = sig("1");
        assert_eq!(transition_factor(&mu, 800.0, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tabulated_factor_matches_direct_integration() {
        let mu = sig("2/(1+t) - t*abs(cos(t))");
        let tf = TransitionFactor::build(&mu, 0.0, 40.0, 0.05, 1e-10, &[]).unwrap();
        for (t, s) in [(3.3, 0.7), (39.9, 12.2), (25.0, 25.0)] {
            let direct = integrate(&mu, s, t, 1e-10).unwrap();
            assert!((tf.log_phi(t, s).unwrap() - direct).abs() < 1e-8);
        }
        // past the table end the remainder is integrated on demand
        let far = integrate(&mu, 0.0, 45.0, 1e-10).unwrap();
        assert!((tf.cumulative(45.0).unwrap() - far).abs() < 1e-8);
    }

    #[test]
    fn window_integral_of_abs_cos_rate() {
        let mu = sig("2/(1+t) - t*abs(cos(t))");
        for k in 0..=30 {
            let t = k as f64;
            let w = integrate(&mu, t, t + 1.5 * PI, 1e-10).unwrap();
            assert!(w <= -2.0, "window at {t}: {w}");
        }
    }

    #[test]
    fn periodic_kink_hints_agree_with_detection() {
        let detect = sig("t*abs(cos(t))");
        let hinted = detect.clone().with_kinks(KinkHints::Periodic {
            offset: PI / 2.0,
            period: PI,
        });
        let none = detect.clone().with_kinks(KinkHints::None);
        let a = integrate(&detect, 0.3, 20.0, 1e-10).unwrap();
        let b = integrate(&hinted, 0.3, 20.0, 1e-10).unwrap();
        let c = integrate(&none, 0.3, 20.0, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9);
        let pts = detect.breakpoints(0.0, 10.0).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[0] - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_signals_integrate_exactly() {
        let p = PiecewiseConstant::new(vec![1.0, 2.5], vec![-1.0, 3.0, 0.5]).unwrap();
        let s = ScalarSignal::piecewise(p, 0.0);
        assert_eq!(s.value(1.0).unwrap(), 3.0);
        let v = integrate(&s, 0.0, 4.0, 1e-12).unwrap();
        assert!((v - (-1.0 + 4.5 + 0.75)).abs() < 1e-12);
        assert!(PiecewiseConstant::new(vec![2.0, 1.0], vec![0.0, 0.0, 0.0]).is_err());
        assert!(PiecewiseConstant::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn periodic_test_goldens() {
        assert!(periodic_test(&sig("sin(t)"), 2.0 * PI).unwrap().abs() < 1e-9);
        assert!((periodic_test(&sig("-1"), 1.0).unwrap() + 1.0).abs() < 1e-12);
        let v = periodic_test(&sig("sin(t) - 0.1"), 2.0 * PI).unwrap();
        assert!((v + 0.2 * PI).abs() < 1e-9);
        assert!(periodic_test(&sig("-1"), 0.0).is_err());
    }

    #[test]
    fn periodic_classification() {
        let v = classify_periodic(&sig("sin(t)"), 2.0 * PI).unwrap();
        assert_eq!(v.class, StabilityClass::None);
        let v = classify_periodic(&sig("sin(t) - 0.1"), 2.0 * PI).unwrap();
        assert_eq!(v.class, StabilityClass::UniformExponential);
        assert!((v.alpha - 0.1).abs() < 1e-9);
        // β bounds the bump of ∫ sin over at most one period: 1 - cos ≤ 2
        assert!(v.beta_max() > 1.0 && v.beta_max() <= 2.0 + 1e-9);
    }

    #[test]
    fn positive_part_goldens() {
        assert_eq!(positive_part_integral(&sig("-1"), 0.0, 5.0).unwrap(), 0.0);
        let v = positive_part_integral(&sig("sin(t)"), 0.0, 2.0 * PI).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        for big_t in [10.0_f64, 100.0, 1000.0] {
            let v = positive_part_integral(&sig("2/(1+t)"), 0.0, big_t).unwrap();
            assert!((v - 2.0 * (1.0 + big_t).ln()).abs() < 1e-8);
        }
    }

    #[test]
    fn classify_constant_rate() {
        let t0s = default_t0_samples(0.0, 200.0);
        let v = classify(&sig("-1"), 200.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::UniformExponential);
        assert!((v.alpha - 1.0).abs() < 1e-3, "{}", v.alpha);
        assert!(v.beta_max() < 1e-6);
        assert!(v.margin >= -1e-9);
    }

    #[test]
    fn classify_inverse_time_rate_is_asymptotic_only() {
        let t0s = default_t0_samples(0.0, 200.0);
        let v = classify(&sig("-2/(1+t)"), 200.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::Asymptotic, "{:?}", v.notes);
        assert_eq!(v.alpha, 0.0);
        assert!(v.notes.iter().any(|n| n.contains("not exponential")));
    }

    #[test]
    fn classify_golden_rates() {
        let t0s = default_t0_samples(0.0, 200.0);
        let v = classify(&sig("-2*t/(1+t^2)"), 200.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::Asymptotic, "{:?}", v.notes);
        let v = classify(&sig("sin(t)"), 200.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::None, "{:?}", v.notes);
        assert!(!v.inconclusive);
        let v = classify(&sig("2/(1+t) - t*abs(cos(t))"), 200.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::UniformExponential, "{:?}", v.notes);
        assert!(v.alpha >= 1e-3);
    }

    #[test]
    fn classify_reports_short_horizons_as_inconclusive() {
        let v = classify(&sig("-1"), 10.0, &[0.0, 1.0], 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::None);
        assert!(v.inconclusive);
        assert!(classify(&sig("-1"), 10.0, &[12.0], 1e-3).is_err());
        assert!(classify(&sig("-1"), 10.0, &[], 1e-3).is_err());
    }

    #[test]
    fn log_oscillating_rate_bounded_below_zero_is_uniform() {
        // μ ≤ −1 + √2/2 everywhere even though its averages drift slowly
        let mu = ScalarSignal::parse("-1 + 0.5*(sin(ln(t)) + cos(ln(t)))", 1.0).unwrap();
        let t0s: Vec<f64> = (0..8).map(|i| 1.0 + 20.0 * i as f64).collect();
        let v = classify(&mu, 400.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::UniformExponential, "{:?}", v.notes);
        assert!(v.alpha >= 1.0 - 0.5 * 2f64.sqrt() - 1e-6);
    }

    #[test]
    fn growing_sparse_pulses_are_not_uniform() {
        // rate −1 with a pulse of height 2^(k−2) on [2^k, 2^k + 1): the bump
        // seen from just before a pulse grows with t₀
        let mut breaks = Vec::new();
        let mut values = vec![-1.0];
        for k in 3..=9 {
            let s = f64::powi(2.0, k);
            breaks.extend([s, s + 1.0]);
            values.extend([f64::powi(2.0, k - 2), -1.0]);
        }
        let mu = ScalarSignal::piecewise(PiecewiseConstant::new(breaks, values).unwrap(), 0.0);
        let t0s = [1.0, 2.0, 3.0, 7.5, 15.5, 31.5, 63.5, 127.5];
        let v = classify(&mu, 1024.0, &t0s, 1e-3).unwrap();
        assert_eq!(v.class, StabilityClass::Exponential, "{:?}", v.notes);
        assert!(v.notes.iter().any(|n| n.contains("not uniform")));
    }

    #[test]
    fn certified_pair_is_checked() {
        let mu = sig("2/(1+t) - t*abs(cos(t))");
        let alpha = 4.0 / (3.0 * PI);
        let beta = 2.0 * (1.0 + 1.5 * PI).ln() + 2.0;
        let t0s: Vec<f64> = (0..8).map(|i| i as f64 * 7.0).collect();
        let v = StabilityVerdict::from_certified_pair(&mu, alpha, beta, 120.0, &t0s).unwrap();
        assert_eq!(v.class, StabilityClass::UniformExponential);
        assert!(v.margin >= 0.0);
        let bad = StabilityVerdict::from_certified_pair(&mu, alpha, 0.1, 120.0, &t0s).unwrap();
        assert_eq!(bad.class, StabilityClass::None);
    }
}
