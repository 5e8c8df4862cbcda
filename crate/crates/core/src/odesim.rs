//! Adaptive Dormand–Prince 5(4) integration of `ẋ = f(t, x, u(t))` with
//! cubic Hermite dense output.

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{
    parse_in, Binding, EvalError, Expr, FieldError, ParseError, Scope, VectorField,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid arguments: {0}")]
    Precondition(String),
    #[error("t = {t} is outside the trajectory window [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Input `u(t)` as one expression in `t` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    components: Vec<Expr>,
}

impl InputSignal {
    pub fn new(components: Vec<Expr>) -> Result<Self, SimError> {
        for (i, c) in components.iter().enumerate() {
            if let Some(v) = c.check_scope(&Scope::TIME) {
                return Err(SimError::Precondition(format!(
                    "input u{} may only depend on t, found {v}",
                    i + 1
                )));
            }
        }
        Ok(InputSignal { components })
    }

    pub fn parse(sources: &[&str]) -> Result<Self, SimError> {
        let comps = sources
            .iter()
            .map(|s| parse_in(s, &Scope::TIME))
            .collect::<Result<Vec<_>, _>>()?;
        InputSignal::new(comps)
    }

    pub fn zero(m: usize) -> Self {
        InputSignal {
            components: vec![Expr::constant(0.0); m],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| matches!(c, Expr::Const(v) if *v == 0.0))
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        let b = Binding::time(t);
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(&b)?;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Euclidean norm `|u(t)|`.
    pub fn norm(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.eval(t)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Largest sampled `|u|` on `[a, b]`; errors on non-finite values.
    pub fn check_bounded(&self, a: f64, b: f64, samples: usize) -> Result<f64, SimError> {
        let mut sup: f64 = 0.0;
        for i in 0..=samples {
            let t = a + (b - a) * i as f64 / samples.max(1) as f64;
            let v = self.norm(t)?;
            if !v.is_finite() {
                return Err(SimError::Precondition(format!(
                    "input is not finite at t = {t}"
                )));
            }
            sup = sup.max(v);
        }
        Ok(sup)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// `|x|` exceeded the divergence bound.
    Diverged,
    StepUnderflow,
    NonFinite,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest scaled local error estimate among accepted steps (≤ 1).
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub max_step: f64,
    pub divergence: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            max_step: f64::INFINITY,
            divergence: 1e12,
        }
    }
}

/// Accepted steps of one simulation, with derivatives for dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    pub stats: StepStats,
    pub termination: Termination,
    pub diagnostic: Option<String>,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least its initial point")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least its initial point")
    }

    pub fn derivatives(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    /// State at `t` by cubic Hermite interpolation between accepted steps;
    /// exact at step points.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, SimError> {
        let (lo, hi) = (self.t0(), self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(SimError::OutOfRange { t, lo, hi });
        }
        let j = self.times.partition_point(|&s| s <= t);
        if j > 0 && self.times[j - 1] == t {
            return Ok(self.states[j - 1].clone());
        }
        let i = j - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Ok((0..self.states[i].len())
            .map(|k| {
                h00 * self.states[i][k]
                    + h10 * h * self.derivs[i][k]
                    + h01 * self.states[i + 1][k]
                    + h11 * h * self.derivs[i + 1][k]
            })
            .collect())
    }
}

pub fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(t, |x(t)|)` at each grid point.
pub fn sample_norm(traj: &Trajectory, grid: &[f64]) -> Result<Vec<(f64, f64)>, SimError> {
    grid.iter()
        .map(|&t| Ok((t, euclidean(&traj.interpolate(t)?))))
        .collect()
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus the embedded fourth-order ones
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Rhs<'a> {
    field: &'a VectorField,
    input: &'a InputSignal,
    u: Vec<f64>,
    evaluations: usize,
}

impl Rhs<'_> {
    fn eval(&mut self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        self.evaluations += 1;
        self.input
            .eval_into(t, &mut self.u)
            .map_err(|e| format!("input at t = {t}: {e}"))?;
        self.field
            .eval_into(t, x, &self.u, out)
            .map_err(|e| format!("f at t = {t}: {e}"))?;
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(format!("f{} is not finite at t = {t}", i + 1));
        }
        Ok(())
    }
}

fn scaled_norm(v: &[f64], x: &[f64], x_new: &[f64], opts: &SimOptions) -> f64 {
    v.iter()
        .zip(x.iter().zip(x_new))
        .map(|(e, (a, b))| (e / (opts.atol + opts.rtol * a.abs().max(b.abs()))).abs())
        .fold(0.0, f64::max)
}

fn initial_step(
    rhs: &mut Rhs,
    t0: f64,
    x0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &SimOptions,
) -> Result<f64, String> {
    let d0 = scaled_norm(x0, x0, x0, opts);
    let d1 = scaled_norm(f0, x0, x0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let x1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
    let mut f1 = vec![0.0; x0.len()];
    rhs.eval(t0 + h0, &x1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, x0, x0, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(opts.max_step))
}

pub fn simulate(
    field: &VectorField,
    u: &InputSignal,
    t0: f64,
    x0: &[f64],
    tf: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, SimError> {
    simulate_with(
        field,
        u,
        t0,
        x0,
        tf,
        &SimOptions {
            rtol,
            atol,
            ..SimOptions::default()
        },
    )
}

/// Integrates from `(t0, x0)` to `tf`. Evaluation failures, divergence and
/// step underflow truncate the trajectory and set [`Trajectory::termination`].
pub fn simulate_with(
    field: &VectorField,
    u: &InputSignal,
    t0: f64,
    x0: &[f64],
    tf: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    let n = field.state_dim();
    if x0.len() != n {
        return Err(SimError::Dimension(format!(
            "x0 has {} components, the system has {n}",
            x0.len()
        )));
    }
    if u.dim() != field.input_dim() {
        return Err(SimError::Dimension(format!(
            "input has {} components, the system expects {}",
            u.dim(),
            field.input_dim()
        )));
    }
    if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(SimError::Precondition(format!(
            "need finite tf > t0, got t0 = {t0}, tf = {tf}"
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(SimError::Precondition("tolerances must be positive".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Precondition("x0 must be finite".into()));
    }

    let mut rhs = Rhs {
        field,
        input: u,
        u: vec![0.0; u.dim()],
        evaluations: 0,
    };
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        derivs: Vec::new(),
        stats: StepStats::default(),
        termination: Termination::Completed,
        diagnostic: None,
    };
    let mut f0 = vec![0.0; n];
    if let Err(msg) = rhs.eval(t0, x0, &mut f0) {
        traj.derivs.push(vec![0.0; n]);
        traj.termination = Termination::NonFinite;
        traj.diagnostic = Some(msg);
        traj.stats.evaluations = rhs.evaluations;
        return Ok(traj);
    }
    traj.derivs.push(f0.clone());

    let mut h = match initial_step(&mut rhs, t0, x0, &f0, tf - t0, opts) {
        Ok(h) => h,
        Err(msg) => {
            traj.termination = Termination::NonFinite;
            traj.diagnostic = Some(msg);
            traj.stats.evaluations = rhs.evaluations;
            return Ok(traj);
        }
    };
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    k[0].copy_from_slice(&f0);
    let mut stage = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rejected_last = false;

    'outer: while t < tf {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            traj.termination = Termination::MaxSteps;
            traj.diagnostic = Some(format!(
                "step budget of {} exhausted at t = {t}",
                opts.max_steps
            ));
            break;
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            traj.termination = Termination::StepUnderflow;
            traj.diagnostic = Some(format!("step size {h:.3e} underflowed at t = {t}"));
            break;
        }
        let last = t + h >= tf;
        if last {
            h = tf - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                stage[i] = x[i] + h * acc;
            }
            let (_, rest) = k.split_at_mut(s);
            if let Err(msg) = rhs.eval(t + C[s] * h, &stage, &mut rest[0]) {
                // a failing stage may only mean the step reached too far
                traj.stats.rejected += 1;
                h *= 0.25;
                rejected_last = true;
                if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    traj.termination = Termination::NonFinite;
                    traj.diagnostic = Some(msg);
                    break 'outer;
                }
                continue 'outer;
            }
            if s == 6 {
                x_new.copy_from_slice(&stage);
            }
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, e) in E.iter().enumerate() {
                acc += e * k[j][i];
            }
            err[i] = h * acc;
        }
        let e = scaled_norm(&err, &x, &x_new, opts);
        if e <= 1.0 {
            t = if last { tf } else { t + h };
            x.copy_from_slice(&x_new);
            let f_new = k[6].clone();
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.derivs.push(f_new.clone());
            traj.stats.accepted += 1;
            traj.stats.max_error = traj.stats.max_error.max(e);
            k[0] = f_new;
            if euclidean(&x) > opts.divergence {
                traj.termination = Termination::Diverged;
                traj.diagnostic = Some(format!("|x| exceeded {:.1e} at t = {t}", opts.divergence));
                break;
            }
            let mut fac = if e == 0.0 { 5.0 } else { 0.9 * e.powf(-0.2) };
            fac = fac.clamp(0.2, if rejected_last { 1.0 } else { 5.0 });
            h = (h * fac).min(opts.max_step);
            rejected_last = false;
        } else {
            traj.stats.rejected += 1;
            h *= (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
            rejected_last = true;
        }
    }
    traj.stats.evaluations = rhs.evaluations;
    Ok(traj)
}

/// Fixed-step classical RK4, used as an independent cross-check.
pub fn rk4_fixed(
    field: &VectorField,
    u: &InputSignal,
    t0: f64,
    x0: &[f64],
    tf: f64,
    h: f64,
) -> Result<Vec<f64>, SimError> {
    let n = x0.len();
    let steps = ((tf - t0) / h).round().max(1.0) as usize;
    let h = (tf - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut uv = vec![0.0; u.dim()];
    let mut f = |t: f64, x: &[f64], out: &mut [f64]| -> Result<(), SimError> {
        u.eval_into(t, &mut uv)?;
        field.eval_into(t, x, &uv, out)?;
        Ok(())
    };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        f(t, &x, &mut k1)?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        f(t + 0.5 * h, &tmp, &mut k2)?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        f(t + 0.5 * h, &tmp, &mut k3)?;
        for j in 0..n {
            tmp[j] = x[j] + h * k3[j];
        }
        f(t + h, &tmp, &mut k4)?;
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(src: &[&str], m: usize) -> VectorField {
        VectorField::parse(src, m).unwrap()
    }

    #[test]
    fn linear_decay() {
        let f = field(&["-x1"], 0);
        let tr = simulate(&f, &InputSignal::zero(0), 0.0, &[1.0], 1.0, 1e-10, 1e-12).unwrap();
        assert_eq!(tr.termination, Termination::Completed);
        assert_eq!(tr.t_end(), 1.0);
        assert!((tr.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!(tr.stats.max_error <= 1.0);
    }

    #[test]
    fn zero_field_is_constant() {
        let f = field(&["0", "0"], 0);
        let tr = simulate(
            &f,
            &InputSignal::zero(0),
            0.0,
            &[3.0, 4.0],
            5.0,
            1e-9,
            1e-12,
        )
        .unwrap();
        assert!(tr.states.iter().all(|s| s == &vec![3.0, 4.0]));
        let norms = sample_norm(&tr, &[0.0, 1.3, 5.0]).unwrap();
        assert!(norms.iter().all(|(_, v)| *v == 5.0));
        assert!(sample_norm(&tr, &[]).unwrap().is_empty());
        assert!(matches!(
            sample_norm(&tr, &[6.0]),
            Err(SimError::OutOfRange { .. })
        ));
    }

    #[test]
    fn sin_denominator_stays_under_envelope() {
        let f = field(&["-x1/(t + sin(x1))"], 0);
        let tr = simulate(&f, &InputSignal::zero(0), 2.0, &[1.0], 10.0, 1e-9, 1e-12).unwrap();
        let end = tr.final_state()[0];
        assert!(end.abs() <= 3.0 / 11.0);
        let oracle = rk4_fixed(&f, &InputSignal::zero(0), 2.0, &[1.0], 10.0, 1e-4).unwrap();
        assert!((end - oracle[0]).abs() < 1e-7);
    }

    #[test]
    fn interpolation_is_exact_at_steps_and_accurate_between() {
        let f = field(&["x2", "-x1"], 0);
        let tr = simulate(
            &f,
            &InputSignal::zero(0),
            0.0,
            &[1.0, 0.0],
            6.0,
            1e-10,
            1e-12,
        )
        .unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert_eq!(&tr.interpolate(*t).unwrap(), s);
        }
        for i in 0..60 {
            let t = 0.1 * i as f64 + 0.037;
            let x = tr.interpolate(t).unwrap();
            assert!((x[0] - t.cos()).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn inputs_drive_the_state() {
        let f = field(&["-x1 + u1"], 1);
        let u = InputSignal::parse(&["1"]).unwrap();
        let tr = simulate(&f, &u, 0.0, &[0.0], 3.0, 1e-10, 1e-12).unwrap();
        assert!((tr.final_state()[0] - (1.0 - (-3.0f64).exp())).abs() < 1e-8);
        assert!(simulate(&f, &InputSignal::zero(0), 0.0, &[0.0], 1.0, 1e-9, 1e-12).is_err());
        assert_eq!(u.check_bounded(0.0, 5.0, 10).unwrap(), 1.0);
    }

    #[test]
    fn blow_up_is_truncated() {
        let f = field(&["x1^2"], 0);
        let tr = simulate(&f, &InputSignal::zero(0), 0.0, &[1.0], 2.0, 1e-8, 1e-12).unwrap();
        assert!(matches!(
            tr.termination,
            Termination::Diverged | Termination::StepUnderflow
        ));
        assert!(tr.t_end() < 1.0 + 1e-6);
        assert!(tr.diagnostic.is_some());
    }

    #[test]
    fn domain_failure_is_reported() {
        let f = field(&["-x1/(t - 1)"], 0);
        let tr = simulate(&f, &InputSignal::zero(0), 0.0, &[1.0], 3.0, 1e-9, 1e-12).unwrap();
        assert_ne!(tr.termination, Termination::Completed);
        assert!(tr.t_end() <= 1.0);
    }

    #[test]
    fn preconditions() {
        let f = field(&["-x1"], 0);
        let z = InputSignal::zero(0);
        assert!(matches!(
            simulate(&f, &z, 0.0, &[1.0, 2.0], 1.0, 1e-9, 1e-12),
            Err(SimError::Dimension(_))
        ));
        assert!(simulate(&f, &z, 1.0, &[1.0], 1.0, 1e-9, 1e-12).is_err());
        assert!(simulate(&f, &z, 0.0, &[1.0], 1.0, 0.0, 1e-12).is_err());
        assert!(InputSignal::parse(&["x1"]).is_err());
    }

    #[test]
    fn deterministic() {
        let f = field(&["(1/(1+t+x1^2) - t*abs(cos(t)))*x1"], 0);
        let a = simulate(&f, &InputSignal::zero(0), 0.0, &[1.0], 20.0, 1e-9, 1e-12).unwrap();
        let b = simulate(&f, &InputSignal::zero(0), 0.0, &[1.0], 20.0, 1e-9, 1e-12).unwrap();
        assert_eq!(a, b);
    }
}
