//! Certificates (a Lyapunov candidate plus the rate, drift and gain functions a
//! theorem needs) and the explicit state envelopes their proofs produce.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{parse_in, Binding, EvalError, Expr, ParseError, Scope, Var};
use crate::gronwall::{gronwall_bound, kappa, DriftPair, GronwallError, KappaCurve};
use crate::quadsig::{
    beta_for, guarded_exp, QuadError, ScalarSignal, StabilityClass, StabilityVerdict,
    TransitionFactor, DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Gronwall(#[from] GronwallError),
    #[error("certificate for {theorem} is missing `{field}`")]
    Missing {
        theorem: Theorem,
        field: &'static str,
    },
    #[error("rate function is {found}, {required} is required")]
    Grade {
        required: String,
        found: StabilityClass,
    },
    #[error("comparison function shape: {0}")]
    Shape(String),
    #[error("cannot invert comparison function at t = {t} for value {v}: {reason}")]
    Inversion { t: f64, v: f64, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    /// `α₁`, below `V`.
    Lower,
    /// `α₂`, above `V`.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonForm {
    /// `k(t)·s^m`.
    Power { k: Expr, m: f64 },
    /// Any expression in `t` and `s`, increasing in `s`.
    Monotone { expr: Expr },
}

/// A comparison function `α(t, s)` bounding `V(t, x)` in terms of `s = |x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonFn {
    pub form: ComparisonForm,
    pub role: Role,
}

impl fmt::Display for ComparisonFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            ComparisonForm::Power { k, m } => write!(f, "power k={k} m={m}"),
            ComparisonForm::Monotone { expr } => write!(f, "expr {expr}"),
        }
    }
}

impl ComparisonFn {
    pub fn power(k: Expr, m: f64, role: Role) -> Result<Self, CertError> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(CertError::Shape(format!(
                "exponent m must be positive, got {m}"
            )));
        }
        if let Some(v) = k.check_scope(&Scope::TIME) {
            return Err(CertError::Shape(format!(
                "power coefficient may only depend on t, found {v}"
            )));
        }
        Ok(ComparisonFn {
            form: ComparisonForm::Power { k, m },
            role,
        })
    }

    pub fn power_const(k: f64, m: f64, role: Role) -> Result<Self, CertError> {
        ComparisonFn::power(Expr::constant(k), m, role)
    }

    pub fn parse_power(k: &str, m: f64, role: Role) -> Result<Self, CertError> {
        ComparisonFn::power(parse_in(k, &Scope::TIME)?, m, role)
    }

    pub fn monotone(expr: Expr, role: Role) -> Result<Self, CertError> {
        if let Some(v) = expr.check_scope(&Scope::TIME_GAIN) {
            return Err(CertError::Shape(format!(
                "comparison expression may only use t and s, found {v}"
            )));
        }
        Ok(ComparisonFn {
            form: ComparisonForm::Monotone { expr },
            role,
        })
    }

    pub fn parse_monotone(src: &str, role: Role) -> Result<Self, CertError> {
        ComparisonFn::monotone(parse_in(src, &Scope::TIME_GAIN)?, role)
    }

    pub fn depends_on_time(&self) -> bool {
        match &self.form {
            ComparisonForm::Power { k, .. } => k.mentions(Var::T),
            ComparisonForm::Monotone { expr } => expr.mentions(Var::T),
        }
    }

    /// `(k(t), m)` for the power form.
    pub fn power_parts(&self, t: f64) -> Option<Result<(f64, f64), CertError>> {
        match &self.form {
            ComparisonForm::Power { k, m } => Some(
                k.eval(&Binding::time(t))
                    .map(|k| (k, *m))
                    .map_err(Into::into),
            ),
            ComparisonForm::Monotone { .. } => None,
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64, CertError> {
        match &self.form {
            ComparisonForm::Power { k, m } => Ok(k.eval(&Binding::time(t))? * s.powf(*m)),
            ComparisonForm::Monotone { expr } => Ok(expr.eval(&Binding::time_gain(t, s))?),
        }
    }

    /// Samples the class conditions: zero at `s = 0`, strictly increasing in
    /// `s` on `[0, s_max]`, nondecreasing in `t` over `t_samples`.
    pub fn check(&self, t_samples: &[f64], s_max: f64) -> Result<(), CertError> {
        let s_grid: Vec<f64> = (0..=200).map(|i| s_max * i as f64 / 200.0).collect();
        let mut prev_row: Option<Vec<f64>> = None;
        for &t in t_samples {
            if let Some(Ok((k, _))) = self.power_parts(t) {
                if !(k > 0.0) {
                    return Err(CertError::Shape(format!(
                        "coefficient k({t}) = {k} is not positive"
                    )));
                }
            }
            let row = s_grid
                .iter()
                .map(|&s| self.eval(t, s))
                .collect::<Result<Vec<_>, _>>()?;
            if row[0].abs() > 1e-12 {
                return Err(CertError::Shape(format!(
                    "value at s = 0 is {} for t = {t}",
                    row[0]
                )));
            }
            if let Some(i) = row.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(CertError::Shape(format!(
                    "not strictly increasing in s near s = {} for t = {t}",
                    s_grid[i + 1]
                )));
            }
            if let Some(prev) = &prev_row {
                if let Some(i) = row
                    .iter()
                    .zip(prev)
                    .position(|(a, b)| *a < *b * (1.0 - 1e-12) - 1e-300)
                {
                    return Err(CertError::Shape(format!(
                        "decreasing in t at s = {} before t = {t}",
                        s_grid[i]
                    )));
                }
            }
            prev_row = Some(row);
        }
        Ok(())
    }
}

const BRACKET_LIMIT: f64 = 1e300;

/// Right inverse in `s`: the `s ≥ 0` with `α(t, s) = v`.
pub fn invert_comparison(f: &ComparisonFn, t: f64, v: f64) -> Result<f64, CertError> {
    let fail = |reason: &str| CertError::Inversion {
        t,
        v,
        reason: reason.to_string(),
    };
    if !(v >= 0.0) {
        return Err(fail("value must be nonnegative"));
    }
    if v == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    match &f.form {
        ComparisonForm::Power { k, m } => {
            let k = k.eval(&Binding::time(t))?;
            if !(k > 0.0) {
                return Err(fail("coefficient is not positive"));
            }
            Ok((v / k).powf(1.0 / m))
        }
        ComparisonForm::Monotone { .. } => {
            if v == 0.0 {
                return Ok(0.0);
            }
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            loop {
                let fh = f.eval(t, hi)?;
                if !fh.is_finite() && fh != f64::INFINITY {
                    return Err(fail("function is not finite on the bracket"));
                }
                if fh >= v {
                    break;
                }
                lo = hi;
                hi *= 2.0;
                if hi > BRACKET_LIMIT {
                    return Err(fail("bracket expansion overflowed"));
                }
            }
            for _ in 0..2200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                    break;
                }
                if f.eval(t, mid)? < v {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (flo, fhi) = (f.eval(t, lo)?, f.eval(t, hi)?);
            Ok(if (flo - v).abs() < (fhi - v).abs() {
                lo
            } else {
                hi
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    /// `V̇ ≤ μV`.
    #[serde(rename = "T1")]
    T1,
    /// `V̇ ≤ μV + π`.
    #[serde(rename = "T2")]
    T2,
    /// `V̇ ≤ μV` whenever `V ≥ ρ(|u|)`.
    #[serde(rename = "T3_ISS")]
    T3Iss,
    /// `V̇ ≤ (ρ₁(|u|) + μ)V + ρ₂(|u|)`.
    #[serde(rename = "T4_iISS")]
    T4Iiss,
    /// `V̇ ≤ μV + ρ(|u|)`.
    #[serde(rename = "C1_iISS")]
    C1Iiss,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [
        Theorem::T1,
        Theorem::T2,
        Theorem::T3Iss,
        Theorem::T4Iiss,
        Theorem::C1Iiss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
            Theorem::T3Iss => "T3_ISS",
            Theorem::T4Iiss => "T4_iISS",
            Theorem::C1Iiss => "C1_iISS",
        }
    }

    pub fn from_name(s: &str) -> Option<Theorem> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four conclusions available from `V̇ ≤ μV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Asymptotic,
    UniformAsymptotic,
    Exponential,
    UniformExponential,
}

impl Grade {
    pub fn from_name(s: &str) -> Option<Grade> {
        match s {
            "asymptotic" => Some(Grade::Asymptotic),
            "uniform_asymptotic" => Some(Grade::UniformAsymptotic),
            "exponential" => Some(Grade::Exponential),
            "uniform_exponential" => Some(Grade::UniformExponential),
            _ => None,
        }
    }

    /// Weakest rate-function class the grade needs.
    pub fn required_class(self) -> StabilityClass {
        match self {
            Grade::Asymptotic => StabilityClass::Asymptotic,
            Grade::Exponential => StabilityClass::Exponential,
            Grade::UniformAsymptotic | Grade::UniformExponential => {
                StabilityClass::UniformExponential
            }
        }
    }

    /// Strongest grade supported by a rate class and comparison shape.
    pub fn best_for(
        class: StabilityClass,
        alpha1: &ComparisonFn,
        alpha2: &ComparisonFn,
    ) -> Option<Grade> {
        let power = matches!(alpha1.form, ComparisonForm::Power { .. })
            && matches!(alpha2.form, ComparisonForm::Power { .. });
        let same_m = match (&alpha1.form, &alpha2.form) {
            (ComparisonForm::Power { m: a, .. }, ComparisonForm::Power { m: b, .. }) => a == b,
            _ => false,
        };
        let static_bounds = !alpha1.depends_on_time() && !alpha2.depends_on_time();
        match class {
            StabilityClass::UniformExponential if power && same_m && static_bounds => {
                Some(Grade::UniformExponential)
            }
            StabilityClass::UniformExponential | StabilityClass::Exponential if power && same_m => {
                Some(Grade::Exponential)
            }
            StabilityClass::UniformExponential if static_bounds => Some(Grade::UniformAsymptotic),
            StabilityClass::None => None,
            _ => Some(Grade::Asymptotic),
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grade::Asymptotic => "asymptotic",
            Grade::UniformAsymptotic => "uniform_asymptotic",
            Grade::Exponential => "exponential",
            Grade::UniformExponential => "uniform_exponential",
        })
    }
}

/// Hypotheses of one theorem: `V`, the rate `μ`, optional drift `π`, gains
/// over `s = |u|`, and the comparison bounds `α₁ ≤ V ≤ α₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub theorem: Theorem,
    pub v: Expr,
    pub mu: ScalarSignal,
    pub pi: Option<ScalarSignal>,
    pub rho: Option<Expr>,
    pub rho1: Option<Expr>,
    pub rho2: Option<Expr>,
    pub alpha1: ComparisonFn,
    pub alpha2: ComparisonFn,
}

impl Certificate {
    pub fn new(
        theorem: Theorem,
        v: Expr,
        mu: ScalarSignal,
        alpha1: ComparisonFn,
        alpha2: ComparisonFn,
    ) -> Self {
        Certificate {
            theorem,
            v,
            mu,
            pi: None,
            rho: None,
            rho1: None,
            rho2: None,
            alpha1,
            alpha2,
        }
    }

    pub fn with_pi(mut self, pi: ScalarSignal) -> Self {
        self.pi = Some(pi);
        self
    }

    pub fn with_rho(mut self, rho: Expr) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_rho_pair(mut self, rho1: Expr, rho2: Expr) -> Self {
        self.rho1 = Some(rho1);
        self.rho2 = Some(rho2);
        self
    }

    fn missing(&self, field: &'static str) -> CertError {
        CertError::Missing {
            theorem: self.theorem,
            field,
        }
    }

    /// Required fields, variable scopes, `V(t, 0) = 0` and the comparison
    /// function class conditions on the sampled times.
    pub fn validate(&self, n: usize, t_samples: &[f64]) -> Result<(), CertError> {
        let v_scope = Scope {
            n,
            m: 0,
            allow_t: true,
            allow_s: false,
        };
        if let Some(var) = self.v.check_scope(&v_scope) {
            return Err(CertError::Invalid(format!(
                "V may only use t and x1..x{n}, found {var}"
            )));
        }
        for (name, g) in [
            ("rho", &self.rho),
            ("rho1", &self.rho1),
            ("rho2", &self.rho2),
        ] {
            if let Some(var) = g.as_ref().and_then(|g| g.check_scope(&Scope::GAIN)) {
                return Err(CertError::Invalid(format!(
                    "{name} may only use s, found {var}"
                )));
            }
        }
        match self.theorem {
            Theorem::T1 => {}
            Theorem::T2 => {
                self.pi.as_ref().ok_or_else(|| self.missing("pi"))?;
            }
            Theorem::T3Iss | Theorem::C1Iiss => {
                self.rho.as_ref().ok_or_else(|| self.missing("rho"))?;
            }
            Theorem::T4Iiss => {
                self.rho1.as_ref().ok_or_else(|| self.missing("rho1"))?;
                self.rho2.as_ref().ok_or_else(|| self.missing("rho2"))?;
            }
        }
        if matches!(
            self.theorem,
            Theorem::T3Iss | Theorem::T4Iiss | Theorem::C1Iiss
        ) && (self.alpha1.depends_on_time() || self.alpha2.depends_on_time())
        {
            return Err(CertError::Shape(format!(
                "{} needs comparison bounds independent of t",
                self.theorem
            )));
        }
        if self.alpha1.role != Role::Lower || self.alpha2.role != Role::Upper {
            return Err(CertError::Shape(
                "alpha1 must be the lower and alpha2 the upper bound".into(),
            ));
        }
        let zero = vec![0.0; n];
        for &t in t_samples {
            let v0 = self.v.eval(&Binding::state(t, &zero, &[]))?;
            if v0.abs() > 1e-12 {
                return Err(CertError::Invalid(format!(
                    "V(t, 0) = {v0} at t = {t}, must vanish"
                )));
            }
        }
        self.alpha1.check(t_samples, 10.0)?;
        self.alpha2.check(t_samples, 10.0)?;
        Ok(())
    }

    /// `ρ(s)`; for the two-gain form the pointwise maximum `ρ₁ ∨ ρ₂`.
    pub fn gain(&self, s: f64) -> Result<f64, CertError> {
        let b = Binding::gain(s);
        match (&self.rho, &self.rho1, &self.rho2) {
            (_, Some(r1), Some(r2)) if self.theorem == Theorem::T4Iiss => {
                Ok(r1.eval(&b)?.max(r2.eval(&b)?))
            }
            (Some(r), _, _) => Ok(r.eval(&b)?),
            _ => Err(self.missing("rho")),
        }
    }

    pub fn has_gain(&self) -> bool {
        self.rho.is_some() || (self.rho1.is_some() && self.rho2.is_some())
    }

    /// Printable field map for reports.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("theorem".into(), self.theorem.to_string());
        m.insert("V".into(), self.v.to_string());
        m.insert("mu".into(), self.mu.to_string());
        m.insert("alpha1".into(), self.alpha1.to_string());
        m.insert("alpha2".into(), self.alpha2.to_string());
        for (k, v) in [
            ("rho", &self.rho),
            ("rho1", &self.rho1),
            ("rho2", &self.rho2),
        ] {
            if let Some(v) = v {
                m.insert(k.into(), v.to_string());
            }
        }
        if let Some(pi) = &self.pi {
            m.insert("pi".into(), pi.to_string());
        }
        m
    }
}

/// What the input did over `[t₀, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct InputHistory {
    /// `‖u‖_{[t₀,t]}`.
    pub sup: f64,
    /// `∫_{t₀}^{t} γ₂(|u(s)|) ds`.
    pub gain_integral: f64,
}

impl InputHistory {
    pub const ZERO: InputHistory = InputHistory {
        sup: 0.0,
        gain_integral: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `α₁⁻¹(t₀, α₂(t₀, |x₀|)·φ(t, t₀))`.
    Asymptotic,
    /// `α₁⁻¹(α₂(|x₀|)·e^β·e^{−α(t−t₀)})`.
    UniformAsymptotic,
    /// `θ(t₀)·|x₀|·e^{−rate(t−t₀)}`.
    Exponential { theta: f64, rate: f64 },
    /// `k·|x₀|·e^{−rate(t−t₀)}` with `k` independent of `t₀`.
    Uniform { k: f64, rate: f64 },
    /// `α₁⁻¹(t₀, α₂(t₀, |x₀|)·φ(t, t₀) + κ(t, t₀))`.
    Drift,
    /// `α₁⁻¹(2e^β α₂(|x₀|) e^{−α(t−t₀)}) + α₁⁻¹(2e^β ρ(‖u‖))`.
    IssSum,
    /// `σ(|x₀|, t − t₀) + γ₁(∫ γ₂(|u|))`.
    IissSum,
}

/// An evaluable bound on `|x(t)|` for one initial condition.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub t0: f64,
    pub x0_norm: f64,
    /// Decay rate and offset of `μ` used by the envelope (zero when unused).
    pub alpha: f64,
    pub beta: f64,
    alpha1: ComparisonFn,
    alpha2: ComparisonFn,
    phi: Option<Arc<TransitionFactor>>,
    drift: Option<Arc<(DriftPair, KappaCurve)>>,
    gain: Option<Certificate>,
    iiss: Option<ISSEstimate>,
}

/// Serializable parameter summary of an [`Envelope`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeParams {
    #[serde(flatten)]
    pub kind: EnvelopeKind,
    pub t0: f64,
    pub x0_norm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha1: String,
    pub alpha2: String,
}

impl Envelope {
    fn base(kind: EnvelopeKind, cert: &Certificate, t0: f64, x0_norm: f64) -> Self {
        Envelope {
            kind,
            t0,
            x0_norm,
            alpha: 0.0,
            beta: 0.0,
            alpha1: cert.alpha1.clone(),
            alpha2: cert.alpha2.clone(),
            phi: None,
            drift: None,
            gain: None,
            iiss: None,
        }
    }

    pub fn params(&self) -> EnvelopeParams {
        EnvelopeParams {
            kind: self.kind.clone(),
            t0: self.t0,
            x0_norm: self.x0_norm,
            alpha: self.alpha,
            beta: self.beta,
            alpha1: self.alpha1.to_string(),
            alpha2: self.alpha2.to_string(),
        }
    }

    /// Whether the bound grows with the input.
    pub fn uses_input(&self) -> bool {
        matches!(self.kind, EnvelopeKind::IssSum | EnvelopeKind::IissSum)
    }

    /// Integrand `γ₂(|u|)` of [`InputHistory::gain_integral`]; zero unless
    /// the envelope is an integral ISS sum.
    pub fn input_rate(&self, s: f64) -> Result<f64, CertError> {
        match &self.iiss {
            Some(est) => est.gamma2(s),
            None => Ok(0.0),
        }
    }

    /// Bound at `t ≥ t₀` under zero input.
    pub fn bound(&self, t: f64) -> Result<f64, CertError> {
        self.bound_with(t, &InputHistory::ZERO)
    }

    pub fn bound_with(&self, t: f64, input: &InputHistory) -> Result<f64, CertError> {
        if t < self.t0 {
            return Err(CertError::Invalid(format!(
                "envelope evaluated at t = {t} before t0 = {}",
                self.t0
            )));
        }
        let elapsed = t - self.t0;
        match &self.kind {
            EnvelopeKind::Asymptotic => {
                let phi = self
                    .phi
                    .as_ref()
                    .expect("asymptotic envelope carries its transition factor");
                let a2 = self.alpha2.eval(self.t0, self.x0_norm)?;
                invert_comparison(&self.alpha1, self.t0, a2 * phi.phi(t, self.t0)?)
            }
            EnvelopeKind::UniformAsymptotic => {
                let a2 = self.alpha2.eval(self.t0, self.x0_norm)?;
                invert_comparison(
                    &self.alpha1,
                    self.t0,
                    a2 * guarded_exp(self.beta - self.alpha * elapsed),
                )
            }
            EnvelopeKind::Exponential { theta, rate } => {
                Ok(theta * self.x0_norm * (-rate * elapsed).exp())
            }
            EnvelopeKind::Uniform { k, rate } => Ok(k * self.x0_norm * (-rate * elapsed).exp()),
            EnvelopeKind::Drift => {
                let drift = self
                    .drift
                    .as_ref()
                    .expect("drift envelope carries its kappa curve");
                let phi = self
                    .phi
                    .as_ref()
                    .expect("drift envelope carries its transition factor");
                let a2 = self.alpha2.eval(self.t0, self.x0_norm)?;
                let k = kappa_at(&drift.0, &drift.1, t)?;
                invert_comparison(&self.alpha1, self.t0, a2 * phi.phi(t, self.t0)? + k)
            }
            EnvelopeKind::IssSum => {
                let cert = self.gain.as_ref().expect("ISS envelope carries its gain");
                let eb = self.beta.exp();
                let a2 = self.alpha2.eval(self.t0, self.x0_norm)?;
                let transient = invert_comparison(
                    &self.alpha1,
                    self.t0,
                    2.0 * eb * a2 * (-self.alpha * elapsed).exp(),
                )?;
                let gain = if input.sup > 0.0 {
                    invert_comparison(&self.alpha1, self.t0, 2.0 * eb * cert.gain(input.sup)?)?
                } else {
                    0.0
                };
                Ok(transient + gain)
            }
            EnvelopeKind::IissSum => {
                let est = self
                    .iiss
                    .as_ref()
                    .expect("iISS envelope carries its estimate");
                est.bound(self.x0_norm, elapsed, input.gain_integral)
            }
        }
    }
}

/// `κ(t, t₀)` between grid points of a tabulated curve.
fn kappa_at(pair: &DriftPair, curve: &KappaCurve, t: f64) -> Result<f64, CertError> {
    let idx = curve
        .samples
        .partition_point(|s| s.0 <= t)
        .saturating_sub(1);
    let (tk, kk) = curve.samples[idx];
    if tk == t {
        return Ok(kk);
    }
    let phi = crate::quadsig::transition_factor(pair.mu(), t, tk)?;
    Ok(phi * kk + gronwall_bound(pair.mu(), pair.pi(), 0.0, tk, t)?)
}

fn require_class(verdict: &StabilityVerdict, required: StabilityClass) -> Result<(), CertError> {
    if verdict.class < required {
        return Err(CertError::Grade {
            required: required.to_string(),
            found: verdict.class,
        });
    }
    Ok(())
}

fn power_pair(cert: &Certificate, t0: f64) -> Result<(f64, f64, f64), CertError> {
    let shape = || {
        CertError::Shape(
            "this grade needs alpha1 and alpha2 of the form k(t) s^m with one m".into(),
        )
    };
    let (k1, m1) = cert.alpha1.power_parts(t0).ok_or_else(shape)??;
    let (k2, m2) = cert.alpha2.power_parts(t0).ok_or_else(shape)??;
    if m1 != m2 {
        return Err(shape());
    }
    Ok((k1, k2, m1))
}

fn uniform_beta(verdict: &StabilityVerdict) -> f64 {
    verdict.beta_max()
}

/// `β(t₀)` from the verdict when sampled there, otherwise recomputed on
/// `[t₀, horizon]` with the verdict's `α`.
fn beta_at(cert: &Certificate, verdict: &StabilityVerdict, t0: f64) -> Result<f64, CertError> {
    if let Some(b) = verdict.beta_at(t0) {
        return Ok(b);
    }
    let end = verdict.horizon.max(t0 + 1.0);
    let tf = TransitionFactor::build(&cert.mu, t0, end, 0.05, DEFAULT_TOL, &[])?;
    Ok(beta_for(&tf, t0, verdict.alpha)?)
}

/// Envelope from `V̇ ≤ μV` at the requested grade.
pub fn envelope_t1(
    cert: &Certificate,
    verdict: &StabilityVerdict,
    grade: Grade,
    t0: f64,
    x0_norm: f64,
) -> Result<Envelope, CertError> {
    require_class(verdict, grade.required_class())?;
    match grade {
        Grade::Asymptotic => {
            let end = verdict.horizon.max(t0 + 1.0);
            let tf = TransitionFactor::build(&cert.mu, t0, end, 0.05, DEFAULT_TOL, &[])?;
            let mut env = Envelope::base(EnvelopeKind::Asymptotic, cert, t0, x0_norm);
            env.phi = Some(Arc::new(tf));
            Ok(env)
        }
        Grade::UniformAsymptotic => {
            if cert.alpha1.depends_on_time() || cert.alpha2.depends_on_time() {
                return Err(CertError::Shape(
                    "uniform asymptotic grade needs alpha1, alpha2 independent of t".into(),
                ));
            }
            let mut env = Envelope::base(EnvelopeKind::UniformAsymptotic, cert, t0, x0_norm);
            env.alpha = verdict.alpha;
            env.beta = uniform_beta(verdict);
            Ok(env)
        }
        Grade::Exponential => {
            let (k1, k2, m) = power_pair(cert, t0)?;
            let beta = beta_at(cert, verdict, t0)?;
            let theta = (k2 / k1).powf(1.0 / m) * (beta / m).exp();
            let mut env = Envelope::base(
                EnvelopeKind::Exponential {
                    theta,
                    rate: verdict.alpha / m,
                },
                cert,
                t0,
                x0_norm,
            );
            env.alpha = verdict.alpha;
            env.beta = beta;
            Ok(env)
        }
        Grade::UniformExponential => {
            if cert.alpha1.depends_on_time() || cert.alpha2.depends_on_time() {
                return Err(CertError::Shape(
                    "uniform exponential grade needs constant k1, k2".into(),
                ));
            }
            let (k1, k2, m) = power_pair(cert, t0)?;
            let beta = uniform_beta(verdict);
            let k = (k2 / k1).powf(1.0 / m) * (beta / m).exp();
            let mut env = Envelope::base(
                EnvelopeKind::Uniform {
                    k,
                    rate: verdict.alpha / m,
                },
                cert,
                t0,
                x0_norm,
            );
            env.alpha = verdict.alpha;
            env.beta = beta;
            Ok(env)
        }
    }
}

/// The generic `α₁⁻¹(t₀, α₂(t₀, |x₀|)·e^{β − α(t−t₀)})` form, which the
/// exponential closed forms must reproduce.
pub fn generic_exponential_bound(
    cert: &Certificate,
    alpha: f64,
    beta: f64,
    t0: f64,
    x0_norm: f64,
    t: f64,
) -> Result<f64, CertError> {
    let a2 = cert.alpha2.eval(t0, x0_norm)?;
    invert_comparison(&cert.alpha1, t0, a2 * guarded_exp(beta - alpha * (t - t0)))
}

/// Outcome of the drift theorem on a finite horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftVerdict {
    pub certified: bool,
    pub inconclusive: bool,
    pub reason: String,
}

/// Needs an asymptotically stable `μ` and a bounded, vanishing `κ`.
pub fn check_t2(
    cert: &Certificate,
    verdict: &StabilityVerdict,
    curve: &KappaCurve,
) -> Result<DriftVerdict, CertError> {
    if cert.theorem != Theorem::T2 {
        return Err(CertError::Invalid(format!(
            "drift check needs a T2 certificate, got {}",
            cert.theorem
        )));
    }
    if verdict.class < StabilityClass::Asymptotic {
        return Ok(DriftVerdict {
            certified: false,
            inconclusive: verdict.inconclusive,
            reason: format!(
                "rate function is {}, asymptotic stability is required",
                verdict.class
            ),
        });
    }
    let (certified, inconclusive, reason) = if curve.overflow {
        (
            false,
            false,
            "kappa overflows: transition factor grows without bound".to_string(),
        )
    } else if !curve.bounded {
        (
            false,
            false,
            format!(
                "kappa still growing at the horizon (tail {:.6e})",
                curve.tail_value
            ),
        )
    } else if !curve.vanishing {
        (
            false,
            true,
            format!(
                "kappa bounded (sup {:.6e}) but not vanishing by the horizon (tail {:.6e})",
                curve.sup_value, curve.tail_value
            ),
        )
    } else {
        (
            true,
            false,
            format!(
                "kappa bounded (sup {:.6e}) and vanishing (tail {:.6e})",
                curve.sup_value, curve.tail_value
            ),
        )
    };
    Ok(DriftVerdict {
        certified,
        inconclusive,
        reason,
    })
}

/// `α₁⁻¹(t₀, α₂(t₀, |x₀|)·φ(t, t₀) + κ(t, t₀))`, with `κ` tabulated up to `horizon`.
pub fn envelope_t2(
    cert: &Certificate,
    t0: f64,
    x0_norm: f64,
    horizon: f64,
) -> Result<Envelope, CertError> {
    let pi = cert.pi.clone().ok_or_else(|| cert.missing("pi"))?;
    let pair = DriftPair::new(cert.mu.clone(), pi, horizon - t0)?;
    let curve = kappa(&pair, t0, horizon, 0.05)?;
    let tf = TransitionFactor::build(&cert.mu, t0, horizon, 0.05, DEFAULT_TOL, &[])?;
    let mut env = Envelope::base(EnvelopeKind::Drift, cert, t0, x0_norm);
    env.phi = Some(Arc::new(tf));
    env.drift = Some(Arc::new((pair, curve)));
    Ok(env)
}

/// ISS sum envelope from the implication form `V ≥ ρ(|u|) ⇒ V̇ ≤ μV`.
pub fn iss_envelope_t3(
    cert: &Certificate,
    verdict: &StabilityVerdict,
    t0: f64,
    x0_norm: f64,
) -> Result<Envelope, CertError> {
    require_class(verdict, StabilityClass::UniformExponential)?;
    if cert.rho.is_none() {
        return Err(cert.missing("rho"));
    }
    let mut env = Envelope::base(EnvelopeKind::IssSum, cert, t0, x0_norm);
    env.alpha = verdict.alpha;
    env.beta = uniform_beta(verdict);
    env.gain = Some(cert.clone());
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IissVariant {
    /// `π₁(s) = s + s²/2`, `π₂(s) = (eˢ − 1)²/2 + s·e^{βs}`.
    TwoGain,
    /// `π₁(s) = s`, `π₂(s) = s·e^{βs}`.
    SingleGain,
}

/// `σ`, `γ₁`, `γ₂` of the integral ISS estimate
/// `|x(t)| ≤ σ(|x₀|, t − t₀) + γ₁(∫ γ₂(|u|))`.
#[derive(Debug, Clone)]
pub struct ISSEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub variant: IissVariant,
    cert: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlReport {
    pub nondecreasing_in_s: bool,
    pub nonincreasing_in_t: bool,
    /// `σ(s, t_max) ≤ 1e−3·σ(s, 0)` for every sampled `s > 0`.
    pub decays: bool,
    pub gamma1_at_zero: f64,
    pub worst_s_violation: f64,
    pub worst_t_violation: f64,
}

impl KlReport {
    pub fn pass(&self) -> bool {
        self.nondecreasing_in_s
            && self.nonincreasing_in_t
            && self.decays
            && self.gamma1_at_zero == 0.0
    }
}

impl ISSEstimate {
    pub fn new(alpha: f64, beta: f64, variant: IissVariant, cert: Certificate) -> Self {
        ISSEstimate {
            alpha,
            beta,
            variant,
            cert,
        }
    }

    pub fn pi1(&self, s: f64) -> f64 {
        iiss_pi1(self.variant, s)
    }

    pub fn pi2(&self, s: f64) -> f64 {
        iiss_pi2(self.variant, self.beta, s)
    }

    /// `α₁⁻¹(2π₁(α₂(s)·e^β·e^{−αt}))`.
    pub fn sigma(&self, s: f64, t: f64) -> Result<f64, CertError> {
        let a2 = self.cert.alpha2.eval(0.0, s)?;
        let inner = a2 * guarded_exp(self.beta - self.alpha * t);
        invert_comparison(&self.cert.alpha1, 0.0, 2.0 * self.pi1(inner))
    }

    /// `α₁⁻¹(2π₂(r))`.
    pub fn gamma1(&self, r: f64) -> Result<f64, CertError> {
        invert_comparison(&self.cert.alpha1, 0.0, 2.0 * self.pi2(r))
    }

    /// `ρ(s)`, the integrand gain.
    pub fn gamma2(&self, s: f64) -> Result<f64, CertError> {
        self.cert.gain(s)
    }

    pub fn bound(&self, x0_norm: f64, elapsed: f64, gain_integral: f64) -> Result<f64, CertError> {
        let g = if gain_integral > 0.0 {
            self.gamma1(gain_integral)?
        } else {
            0.0
        };
        Ok(self.sigma(x0_norm, elapsed)? + g)
    }

    /// Samples `σ` on `[0, s_max] × [0, t_max]` for the class-KL shape.
    pub fn kl_surrogate_check(&self, s_max: f64, t_max: f64) -> Result<KlReport, CertError> {
        let ns = 41;
        let nt = 51;
        let ss: Vec<f64> = (0..ns)
            .map(|i| s_max * i as f64 / (ns - 1) as f64)
            .collect();
        let ts: Vec<f64> = (0..nt)
            .map(|j| t_max * j as f64 / (nt - 1) as f64)
            .collect();
        let mut table = vec![vec![0.0; nt]; ns];
        for (i, &s) in ss.iter().enumerate() {
            for (j, &t) in ts.iter().enumerate() {
                table[i][j] = self.sigma(s, t)?;
            }
        }
        let rel = |a: f64, b: f64| (a - b) / (1.0 + b.abs());
        let mut worst_s: f64 = 0.0;
        let mut worst_t: f64 = 0.0;
        for pair in table.windows(2) {
            for (lo, hi) in pair[0].iter().zip(&pair[1]) {
                worst_s = worst_s.max(rel(*lo, *hi));
            }
        }
        for row in &table {
            for j in 1..nt {
                worst_t = worst_t.max(rel(row[j], row[j - 1]));
            }
        }
        let decays = table.iter().skip(1).all(|row| row[nt - 1] <= 1e-3 * row[0]);
        Ok(KlReport {
            nondecreasing_in_s: worst_s <= 1e-12,
            nonincreasing_in_t: worst_t <= 1e-12,
            decays,
            gamma1_at_zero: self.gamma1(0.0)?,
            worst_s_violation: worst_s,
            worst_t_violation: worst_t,
        })
    }
}

pub fn iiss_pi1(variant: IissVariant, s: f64) -> f64 {
    match variant {
        IissVariant::TwoGain => s + 0.5 * s * s,
        IissVariant::SingleGain => s,
    }
}

pub fn iiss_pi2(variant: IissVariant, beta: f64, s: f64) -> f64 {
    match variant {
        IissVariant::TwoGain => 0.5 * (s.exp() - 1.0).powi(2) + s * (beta * s).exp(),
        IissVariant::SingleGain => s * (beta * s).exp(),
    }
}

/// Integral ISS estimate for the two-gain or single-gain forms.
pub fn iiss_estimate_t4(
    cert: &Certificate,
    verdict: &StabilityVerdict,
) -> Result<ISSEstimate, CertError> {
    require_class(verdict, StabilityClass::UniformExponential)?;
    let variant = match cert.theorem {
        Theorem::T4Iiss => IissVariant::TwoGain,
        Theorem::C1Iiss => IissVariant::SingleGain,
        other => {
            return Err(CertError::Invalid(format!(
                "integral ISS needs T4_iISS or C1_iISS, got {other}"
            )))
        }
    };
    if !cert.has_gain() {
        return Err(cert.missing(if variant == IissVariant::TwoGain {
            "rho1"
        } else {
            "rho"
        }));
    }
    Ok(ISSEstimate::new(
        verdict.alpha,
        uniform_beta(verdict),
        variant,
        cert.clone(),
    ))
}

pub fn iiss_envelope(
    cert: &Certificate,
    verdict: &StabilityVerdict,
    t0: f64,
    x0_norm: f64,
) -> Result<Envelope, CertError> {
    let est = iiss_estimate_t4(cert, verdict)?;
    let mut env = Envelope::base(EnvelopeKind::IissSum, cert, t0, x0_norm);
    env.alpha = est.alpha;
    env.beta = est.beta;
    env.iiss = Some(est);
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::quadsig::{classify, default_t0_samples};
    use std::f64::consts::PI;

    fn quad_cert(theorem: Theorem, v: &str, mu: &str, k: f64) -> Certificate {
        Certificate::new(
            theorem,
            parse(v).unwrap(),
            ScalarSignal::parse(mu, 0.0).unwrap(),
            ComparisonFn::power_const(k, 2.0, Role::Lower).unwrap(),
            ComparisonFn::power_const(k, 2.0, Role::Upper).unwrap(),
        )
    }

    fn ex4_verdict() -> StabilityVerdict {
        let mu = ScalarSignal::parse("2/(1+t) - t*abs(cos(t))", 0.0).unwrap();
        let alpha = 4.0 / (3.0 * PI);
        let beta = 2.0 * (1.0 + 1.5 * PI).ln() + 2.0;
        StabilityVerdict::from_certified_pair(&mu, alpha, beta, 60.0, &[0.0]).unwrap()
    }

    #[test]
    fn power_inversion_goldens() {
        let f = ComparisonFn::power_const(1.0, 2.0, Role::Lower).unwrap();
        assert_eq!(invert_comparison(&f, 0.0, 4.0).unwrap(), 2.0);
        let g = ComparisonFn::parse_power("1+t", 2.0, Role::Lower).unwrap();
        assert_eq!(invert_comparison(&g, 3.0, 16.0).unwrap(), 2.0);
        assert!(invert_comparison(&g, 3.0, -1.0).is_err());
    }

    #[test]
    fn monotone_inversion_goldens() {
        let f = ComparisonFn::parse_monotone("s + s^3", Role::Lower).unwrap();
        let s = invert_comparison(&f, 0.0, 2.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(invert_comparison(&f, 0.0, 0.0).unwrap(), 0.0);
        let big = invert_comparison(&f, 0.0, 1e30).unwrap();
        assert!((f.eval(0.0, big).unwrap() / 1e30 - 1.0).abs() < 1e-10);
        let sat = ComparisonFn::parse_monotone("s/(1+s)", Role::Lower).unwrap();
        assert!(matches!(
            invert_comparison(&sat, 0.0, 2.0),
            Err(CertError::Inversion { .. })
        ));
    }

    #[test]
    fn comparison_class_checks() {
        let ok = ComparisonFn::parse_power("1+t", 2.0, Role::Upper).unwrap();
        ok.check(&[0.0, 1.0, 5.0], 10.0).unwrap();
        let shrinking = ComparisonFn::parse_power("1/(1+t)", 2.0, Role::Upper).unwrap();
        assert!(shrinking.check(&[0.0, 1.0], 10.0).is_err());
        let offset = ComparisonFn::parse_monotone("1+s", Role::Upper).unwrap();
        assert!(offset.check(&[0.0], 10.0).is_err());
        let bump = ComparisonFn::parse_monotone("sin(s)", Role::Upper).unwrap();
        assert!(bump.check(&[0.0], 10.0).is_err());
        assert!(ComparisonFn::power_const(1.0, 0.0, Role::Lower).is_err());
        assert!(ComparisonFn::parse_power("s", 2.0, Role::Lower).is_err());
    }

    #[test]
    fn certificate_validation() {
        let c = quad_cert(Theorem::T1, "x1^2", "-1", 1.0);
        c.validate(1, &[0.0, 1.0]).unwrap();
        let bad = quad_cert(Theorem::T1, "x1^2 + 1", "-1", 1.0);
        assert!(bad.validate(1, &[0.0]).is_err());
        let out_of_range = quad_cert(Theorem::T1, "x2^2", "-1", 1.0);
        assert!(out_of_range.validate(1, &[0.0]).is_err());
        let t2 = quad_cert(Theorem::T2, "x1^2", "-1", 1.0);
        assert!(matches!(
            t2.validate(1, &[0.0]),
            Err(CertError::Missing { field: "pi", .. })
        ));
        let t4 = quad_cert(Theorem::T4Iiss, "x1^2", "-1", 1.0).with_rho(parse("s").unwrap());
        assert!(matches!(
            t4.validate(1, &[0.0]),
            Err(CertError::Missing { field: "rho1", .. })
        ));
    }

    #[test]
    fn inverse_time_rate_asymptotic_envelope() {
        let cert = quad_cert(Theorem::T1, "x1^2", "-2/(1+t)", 1.0);
        let mut cert = cert;
        cert.mu = ScalarSignal::parse("-2/(1+t)", 1.0).unwrap();
        let t0s = default_t0_samples(2.0, 200.0);
        let verdict = classify(&cert.mu, 200.0, &t0s, 1e-3).unwrap();
        let env = envelope_t1(&cert, &verdict, Grade::Asymptotic, 2.0, 1.0).unwrap();
        for t in [2.0, 3.0, 10.0, 50.0] {
            let want = 3.0 / (1.0 + t);
            assert!((env.bound(t).unwrap() - want).abs() < 1e-10);
        }
        assert!(matches!(
            envelope_t1(&cert, &verdict, Grade::Exponential, 2.0, 1.0),
            Err(CertError::Grade { .. })
        ));
    }

    #[test]
    fn zero_rate_envelope_is_constant() {
        let cert = quad_cert(Theorem::T1, "x1^2", "0", 1.0);
        let verdict = StabilityVerdict {
            class: StabilityClass::Asymptotic,
            alpha: 0.0,
            beta_of_t0: vec![],
            horizon: 50.0,
            t0_samples: vec![0.0],
            margin: f64::NAN,
            certified: false,
            inconclusive: false,
            notes: vec![],
        };
        let env = envelope_t1(&cert, &verdict, Grade::Asymptotic, 0.0, 1.7).unwrap();
        for t in [0.0, 5.0, 40.0] {
            assert!((env.bound(t).unwrap() - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn abs_cos_rate_uniform_envelope() {
        let cert = quad_cert(Theorem::T1, "0.5*x1^2", "2/(1+t) - t*abs(cos(t))", 0.5);
        let verdict = ex4_verdict();
        let env = envelope_t1(&cert, &verdict, Grade::UniformExponential, 0.0, 1.0).unwrap();
        match env.kind {
            EnvelopeKind::Uniform { k, rate } => {
                assert!((k - 15.527883).abs() < 1e-6, "{k}");
                assert!((rate - 0.212207).abs() < 1e-6, "{rate}");
                let want = (1.0 + 1.5 * PI).ln() + 1.0;
                assert!((k.ln() - want).abs() < 1e-12);
            }
            ref other => panic!("{other:?}"),
        }
        for t in [0.0, 3.0, 17.0] {
            let closed = env.bound(t).unwrap();
            let generic =
                generic_exponential_bound(&cert, env.alpha, env.beta, 0.0, 1.0, t).unwrap();
            assert!((closed - generic).abs() <= 1e-10 * closed);
        }
        assert!(env.bound(0.0).unwrap() >= 1.0);
    }

    #[test]
    fn iss_envelope_terms() {
        let cert = quad_cert(Theorem::T3Iss, "0.5*x1^2", "2/(1+t) - t*abs(cos(t))", 0.5)
            .with_rho(parse("s").unwrap());
        let verdict = ex4_verdict();
        let env = iss_envelope_t3(&cert, &verdict, 0.0, 1.0).unwrap();
        let beta = 2.0 * (1.0 + 1.5 * PI).ln() + 2.0;
        let alpha = 4.0 / (3.0 * PI);
        let t = 4.0;
        let transient = (2.0 * 2.0 * beta.exp() * 0.5 * (-alpha * t).exp()).sqrt();
        assert!((env.bound(t).unwrap() - transient).abs() < 1e-10);
        let gain = (2.0 * 2.0 * beta.exp() * 0.1).sqrt();
        assert!((gain - 9.820696).abs() < 1e-6);
        let with_u = env
            .bound_with(
                t,
                &InputHistory {
                    sup: 0.1,
                    gain_integral: 0.0,
                },
            )
            .unwrap();
        assert!((with_u - transient - gain).abs() < 1e-10);
        let zero = iss_envelope_t3(&cert, &verdict, 0.0, 0.0).unwrap();
        assert_eq!(zero.bound(9.0).unwrap(), 0.0);
    }

    #[test]
    fn iiss_pieces() {
        assert_eq!(iiss_pi1(IissVariant::TwoGain, 0.0), 0.0);
        assert_eq!(iiss_pi2(IissVariant::TwoGain, 1.0, 0.0), 0.0);
        let e = std::f64::consts::E;
        let want = 0.5 * (e - 1.0).powi(2) + e;
        assert!((iiss_pi2(IissVariant::TwoGain, 1.0, 1.0) - want).abs() < 1e-15);
        assert!((want - 4.194528).abs() < 1e-6);
        assert_eq!(iiss_pi1(IissVariant::SingleGain, 3.0), 3.0);
        assert!((iiss_pi2(IissVariant::SingleGain, 1.0, 1.0) - e).abs() < 1e-15);
    }

    #[test]
    fn iiss_estimate_shape() {
        let cert = quad_cert(Theorem::T4Iiss, "0.5*x1^2", "2/(1+t) - t*abs(cos(t))", 0.5)
            .with_rho_pair(parse("s").unwrap(), parse("s^2").unwrap());
        let est = iiss_estimate_t4(&cert, &ex4_verdict()).unwrap();
        assert_eq!(est.variant, IissVariant::TwoGain);
        assert_eq!(est.gamma2(2.0).unwrap(), 4.0);
        assert_eq!(est.gamma2(0.5).unwrap(), 0.5);
        let rep = est.kl_surrogate_check(10.0, 50.0).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert_eq!(
            est.bound(1.0, 3.0, 0.0).unwrap(),
            est.sigma(1.0, 3.0).unwrap()
        );
        let c1 = quad_cert(Theorem::C1Iiss, "0.5*x1^2", "-1", 0.5).with_rho(parse("s").unwrap());
        let est = iiss_estimate_t4(&c1, &ex4_verdict()).unwrap();
        assert_eq!(est.variant, IissVariant::SingleGain);
        // σ(s, 0) = α₁⁻¹(2π₁(α₂(s)e^β)) with α₁ = α₂ = s²/2, π₁ = id
        let s = 0.7;
        let want = (2.0 * 2.0 * 0.5 * s * s * est.beta.exp()).sqrt();
        assert!((est.sigma(s, 0.0).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn drift_envelope_and_verdict() {
        let cert = quad_cert(Theorem::T2, "x1^2", "-2*t/(1+t^2)", 1.0)
            .with_pi(ScalarSignal::parse("1/(1+t^2)", 0.0).unwrap());
        let t0s = default_t0_samples(0.0, 200.0);
        let verdict = classify(&cert.mu, 200.0, &t0s, 1e-3).unwrap();
        let pair = DriftPair::new(cert.mu.clone(), cert.pi.clone().unwrap(), 100.0).unwrap();
        let curve = kappa(&pair, 0.0, 100.0, 0.05).unwrap();
        let dv = check_t2(&cert, &verdict, &curve).unwrap();
        assert!(dv.certified, "{}", dv.reason);
        let env = envelope_t2(&cert, 0.0, 1.0, 30.0).unwrap();
        for t in [0.0_f64, 1.0, 2.37, 29.9] {
            let want = ((1.0 + t) / (1.0 + t * t)).sqrt();
            assert!((env.bound(t).unwrap() - want).abs() < 1e-9, "{t}");
        }
    }
}
