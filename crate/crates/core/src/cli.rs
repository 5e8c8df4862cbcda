//! Command-line front end: the system file format, subcommands, and JSON,
//! CSV and SVG output.
//!
//! Exit codes: 0 pass (or a stable class), 1 violation (or not stable),
//! 2 inconclusive, 3 usage, parse or runtime error.

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::certificates::{CertError, Certificate, ComparisonFn, Role, Theorem};
use crate::exprlang::{parse_in, Binding, Expr, ParseError, Scope, VectorField};
use crate::gronwall::{kappa, DriftPair, GronwallError};
use crate::odesim::{euclidean, simulate_with, InputSignal, SimError, SimOptions, Trajectory};
use crate::quadsig::{
    classify, classify_periodic, default_t0_samples, periodic_test, QuadError, ScalarSignal,
    SignalError, StabilityClass, DEFAULT_ALPHA_MIN, DEFAULT_HORIZON,
};
use crate::verify::{
    catalog, dense_points, envelope_samples, envelope_samples_at, run_analysis, Analysis,
    AnalysisOutcome, CatalogEntry, SampleBox, Sampler, Status, VerifyError,
};

pub const SEED_ENV: &str = "INDEF_LYAP_SEED";
pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("[{section}] {key}: {msg}")]
    Invalid {
        section: String,
        key: String,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Gronwall(#[from] GronwallError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("{0}")]
    Usage(String),
}

fn invalid(section: &str, key: &str, msg: impl ToString) -> CliError {
    CliError::Invalid {
        section: section.into(),
        key: key.into(),
        msg: msg.to_string(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

const SECTIONS: [&str; 5] = ["system", "input", "certificate", "bounds", "analysis"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    /// key → (line number, value)
    pub entries: BTreeMap<String, (usize, String)>,
    /// Bare words such as `zero`.
    pub flags: Vec<String>,
}

/// Sectioned `key = value` document describing one analysis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemFile {
    pub sections: BTreeMap<String, Section>,
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| invalid(section, key, format!("not a number: {v:?}")))
}

fn parse_list(section: &str, key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|p| parse_f64(section, key, p)).collect()
}

/// `power k=<expr> m=<real>` or `expr <expression in t, s>`.
pub fn parse_bound(src: &str, role: Role) -> Result<ComparisonFn, String> {
    let src = src.trim();
    if let Some(rest) = src.strip_prefix("power") {
        let mut k = None;
        let mut m = None;
        let words: Vec<&str> = rest.split_whitespace().collect();
        let mut k_words = Vec::new();
        let mut in_k = false;
        for w in words {
            if let Some(v) = w.strip_prefix("m=") {
                m = Some(
                    v.parse::<f64>()
                        .map_err(|_| format!("m is not a number: {v:?}"))?,
                );
                in_k = false;
            } else if let Some(v) = w.strip_prefix("k=") {
                k_words.push(v);
                in_k = true;
            } else if in_k {
                k_words.push(w);
            } else {
                return Err(format!("unexpected {w:?} in power form"));
            }
        }
        if !k_words.is_empty() {
            k = Some(k_words.join(" "));
        }
        let k = k.unwrap_or_else(|| "1".into());
        let m = m.ok_or("power form needs m=<real>")?;
        ComparisonFn::parse_power(&k, m, role).map_err(|e| e.to_string())
    } else if let Some(rest) = src.strip_prefix("expr") {
        ComparisonFn::parse_monotone(rest.trim(), role).map_err(|e| e.to_string())
    } else {
        Err(format!(
            "expected `power k=.. m=..` or `expr ..`, got {src:?}"
        ))
    }
}

/// `V` with no time dependence and `V(2x) = 4V(x) > 0` on random points.
pub fn is_quadratic(v: &Expr, n: usize) -> bool {
    if v.mentions(crate::exprlang::Var::T) {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..64).all(|_| {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        match (
            v.eval(&Binding::state(0.0, &x, &[])),
            v.eval(&Binding::state(0.0, &x2, &[])),
        ) {
            (Ok(a), Ok(b)) => a > 0.0 && (b - 4.0 * a).abs() <= 1e-10 * b.abs(),
            _ => false,
        }
    })
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<SystemFile, CliError> {
        let mut file = SystemFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::Syntax {
                        line: line_no,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                if file.sections.contains_key(name) {
                    return Err(CliError::Syntax {
                        line: line_no,
                        msg: format!("section [{name}] appears twice"),
                    });
                }
                file.sections.insert(name.to_string(), Section::default());
                current = Some(name.to_string());
                continue;
            }
            let Some(sec) = current.as_ref() else {
                return Err(CliError::Syntax {
                    line: line_no,
                    msg: "content before the first section header".into(),
                });
            };
            let section = file.sections.get_mut(sec).expect("current section exists");
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = k.trim().to_string();
                    if key.is_empty() || key.contains(char::is_whitespace) {
                        return Err(CliError::Syntax {
                            line: line_no,
                            msg: format!("bad key {key:?}"),
                        });
                    }
                    if section
                        .entries
                        .insert(key.clone(), (line_no, v.trim().to_string()))
                        .is_some()
                    {
                        return Err(CliError::Syntax {
                            line: line_no,
                            msg: format!("duplicate key `{key}` in [{sec}]"),
                        });
                    }
                }
                None => section.flags.push(line.to_string()),
            }
        }
        Ok(file)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.entries.get(key))
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, CliError> {
        self.get(section, key).ok_or_else(|| CliError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    fn number(&self, section: &str, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match (self.get(section, key), default) {
            (Some(v), _) => parse_f64(section, key, v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(CliError::Missing {
                section: section.into(),
                key: key.into(),
            }),
        }
    }

    fn expr(&self, section: &str, key: &str, scope: &Scope) -> Result<Expr, CliError> {
        let src = self.require(section, key)?;
        parse_in(src, scope).map_err(|e: ParseError| invalid(section, key, e))
    }

    fn dims(&self) -> Result<(usize, usize, f64), CliError> {
        let n = self.number("system", "dim", None)?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(invalid("system", "dim", "must be a positive integer"));
        }
        let m = self.number("input", "dim", Some(0.0))?;
        if m < 0.0 || m.fract() != 0.0 {
            return Err(invalid("input", "dim", "must be a non-negative integer"));
        }
        let start = self.number("system", "start", Some(0.0))?;
        Ok((n as usize, m as usize, start))
    }

    pub fn field(&self) -> Result<VectorField, CliError> {
        let (n, m, _) = self.dims()?;
        let scope = Scope::system(n, m);
        let comps = (1..=n)
            .map(|i| self.expr("system", &format!("f{i}"), &scope))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(extra) = self.sections["system"]
            .entries
            .keys()
            .find(|k| k.starts_with('f') && k[1..].parse::<usize>().is_ok_and(|i| i > n))
        {
            return Err(invalid("system", extra, format!("beyond dim = {n}")));
        }
        VectorField::new(comps, m).map_err(|e| invalid("system", "f", e))
    }

    pub fn input(&self) -> Result<InputSignal, CliError> {
        let (_, m, _) = self.dims()?;
        let sec = self.sections.get("input");
        let all_zero = sec.is_some_and(|s| s.flags.iter().any(|f| f == "zero"))
            || self.get("input", "u") == Some("zero");
        if m == 0 || all_zero {
            return Ok(InputSignal::zero(m));
        }
        let comps = (1..=m)
            .map(|j| {
                let key = format!("u{j}");
                match self.get("input", &key) {
                    Some("zero") => Ok(Expr::constant(0.0)),
                    _ => self.expr("input", &key, &Scope::TIME),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        InputSignal::new(comps).map_err(|e| invalid("input", "u", e))
    }

    pub fn has_certificate(&self) -> bool {
        self.sections.contains_key("certificate")
    }

    pub fn certificate(&self) -> Result<Certificate, CliError> {
        let (n, _, start) = self.dims()?;
        let theorem_name = self.require("certificate", "theorem")?;
        let theorem = Theorem::from_name(theorem_name).ok_or_else(|| {
            invalid(
                "certificate",
                "theorem",
                format!("unknown theorem {theorem_name:?}"),
            )
        })?;
        let v = self.expr("certificate", "V", &Scope::system(n, 0))?;
        let signal = |key: &str| -> Result<ScalarSignal, CliError> {
            let e = self.expr("certificate", key, &Scope::TIME)?;
            ScalarSignal::from_expr(e, start).map_err(|e| invalid("certificate", key, e))
        };
        let mu = signal("mu")?;
        let gain = |key: &str| -> Result<Option<Expr>, CliError> {
            match self.get("certificate", key) {
                Some(_) => Ok(Some(self.expr("certificate", key, &Scope::GAIN)?)),
                None => Ok(None),
            }
        };
        let bound = |key: &str, role: Role| -> Result<ComparisonFn, CliError> {
            match self.get("bounds", key) {
                Some(src) => parse_bound(src, role).map_err(|e| invalid("bounds", key, e)),
                None if is_quadratic(&v, n) => Ok(ComparisonFn::power_const(1.0, 2.0, role)?),
                None => Err(CliError::Missing {
                    section: "bounds".into(),
                    key: key.into(),
                }),
            }
        };
        let mut cert = Certificate::new(
            theorem,
            v.clone(),
            mu,
            bound("alpha1", Role::Lower)?,
            bound("alpha2", Role::Upper)?,
        );
        if self.get("certificate", "pi").is_some() {
            cert = cert.with_pi(signal("pi")?);
        }
        cert.rho = gain("rho")?;
        cert.rho1 = gain("rho1")?;
        cert.rho2 = gain("rho2")?;
        match theorem {
            Theorem::T2 if cert.pi.is_none() => return Err(missing("certificate", "pi")),
            Theorem::T3Iss | Theorem::C1Iiss if cert.rho.is_none() => {
                return Err(missing("certificate", "rho"))
            }
            Theorem::T4Iiss if cert.rho1.is_none() => return Err(missing("certificate", "rho1")),
            Theorem::T4Iiss if cert.rho2.is_none() => return Err(missing("certificate", "rho2")),
            _ => {}
        }
        Ok(cert)
    }

    /// The full analysis; `seed` overrides `[analysis] seed`.
    pub fn analysis(&self, name: &str, seed: Option<u64>) -> Result<Analysis, CliError> {
        let (n, m, start) = self.dims()?;
        let field = self.field()?;
        let input = self.input()?;
        let certificate = self.certificate()?;
        let t0 = self.number("analysis", "t0", Some(start))?;
        let x0 = parse_list("analysis", "x0", self.require("analysis", "x0")?)?;
        if x0.len() != n {
            return Err(invalid(
                "analysis",
                "x0",
                format!("{} values for dim = {n}", x0.len()),
            ));
        }
        let tf = self.number("analysis", "tf", None)?;
        if !(tf > t0) {
            return Err(invalid("analysis", "tf", format!("must exceed t0 = {t0}")));
        }
        let horizon = self.number("analysis", "horizon", Some(DEFAULT_HORIZON.max(tf)))?;
        let file_seed = match self.get("analysis", "seed") {
            Some(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|_| invalid("analysis", "seed", "not an unsigned integer"))?,
            None => 0,
        };
        let region = match self.get("analysis", "box") {
            Some(b) => SampleBox::parse(b, n, m).map_err(|e| invalid("analysis", "box", e))?,
            None => {
                let xmax = x0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                SampleBox::symmetric((t0, tf.min(t0 + 50.0)), (2.0 * xmax).max(3.0), n, 1.0, m)
            }
        };
        let count = self.number("analysis", "samples", Some(20_000.0))?;
        if count < 1.0 || count.fract() != 0.0 {
            return Err(invalid("analysis", "samples", "must be a positive integer"));
        }
        let pair = match (
            self.get("certificate", "rate_alpha"),
            self.get("certificate", "rate_beta"),
        ) {
            (Some(a), Some(b)) => Some((
                parse_f64("certificate", "rate_alpha", a)?,
                parse_f64("certificate", "rate_beta", b)?,
            )),
            (None, None) => None,
            (Some(_), None) => return Err(missing("certificate", "rate_beta")),
            (None, Some(_)) => return Err(missing("certificate", "rate_alpha")),
        };
        Ok(Analysis {
            name: name.to_string(),
            field,
            input,
            certificate,
            certified_pair: pair,
            reference: None,
            t0,
            x0,
            tf,
            horizon,
            alpha_min: self.number("analysis", "alpha_min", Some(DEFAULT_ALPHA_MIN))?,
            rtol: self.number("analysis", "rtol", Some(1e-9))?,
            atol: self.number("analysis", "atol", Some(1e-12))?,
            sampler: Sampler {
                region,
                count: count as usize,
                seed: seed.unwrap_or(file_seed),
            },
            epsilon: self.number("analysis", "epsilon", Some(1e-6))?,
        })
    }
}

fn missing(section: &str, key: &str) -> CliError {
    CliError::Missing {
        section: section.into(),
        key: key.into(),
    }
}

fn fmt_range(r: (f64, f64)) -> String {
    format!("{}:{}", r.0, r.1)
}

/// Renders a catalog entry in the system file format.
pub fn render_system_file(entry: &CatalogEntry) -> String {
    let a = &entry.analysis;
    let c = &a.certificate;
    let mut s = String::new();
    let _ = writeln!(s, "# {}", entry.summary);
    let _ = writeln!(s, "[system]");
    let _ = writeln!(s, "dim = {}", a.field.state_dim());
    if c.mu.domain_start() != 0.0 {
        let _ = writeln!(s, "start = {}", c.mu.domain_start());
    }
    for (i, f) in a.field.components().iter().enumerate() {
        let _ = writeln!(s, "f{} = {f}", i + 1);
    }
    let _ = writeln!(s, "\n[input]");
    let _ = writeln!(s, "dim = {}", a.input.dim());
    if a.input.dim() > 0 {
        if a.input.is_zero() {
            let _ = writeln!(s, "zero");
        } else {
            for (j, u) in a.input.components().iter().enumerate() {
                let _ = writeln!(s, "u{} = {u}", j + 1);
            }
        }
    }
    let _ = writeln!(s, "\n[certificate]");
    let _ = writeln!(s, "theorem = {}", c.theorem);
    let _ = writeln!(s, "V = {}", c.v);
    let _ = writeln!(s, "mu = {}", c.mu);
    if let Some(pi) = &c.pi {
        let _ = writeln!(s, "pi = {pi}");
    }
    for (k, g) in [("rho", &c.rho), ("rho1", &c.rho1), ("rho2", &c.rho2)] {
        if let Some(g) = g {
            let _ = writeln!(s, "{k} = {g}");
        }
    }
    if let Some((al, be)) = a.certified_pair {
        let _ = writeln!(s, "rate_alpha = {al}");
        let _ = writeln!(s, "rate_beta = {be}");
    }
    let _ = writeln!(s, "\n[bounds]");
    let _ = writeln!(s, "alpha1 = {}", c.alpha1);
    let _ = writeln!(s, "alpha2 = {}", c.alpha2);
    let _ = writeln!(s, "\n[analysis]");
    let _ = writeln!(s, "t0 = {}", a.t0);
    let x0: Vec<String> = a.x0.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "x0 = {}", x0.join(", "));
    let _ = writeln!(s, "tf = {}", a.tf);
    let _ = writeln!(s, "horizon = {}", a.horizon);
    let _ = writeln!(s, "rtol = {:e}", a.rtol);
    let _ = writeln!(s, "atol = {:e}", a.atol);
    let _ = writeln!(s, "epsilon = {:e}", a.epsilon);
    let _ = writeln!(s, "seed = {}", a.sampler.seed);
    let _ = writeln!(s, "samples = {}", a.sampler.count);
    let b = &a.sampler.region;
    let mut boxed = format!("t={}", fmt_range(b.t));
    boxed += &format!(
        " x={}",
        b.x.iter()
            .map(|&r| fmt_range(r))
            .collect::<Vec<_>>()
            .join(",")
    );
    if !b.u.is_empty() {
        boxed += &format!(
            " u={}",
            b.u.iter()
                .map(|&r| fmt_range(r))
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    let _ = writeln!(s, "box = {boxed}");
    s
}

/// Pretty JSON with sorted keys and every float written with 17
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                let _ = write!(out, "{f:.16e}");
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input_sha256: String,
    timestamp: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    result: &'a T,
}

fn wrap<T: Serialize>(
    command: &'static str,
    input: &[u8],
    seed: Option<u64>,
    result: &T,
) -> String {
    to_json(&Envelope {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        input_sha256: sha256_hex(input),
        timestamp: timestamp(),
        seed,
        result,
    })
}

pub fn status_code(s: Status) -> i32 {
    match s {
        Status::Pass => EXIT_PASS,
        Status::Violation => EXIT_VIOLATION,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Name, stroke colour and points of one polyline.
pub type Series<'a> = (&'a str, &'a str, Vec<(f64, f64)>);

/// Line plot of `|x(t)|` and the envelope as one polyline each.
pub fn render_svg(series: &[Series<'_>]) -> String {
    let (w, h, ml, mr, mt, mb) = (800.0, 480.0, 80.0, 20.0, 20.0, 50.0);
    let finite = series
        .iter()
        .flat_map(|s| s.2.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - y / y1 * (h - mt - mb);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<g stroke="black" stroke-width="1">
<line x1="{ml}" y1="{}" x2="{}" y2="{}"/>
<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}"/>
</g>"#,
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    let _ = writeln!(
        s,
        r#"<g font-family="sans-serif" font-size="11" fill="black">"#
    );
    for i in 0..=5 {
        let xv = x0 + (x1 - x0) * i as f64 / 5.0;
        let yv = y1 * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"#,
            px(xv),
            h - mb,
            h - mb + 5.0,
            h - mb + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="black"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"#,
            ml - 5.0,
            py(yv),
            ml,
            ml - 8.0,
            py(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#,
        (ml + w - mr) / 2.0,
        h - 12.0
    );
    let _ = writeln!(s, "</g>");
    for (i, (name, color, pts)) in series.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y.min(y1))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{name}</title></polyline>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            w - mr - 120.0,
            mt + 15.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn trajectory_csv(traj: &Trajectory, rows: &[(f64, Vec<f64>, f64, Option<f64>)]) -> String {
    let n = traj.states[0].len();
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push_str(",norm");
    if rows.first().is_some_and(|r| r.3.is_some()) {
        s.push_str(",env");
    }
    s.push('\n');
    for (t, x, norm, env) in rows {
        let _ = write!(s, "{t:e}");
        for v in x {
            let _ = write!(s, ",{v:e}");
        }
        let _ = write!(s, ",{norm:e}");
        if let Some(e) = env {
            let _ = write!(s, ",{e:e}");
        }
        s.push('\n');
    }
    s
}

#[derive(Parser, Debug)]
#[command(
    name = "indef-lyap",
    version,
    about = "Stability certificates for time-varying systems with indefinite Lyapunov derivatives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a scalar rate function mu(t).
    Classify(ClassifyArgs),
    /// Run the full analysis described by a system file.
    Verify(VerifyArgs),
    /// Simulate a system file and print the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Tabulate the drift convolution kappa(t, t0).
    Kappa(KappaArgs),
    /// List the shipped systems or write them out as system files.
    Catalog(CatalogArgs),
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    /// Comma-separated initial times.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t0s: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_MIN)]
    alpha_min: f64,
    /// Treat mu as periodic with this period.
    #[arg(long)]
    period: Option<f64>,
    /// Left end of the time domain.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    start: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    file: PathBuf,
    /// Write an SVG of |x(t)| against the envelope.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    file: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    /// Comma-separated initial state.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    tf: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Rows on a uniform grid of this many points instead of at the steps.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct KappaArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    #[arg(long, allow_hyphen_values = true)]
    pi: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    grid: f64,
    /// Write the sampled curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    /// Write one `<name>.sys` per entry into this directory.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Print one entry's system file.
    #[arg(long)]
    show: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_PASS
                }
                _ => EXIT_ERROR,
            };
            let _ = if code == EXIT_PASS {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = match cli.command {
        Command::Classify(a) => cmd_classify(&a, out),
        Command::Verify(a) => {
            seed_from(a.seed, env_seed.as_deref()).and_then(|s| cmd_verify(&a, s, out))
        }
        Command::Simulate(a) => {
            seed_from(None, env_seed.as_deref()).and_then(|s| cmd_simulate(&a, s, out))
        }
        Command::Kappa(a) => cmd_kappa(&a, out),
        Command::Catalog(a) => cmd_catalog(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn seed_from(flag: Option<u64>, env: Option<&str>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match env {
        Some(v) => v.trim().parse::<u64>().map(Some).map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        None => Ok(None),
    }
}

fn write_out(out: &mut dyn Write, s: &str) -> Result<(), CliError> {
    out.write_all(s.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

fn write_file(path: &Path, s: &str) -> Result<(), CliError> {
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct ClassifyResult {
    mu: String,
    verdict: crate::quadsig::StabilityVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    periodic_integral: Option<f64>,
}

fn cmd_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let signal = ScalarSignal::parse(&a.mu, a.start)?;
    let (verdict, periodic_integral) = match a.period {
        Some(p) => (
            classify_periodic(&signal, p)?,
            Some(periodic_test(&signal, p)?),
        ),
        None => {
            let t0s = a
                .t0s
                .clone()
                .unwrap_or_else(|| default_t0_samples(a.start, a.horizon));
            (classify(&signal, a.horizon, &t0s, a.alpha_min)?, None)
        }
    };
    let code = if verdict.class > StabilityClass::None {
        EXIT_PASS
    } else if verdict.inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_VIOLATION
    };
    let input = format!(
        "mu={};t0s={:?};horizon={};alpha_min={};period={:?};start={}",
        a.mu, a.t0s, a.horizon, a.alpha_min, a.period, a.start
    );
    let result = ClassifyResult {
        mu: signal.to_string(),
        verdict,
        periodic_integral,
    };
    write_out(out, &wrap("classify", input.as_bytes(), None, &result))?;
    Ok(code)
}

fn load(path: &Path) -> Result<(Vec<u8>, SystemFile), CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Io {
        path: path.display().to_string(),
        msg: "not UTF-8".into(),
    })?;
    Ok((bytes, SystemFile::parse(&text)?))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned())
}

fn plot_series(outcome: &AnalysisOutcome, input: &InputSignal) -> Result<String, CliError> {
    let traj = &outcome.trajectory;
    let mut series = Vec::new();
    match &outcome.envelope {
        Some(env) => {
            let samples = envelope_samples(traj, env, input)?;
            series.push((
                "|x(t)|",
                "#1f77b4",
                samples.iter().map(|s| (s.0, s.1)).collect(),
            ));
            series.push((
                "envelope",
                "#d62728",
                samples.iter().map(|s| (s.0, s.2)).collect(),
            ));
        }
        None => {
            let pts = dense_points(traj, 4)
                .into_iter()
                .map(|t| Ok((t, euclidean(&traj.interpolate(t)?))))
                .collect::<Result<Vec<_>, SimError>>()?;
            series.push(("|x(t)|", "#1f77b4", pts));
        }
    }
    Ok(render_svg(&series))
}

fn cmd_verify(a: &VerifyArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<i32, CliError> {
    let (bytes, file) = load(&a.file)?;
    let analysis = file.analysis(&file_stem(&a.file), seed)?;
    let outcome = run_analysis(&analysis)?;
    if let Some(p) = &a.plot {
        write_file(p, &plot_series(&outcome, &analysis.input)?)?;
    }
    write_out(
        out,
        &wrap(
            "verify",
            &bytes,
            Some(analysis.sampler.seed),
            &outcome.report,
        ),
    )?;
    Ok(status_code(outcome.report.status))
}

fn cmd_simulate(a: &SimulateArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<i32, CliError> {
    let (_, mut file) = load(&a.file)?;
    {
        let sec = file.sections.entry("analysis".into()).or_default();
        if let Some(t0) = a.t0 {
            sec.entries.insert("t0".into(), (0, t0.to_string()));
        }
        if let Some(x0) = &a.x0 {
            sec.entries.insert("x0".into(), (0, x0.clone()));
        }
        if let Some(tf) = a.tf {
            sec.entries.insert("tf".into(), (0, tf.to_string()));
        }
    }
    let (traj, env, input) = if file.has_certificate() {
        let analysis = file.analysis(&file_stem(&a.file), seed)?;
        let outcome = run_analysis(&analysis)?;
        (outcome.trajectory, outcome.envelope, analysis.input)
    } else {
        let field = file.field()?;
        let input = file.input()?;
        let (_, _, start) = file.dims()?;
        let t0 = file.number("analysis", "t0", Some(start))?;
        let tf = file.number("analysis", "tf", None)?;
        let x0 = parse_list("analysis", "x0", file.require("analysis", "x0")?)?;
        let opts = SimOptions {
            rtol: file.number("analysis", "rtol", Some(1e-9))?,
            atol: file.number("analysis", "atol", Some(1e-12))?,
            ..SimOptions::default()
        };
        (
            simulate_with(&field, &input, t0, &x0, tf, &opts)?,
            None,
            input,
        )
    };
    let points = match a.points {
        Some(k) if k >= 2 => (0..k)
            .map(|i| traj.t0() + (traj.t_end() - traj.t0()) * i as f64 / (k - 1) as f64)
            .collect(),
        Some(_) => return Err(CliError::Usage("--points needs at least 2".into())),
        None => traj.times.clone(),
    };
    let envs = match &env {
        Some(e) => Some(envelope_samples_at(&traj, e, &input, &points)?),
        None => None,
    };
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let x = traj.interpolate(t)?;
            let norm = euclidean(&x);
            Ok((t, x, norm, envs.as_ref().map(|e| e[i].2)))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let csv = trajectory_csv(&traj, &rows);
    match &a.csv {
        Some(p) => write_file(p, &csv)?,
        None => write_out(out, &csv)?,
    }
    Ok(
        if traj.termination == crate::odesim::Termination::Completed {
            EXIT_PASS
        } else {
            EXIT_INCONCLUSIVE
        },
    )
}

#[derive(Serialize)]
struct KappaResult {
    mu: String,
    pi: String,
    t0: f64,
    horizon: f64,
    sup: f64,
    sup_time: f64,
    tail: f64,
    bounded: bool,
    vanishing: bool,
    overflow: bool,
    samples: usize,
}

fn cmd_kappa(a: &KappaArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let start = a.t0.min(0.0);
    let mu = ScalarSignal::parse(&a.mu, start)?;
    let pi = ScalarSignal::parse(&a.pi, start)?;
    let pair = DriftPair::new(mu.clone(), pi.clone(), a.horizon - a.t0)?;
    let curve = kappa(&pair, a.t0, a.horizon, a.grid)?;
    if let Some(p) = &a.csv {
        let mut s = String::from("t,kappa\n");
        for (t, k) in &curve.samples {
            let _ = writeln!(s, "{t:e},{k:e}");
        }
        write_file(p, &s)?;
    }
    let result = KappaResult {
        mu: mu.to_string(),
        pi: pi.to_string(),
        t0: curve.t0,
        horizon: curve.horizon,
        sup: curve.sup_value,
        sup_time: curve.sup_time,
        tail: curve.tail_value,
        bounded: curve.bounded,
        vanishing: curve.vanishing,
        overflow: curve.overflow,
        samples: curve.samples.len(),
    };
    let input = format!(
        "mu={};pi={};t0={};horizon={};grid={}",
        a.mu, a.pi, a.t0, a.horizon, a.grid
    );
    write_out(out, &wrap("kappa", input.as_bytes(), None, &result))?;
    Ok(if curve.overflow || !curve.bounded {
        EXIT_VIOLATION
    } else if curve.vanishing {
        EXIT_PASS
    } else {
        EXIT_INCONCLUSIVE
    })
}

fn cmd_catalog(a: &CatalogArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let entries = catalog();
    if let Some(name) = &a.show {
        let e = entries
            .iter()
            .find(|e| &e.name == name)
            .ok_or_else(|| CliError::Usage(format!("no catalog entry named {name:?}")))?;
        write_out(out, &render_system_file(e))?;
        return Ok(EXIT_PASS);
    }
    if let Some(dir) = &a.export {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for e in &entries {
            write_file(&dir.join(format!("{}.sys", e.name)), &render_system_file(e))?;
        }
    }
    let mut s = String::new();
    for e in &entries {
        let _ = writeln!(s, "{:<24} {}", e.name, e.summary);
    }
    write_out(out, &s)?;
    Ok(EXIT_PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["indef-lyap"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn system_file_syntax_errors() {
        assert!(matches!(
            SystemFile::parse("dim = 1"),
            Err(CliError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            SystemFile::parse("[nope]"),
            Err(CliError::Syntax { .. })
        ));
        assert!(matches!(
            SystemFile::parse("[system]\ndim = 1\ndim = 2"),
            Err(CliError::Syntax { line: 3, .. })
        ));
        let f = SystemFile::parse("# c\n[system]\ndim = 1 # trailing\nf1 = -x1\n[input]\nzero\n")
            .unwrap();
        assert_eq!(f.get("system", "dim"), Some("1"));
        assert_eq!(f.sections["input"].flags, vec!["zero".to_string()]);
    }

    #[test]
    fn bounds_parse() {
        let b = parse_bound("power k=2^(1-2)*(1+t) m=4", Role::Lower).unwrap();
        assert!((b.eval(1.0, 2.0).unwrap() - 0.5 * 2.0 * 16.0).abs() < 1e-12);
        let b = parse_bound("expr s + s^3", Role::Upper).unwrap();
        assert_eq!(b.eval(0.0, 1.0).unwrap(), 2.0);
        assert!(parse_bound("power k=1", Role::Lower).is_err());
        assert!(parse_bound("linear", Role::Lower).is_err());
    }

    #[test]
    fn quadratic_default_bounds() {
        let text = "[system]\ndim = 1\nf1 = -x1\n[certificate]\ntheorem = T1\nV = x1^2\nmu = -2\n[analysis]\nx0 = 1\ntf = 5\n";
        let f = SystemFile::parse(text).unwrap();
        let c = f.certificate().unwrap();
        assert_eq!(
            c.alpha1.to_string(),
            ComparisonFn::power_const(1.0, 2.0, Role::Lower)
                .unwrap()
                .to_string()
        );
        let text = text.replace("V = x1^2", "V = x1^4");
        let f = SystemFile::parse(&text).unwrap();
        assert!(matches!(f.certificate(), Err(CliError::Missing { key, .. }) if key == "alpha1"));
        assert!(is_quadratic(
            &parse_in("x1^2 + 3*x2^2", &Scope::system(2, 0)).unwrap(),
            2
        ));
        assert!(!is_quadratic(
            &parse_in("x1^2*(1+t)", &Scope::system(1, 0)).unwrap(),
            1
        ));
    }

    #[test]
    fn catalog_files_round_trip() {
        for e in catalog() {
            let text = render_system_file(&e);
            let f = SystemFile::parse(&text).unwrap();
            let a = f.analysis(&e.name, None).unwrap();
            let b = &e.analysis;
            assert_eq!(a.field, b.field, "{}", e.name);
            assert_eq!(a.input, b.input);
            assert_eq!(a.certificate, b.certificate, "{}", e.name);
            assert_eq!(a.certified_pair, b.certified_pair);
            assert_eq!(
                (a.t0, &a.x0, a.tf, a.horizon),
                (b.t0, &b.x0, b.tf, b.horizon)
            );
            assert_eq!(a.sampler, b.sampler);
        }
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let s = to_json(&serde_json::json!({"b": 0.1, "a": [1, 2.5], "c": null}));
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.5000000000000000e0"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn classify_exit_codes() {
        let (code, out, _) = run_capture(&["classify", "--mu", "-1"]);
        assert_eq!(code, 0);
        assert!(out.contains("uniform_exponential"));
        let (code, out, _) = run_capture(&["classify", "--mu", "-2/(1+t)"]);
        assert_eq!(code, 0);
        assert!(out.contains("\"asymptotic\"") && out.contains("not exponential at horizon"));
        let (code, out, _) = run_capture(&["classify", "--mu", "sin(t)", "--period", "6.2831853"]);
        assert_eq!(code, 1, "{out}");
        let (code, _, err) = run_capture(&["classify", "--mu", "sin(x1)"]);
        assert_eq!(code, 3);
        assert!(err.contains("error"));
        let (code, _, _) = run_capture(&["classify"]);
        assert_eq!(code, 3);
    }

    #[test]
    fn kappa_command() {
        let (code, out, _) = run_capture(&["kappa", "--mu", "-2*t/(1+t^2)", "--pi", "1/(1+t^2)"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["result"]["sup"].as_f64().unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(v["result"]["vanishing"], Value::Bool(true));
        let (_, out, _) = run_capture(&["kappa", "--mu", "-1", "--pi", "0"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["result"]["sup"].as_f64(), Some(0.0));
        let (code, out, _) = run_capture(&["kappa", "--mu", "1", "--pi", "1", "--horizon", "50"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(code, 1);
        assert_eq!(v["result"]["bounded"], Value::Bool(false));
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = render_svg(&[
            ("a", "#000", vec![(0.0, 1.0), (1.0, 0.5)]),
            ("b", "#f00", vec![(0.0, 2.0), (1.0, f64::NAN)]),
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<svg").count(), svg.matches("</svg>").count());
        assert!(svg.contains("<text"));
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(seed_from(Some(3), Some("9")).unwrap(), Some(3));
        assert_eq!(seed_from(None, Some("9")).unwrap(), Some(9));
        assert_eq!(seed_from(None, None).unwrap(), None);
        assert!(seed_from(None, Some("x")).is_err());
    }
}
