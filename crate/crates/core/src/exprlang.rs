//! A small arithmetic expression language.
//!
//! Every scalar or vector function handed to the library (rates, drifts,
//! Lyapunov candidates, comparison functions, vector fields, inputs) is
//! written in this language. Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?          (right associative)
//! primary := number | name | func "(" expr ("," expr)* ")" | "(" expr ")"
//! name    := "t" | "s" | "x"<i> | "u"<j> | "pi" | "e"
//! func    := sin | cos | abs | exp | ln | sqrt | min | max
//! ```
//!
//! Identifiers are ASCII and case-sensitive. `-2^2` is `-(2^2)`, and
//! `2^3^2` is `2^(3^2)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A variable an expression may reference. State and input indices are
/// one-based, as written in source (`x1`, `u2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    S,
    X(usize),
    U(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::S => f.write_str("s"),
            Var::X(i) => write!(f, "x{i}"),
            Var::U(j) => write!(f, "u{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Abs,
    Exp,
    Ln,
    Sqrt,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Abs,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Parsed expression tree.
///
/// `Const` nodes produced by the parser are always finite and non-negative;
/// a leading minus is a `Neg` node. Use [`Expr::constant`] to build a
/// literal from an arbitrary finite value.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Named(NamedConst),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Which variables a parsed expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    /// Number of state coordinates `x1..xn`.
    pub n: usize,
    /// Number of input coordinates `u1..um`.
    pub m: usize,
    pub allow_t: bool,
    pub allow_s: bool,
}

impl Scope {
    /// Everything allowed, any index.
    pub const ANY: Scope = Scope {
        n: usize::MAX,
        m: usize::MAX,
        allow_t: true,
        allow_s: true,
    };
    /// Functions of time only.
    pub const TIME: Scope = Scope {
        n: 0,
        m: 0,
        allow_t: true,
        allow_s: false,
    };
    /// Gains `ρ(s)`.
    pub const GAIN: Scope = Scope {
        n: 0,
        m: 0,
        allow_t: false,
        allow_s: true,
    };
    /// Comparison functions `α(t, s)`.
    pub const TIME_GAIN: Scope = Scope {
        n: 0,
        m: 0,
        allow_t: true,
        allow_s: true,
    };

    /// Functions of `(t, x1..xn, u1..um)`.
    pub fn system(n: usize, m: usize) -> Scope {
        Scope {
            n,
            m,
            allow_t: true,
            allow_s: false,
        }
    }

    pub fn admits(&self, var: Var) -> bool {
        match var {
            Var::T => self.allow_t,
            Var::S => self.allow_s,
            Var::X(i) => i >= 1 && i <= self.n,
            Var::U(j) => j >= 1 && j <= self.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: found {found}, expected one of: {}", expected.join(", "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at byte {offset} is outside the declared dimensions")]
    OutOfScope { name: String, offset: usize },
    #[error("`{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: &'static str,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {reason} in `{expr}`")]
    Domain { reason: &'static str, expr: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

/// Values for the variables of one evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Binding<'a> {
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub x: &'a [f64],
    pub u: &'a [f64],
}

impl<'a> Binding<'a> {
    pub fn time(t: f64) -> Binding<'static> {
        Binding {
            t: Some(t),
            ..Binding::default()
        }
    }

    pub fn gain(s: f64) -> Binding<'static> {
        Binding {
            s: Some(s),
            ..Binding::default()
        }
    }

    pub fn time_gain(t: f64, s: f64) -> Binding<'static> {
        Binding {
            t: Some(t),
            s: Some(s),
            ..Binding::default()
        }
    }

    pub fn state(t: f64, x: &'a [f64], u: &'a [f64]) -> Binding<'a> {
        Binding {
            t: Some(t),
            s: None,
            x,
            u,
        }
    }
}

impl Expr {
    /// Literal for any finite value; negative values become `Neg(Const)`.
    pub fn constant(v: f64) -> Expr {
        assert!(v.is_finite(), "expression constants must be finite");
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Const(-v)))
        } else {
            Expr::Const(v)
        }
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Collects every variable mentioned, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.visit_vars(&mut |v| out.push(v));
        out.sort();
        out.dedup();
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) | Expr::Named(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) => a.visit_vars(f),
            Expr::Binary(_, l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
        }
    }

    pub fn mentions(&self, var: Var) -> bool {
        let mut found = false;
        self.visit_vars(&mut |v| found |= v == var);
        found
    }

    /// First variable not admitted by `scope`, if any.
    pub fn check_scope(&self, scope: &Scope) -> Option<Var> {
        self.variables().into_iter().find(|v| !scope.admits(*v))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Named(_) | Expr::Var(_) => 1,
            Expr::Neg(a) => 1 + a.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    /// Arguments whose sign changes mark points where the expression is
    /// not smooth: `g` for `abs(g)`, `a - b` for `min(a, b)` / `max(a, b)`.
    pub fn kink_arguments(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_kinks(&mut out);
        out
    }

    fn collect_kinks(&self, out: &mut Vec<Expr>) {
        match self {
            Expr::Const(_) | Expr::Named(_) | Expr::Var(_) => {}
            Expr::Neg(a) => a.collect_kinks(out),
            Expr::Binary(_, l, r) => {
                l.collect_kinks(out);
                r.collect_kinks(out);
            }
            Expr::Call(func, args) => {
                match func {
                    Func::Abs => out.push(args[0].clone()),
                    Func::Min | Func::Max => {
                        out.push(Expr::binary(BinOp::Sub, args[0].clone(), args[1].clone()))
                    }
                    _ => {}
                }
                args.iter().for_each(|a| a.collect_kinks(out));
            }
        }
    }

    /// Evaluates in IEEE double precision.
    pub fn eval(&self, b: &Binding<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Named(c) => Ok(c.value()),
            Expr::Var(v) => lookup(*v, b),
            Expr::Neg(a) => Ok(-a.eval(b)?),
            Expr::Binary(op, l, r) => {
                let lv = l.eval(b)?;
                let rv = r.eval(b)?;
                match op {
                    BinOp::Add => Ok(lv + rv),
                    BinOp::Sub => Ok(lv - rv),
                    BinOp::Mul => Ok(lv * rv),
                    BinOp::Div => {
                        if rv == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        Ok(lv / rv)
                    }
                    BinOp::Pow => {
                        if lv == 0.0 && rv < 0.0 {
                            return Err(self.domain("zero raised to a negative power"));
                        }
                        if lv < 0.0 && rv.fract() != 0.0 {
                            return Err(self.domain("negative base with non-integer exponent"));
                        }
                        Ok(lv.powf(rv))
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(b)?;
                match func {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Abs => Ok(a.abs()),
                    Func::Exp => Ok(a.exp()),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(self.domain("logarithm of a non-positive value"));
                        }
                        Ok(a.ln())
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain("square root of a negative value"));
                        }
                        Ok(a.sqrt())
                    }
                    Func::Min => Ok(a.min(args[1].eval(b)?)),
                    Func::Max => Ok(a.max(args[1].eval(b)?)),
                }
            }
        }
    }

    fn domain(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            reason,
            expr: self.to_string(),
        }
    }
}

fn lookup(v: Var, b: &Binding<'_>) -> Result<f64, EvalError> {
    let found = match v {
        Var::T => b.t,
        Var::S => b.s,
        Var::X(i) => b.x.get(i.wrapping_sub(1)).copied(),
        Var::U(j) => b.u.get(j.wrapping_sub(1)).copied(),
    };
    found.ok_or_else(|| EvalError::Unbound(v.to_string()))
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        write!(f, "{v:e}")
    } else {
        write!(f, "{v}")
    }
}

/// Canonical fully parenthesized form; `parse` reads it back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => {
                f.write_str("(-")?;
                write_number(f, -c)?;
                f.write_str(")")
            }
            Expr::Const(c) => write_number(f, *c),
            Expr::Named(NamedConst::Pi) => f.write_str("pi"),
            Expr::Named(NamedConst::E) => f.write_str("e"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, l, r) => write!(f, "({l}{}{r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Parses with no restriction on variables.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    parse_in(source, &Scope::ANY)
}

/// Canonical text of `ast`.
pub fn print(ast: &Expr) -> String {
    ast.to_string()
}

/// Parses and rejects variables outside `scope`.
pub fn parse_in(source: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    if tokens.len() == 1 {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        scope,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected(&["operator", "end of input"])),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when digits follow, so `2e` stays a syntax error
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    found: format!("malformed number `{text}`"),
                    expected: vec!["number"],
                })?;
                out.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    found: format!("character `{ch}`"),
                    expected: vec!["number", "identifier", "operator", "(", ")", ","],
                });
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'s Scope,
}

const PRIMARY_START: &[&str] = &["number", "identifier", "(", "-"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            found: self.peek().describe(),
            expected: expected.to_vec(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(func) = Func::from_name(&name) {
                    return self.call(func, offset);
                }
                self.name(&name, offset)
            }
            _ => Err(self.unexpected(PRIMARY_START)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            _ => Err(self.unexpected(&[")", "operator"])),
        }
    }

    fn call(&mut self, func: Func, offset: usize) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::LParen => {
                self.bump();
            }
            _ => return Err(self.unexpected(&["("])),
        }
        let mut args = vec![self.expr()?];
        while let Tok::Comma = self.peek() {
            self.bump();
            args.push(self.expr()?);
        }
        match self.peek() {
            Tok::RParen => {
                self.bump();
            }
            _ => return Err(self.unexpected(&[")", ",", "operator"])),
        }
        if args.len() != func.arity() {
            return Err(ParseError::Arity {
                name: func.name(),
                offset,
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok(Expr::Call(func, args))
    }

    fn name(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let var = match name {
            "pi" => return Ok(Expr::Named(NamedConst::Pi)),
            "e" => return Ok(Expr::Named(NamedConst::E)),
            "t" => Var::T,
            "s" => Var::S,
            _ => match indexed(name) {
                Some(v) => v,
                None => {
                    return Err(ParseError::UnknownIdentifier {
                        name: name.to_string(),
                        offset,
                    })
                }
            },
        };
        if !self.scope.admits(var) {
            return Err(ParseError::OutOfScope {
                name: name.to_string(),
                offset,
            });
        }
        Ok(Expr::Var(var))
    }
}

fn indexed(name: &str) -> Option<Var> {
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    match head {
        "x" => Some(Var::X(idx)),
        "u" => Some(Var::U(idx)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("component f{index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("component f{index} references `{var}`, outside n={n}, m={m}")]
    Scope {
        index: usize,
        var: Var,
        n: usize,
        m: usize,
    },
    #[error("a vector field needs at least one component")]
    Empty,
    #[error("f(t,0,0) is not zero: component f{index} = {value} at t = {t}")]
    NonZeroAtOrigin { index: usize, t: f64, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Right-hand side `f(t, x, u)` of `ẋ = f(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    n: usize,
    m: usize,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>, m: usize) -> Result<Self, FieldError> {
        let n = components.len();
        if n == 0 {
            return Err(FieldError::Empty);
        }
        let scope = Scope::system(n, m);
        for (i, c) in components.iter().enumerate() {
            if let Some(var) = c.check_scope(&scope) {
                return Err(FieldError::Scope {
                    index: i + 1,
                    var,
                    n,
                    m,
                });
            }
        }
        Ok(VectorField { n, m, components })
    }

    pub fn parse(sources: &[&str], m: usize) -> Result<Self, FieldError> {
        let n = sources.len();
        let scope = Scope::system(n, m);
        let components = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_in(s, &scope).map_err(|source| FieldError::Parse {
                    index: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(components, m)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval_into(
        &self,
        t: f64,
        x: &[f64],
        u: &[f64],
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        let b = Binding::state(t, x, u);
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(&b)?;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.n];
        self.eval_into(t, x, u, &mut out)?;
        Ok(out)
    }

    /// Checks `f(t, 0, 0) = 0` at each sampled time.
    pub fn check_origin(&self, times: &[f64], tol: f64) -> Result<(), FieldError> {
        let zx = vec![0.0; self.n];
        let zu = vec![0.0; self.m];
        for &t in times {
            let v = self.eval(t, &zx, &zu)?;
            if let Some((i, val)) = v.iter().enumerate().find(|(_, val)| val.abs() > tol) {
                return Err(FieldError::NonZeroAtOrigin {
                    index: i + 1,
                    t,
                    value: *val,
                });
            }
        }
        Ok(())
    }
}
