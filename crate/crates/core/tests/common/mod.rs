#![allow(dead_code)]

use indef_lyap::exprlang::{BinOp, Expr, Func, NamedConst, Var};
pub use indef_lyap::quadsig::PiecewiseConstant;
use indef_lyap::quadsig::ScalarSignal;
use proptest::prelude::*;

/// Random expression trees in `t`, `s`, `x1..x3`, `u1..u2` with the
/// non-negative constants the parser produces.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Const),
        (0u32..100).prop_map(|k| Expr::Const(k as f64)),
        Just(Expr::Named(NamedConst::Pi)),
        Just(Expr::Named(NamedConst::E)),
        Just(Expr::Var(Var::T)),
        Just(Expr::Var(Var::S)),
        (1usize..=3).prop_map(|i| Expr::Var(Var::X(i))),
        (1usize..=2).prop_map(|j| Expr::Var(Var::U(j))),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::binary(o, l, r)),
            (0usize..Func::ALL.len(), prop::collection::vec(inner, 2)).prop_map(|(k, mut args)| {
                let f = Func::ALL[k];
                args.truncate(f.arity());
                Expr::Call(f, args)
            }),
        ]
    })
}

/// Piecewise-constant signal on `[0, span]` with `pieces` levels in `[lo, hi]`.
pub fn arb_piecewise(span: f64, lo: f64, hi: f64) -> impl Strategy<Value = PiecewiseConstant> {
    (1usize..8)
        .prop_flat_map(move |pieces| {
            (
                prop::collection::btree_set(1u32..999, pieces - 1),
                prop::collection::vec(lo..hi, pieces),
            )
        })
        .prop_map(move |(cuts, values)| {
            let breaks = cuts.into_iter().map(|c| span * c as f64 / 1000.0).collect();
            PiecewiseConstant::new(breaks, values).expect("sorted breaks")
        })
}

pub fn piecewise_signal(p: &PiecewiseConstant) -> ScalarSignal {
    ScalarSignal::piecewise(p.clone(), 0.0)
}

/// Classical RK4 for `y' = a(t)·y + b(t)` with piecewise-constant `a`, `b`;
/// steps of at most `h` that land exactly on every break and on `stops`.
/// Returns `y` at each stop.
pub fn rk4_scalar_piecewise(
    a: &PiecewiseConstant,
    b: &PiecewiseConstant,
    y0: f64,
    h: f64,
    stops: &[f64],
) -> Vec<f64> {
    let mut marks: Vec<f64> = a
        .breaks()
        .iter()
        .chain(b.breaks())
        .chain(stops)
        .copied()
        .collect();
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let mut out = Vec::new();
    let (mut t, mut y) = (0.0f64, y0);
    for &m in &marks {
        // Coefficients are constant on (t, m).
        let mid = 0.5 * (t + m);
        let (ca, cb) = (a.value(mid), b.value(mid));
        let f = |y: f64| ca * y + cb;
        while t < m {
            let step = h.min(m - t);
            let k1 = f(y);
            let k2 = f(y + 0.5 * step * k1);
            let k3 = f(y + 0.5 * step * k2);
            let k4 = f(y + step * k3);
            y += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = if m - t <= h { m } else { t + step };
        }
        if stops.contains(&m) {
            out.push(y);
        }
    }
    out
}
