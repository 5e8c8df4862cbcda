//! Stability certificates for nonlinear time-varying systems
//! `ẋ = f(t, x, u)` built from Lyapunov functions whose time derivative is
//! only bounded by `μ(t)·V`, with `μ` allowed to change sign.
//!
//! Every verdict produced here is checked numerically on a finite horizon;
//! none of it is a proof.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod cli;
pub mod exprlang;
pub mod gronwall;
pub mod odesim;
pub mod quadsig;
pub mod verify;

pub use exprlang::{parse, print, Binding, Expr, VectorField};
pub use quadsig::{ScalarSignal, StabilityClass, StabilityVerdict, TransitionFactor};
