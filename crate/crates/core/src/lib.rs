//! Exact and Monte Carlo hitting-time statistics for random dynamical systems.
//!
//! Two engines are provided:
//!
//! * a symbolic engine for random Bernoulli measures on the full shift driven
//!   by an i.i.d. or Markov base ([`base`], [`fiber`], [`survival`],
//!   [`ledger`]), where survival probabilities `μ_ω(τ_A > k)` of cylinder
//!   targets are computed exactly with a pattern automaton;
//! * a circle engine for random compositions of `x ↦ m x mod 1` in exact
//!   fixed-point arithmetic ([`circle`]).
//!
//! [`stats`] compares observed curves with `e^{-t}` and [`expt`] drives
//! configuration-based experiments.

pub mod automaton;
pub mod base;
pub mod circle;
pub mod compensated;
pub mod error;
pub mod expt;
pub mod fiber;
pub mod ledger;
pub mod rng;
pub mod stats;
pub mod survival;

pub use base::{BaseProcess, BaseWindow};
pub use error::{Error, Result};
pub use fiber::{FiberMeasure, Pattern, RandomShiftSpec};
pub use survival::SurvivalCurve;
