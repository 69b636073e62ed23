//! Modal simulation, energy functionals and decay-bound verification for
//! `u'' + Au − ∫₀^∞ g(s) B u(t − s) ds = 0`, where `A` and `B` share an
//! eigenbasis.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod energy;
pub mod history;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod simulator;
