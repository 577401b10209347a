//! Stochastic Runge-Kutta methods for single-integrand Stratonovich SDEs
//!
//! ```text
//! dX = λ f(X) dt + σ f(X) ∘ dW
//! ```
//!
//! Because drift and noise share one integrand, the equation is an ODE
//! driven by the measure `μ(t) = λt + σW(t)`, and any deterministic
//! Runge-Kutta tableau can be applied with `Δμ` in place of the step size.
//! A method of deterministic order `p_d` then converges with mean-square
//! and weak order `⌊p_d / 2⌋`.
//!
//! - [`tableau`]: Butcher tableaus, built-in Gauss, Radau IIA and explicit
//!   families, and a JSON tableau format.
//! - [`btree`]: rooted trees, `α`, `γ`, elementary weights and order checks.
//! - [`driving`]: seeded Wiener paths with exact dyadic coarsening, weak
//!   increments and closed-form moments of `μ(h)`.
//! - [`solver`]: the step map with Newton or fixed-point stage solves.
//! - [`problems`]: the sinh, Kubo oscillator and rigid body benchmarks.
//! - [`study`]: Monte Carlo mean-square and weak convergence studies,
//!   order fitting and invariant drift.
//! - [`cli`]: the `strat-rk` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod btree;
pub mod cli;
pub mod driving;
pub mod error;
pub mod problems;
pub mod solver;
pub mod study;
pub mod tableau;

pub use error::{Error, Result, SolveError};
