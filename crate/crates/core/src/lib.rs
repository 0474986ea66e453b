//! Explicit-state probabilistic model checking.
//!
//! Pipeline: a PRISM-style program ([`prism`]) or an explicit transition
//! listing ([`explicit`]) becomes a sparse [`model::Model`] ([`builder`]),
//! which [`checkers`] verify against [`props`] formulas using the qualitative
//! algorithms in [`graphs`] and the equation solvers in [`solvers`].

pub mod bitset;
pub mod checkers;
pub mod builder;
pub mod explicit;
pub mod graphs;
pub mod model;
pub mod numeric;
pub mod prism;
pub mod props;
pub mod solvers;

pub use numeric::{Rational, Value};
