//! Linear-equation and Bellman-equation solvers.
//!
//! Linear systems are in fixed-point form `x = A·x + b`; Bellman systems are
//! `x = opt (A·x + b)` over the row groups of `A`.

mod bellman;
mod foxglynn;
mod linear;
mod steady;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::numeric::Value;

pub use bellman::{solve_bellman, solve_bellman_from};
pub use foxglynn::{fox_glynn, FoxGlynn};
pub use linear::solve_linear;
pub use steady::steady_state_bscc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{method} did not converge after {iterations} iterations (last difference {residual:e})")]
    NoConvergence { method: &'static str, iterations: usize, residual: f64 },
    #[error("singular system: zero pivot at row {0}")]
    Singular(usize),
    #[error("method {0} is not available in exact mode")]
    NotExact(&'static str),
    #[error("invalid solver input: {0}")]
    Invalid(String),
    #[error("internal solver error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    Jacobi,
    GaussSeidel,
    Sor,
    Elimination,
}

impl LinearMethod {
    pub fn name(self) -> &'static str {
        match self {
            LinearMethod::Jacobi => "jacobi",
            LinearMethod::GaussSeidel => "gauss_seidel",
            LinearMethod::Sor => "sor",
            LinearMethod::Elimination => "elimination",
        }
    }

    pub fn is_iterative(self) -> bool {
        self != LinearMethod::Elimination
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellmanMethod {
    ValueIteration,
    PolicyIteration,
    ExactPolicyIteration,
}

impl BellmanMethod {
    pub fn name(self) -> &'static str {
        match self {
            BellmanMethod::ValueIteration => "vi",
            BellmanMethod::PolicyIteration => "pi",
            BellmanMethod::ExactPolicyIteration => "exact_pi",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown solver method '{0}'")]
pub struct UnknownMethod(pub String);

impl FromStr for LinearMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(LinearMethod::Jacobi),
            "gauss_seidel" => Ok(LinearMethod::GaussSeidel),
            "sor" => Ok(LinearMethod::Sor),
            "elimination" => Ok(LinearMethod::Elimination),
            _ => Err(UnknownMethod(s.to_string())),
        }
    }
}

impl FromStr for BellmanMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vi" => Ok(BellmanMethod::ValueIteration),
            "pi" => Ok(BellmanMethod::PolicyIteration),
            "exact_pi" => Ok(BellmanMethod::ExactPolicyIteration),
            _ => Err(UnknownMethod(s.to_string())),
        }
    }
}

impl fmt::Display for LinearMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BellmanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver configuration. Unset methods resolve per numeric backend:
/// Gauss-Seidel and value iteration for floats, elimination and exact policy
/// iteration for rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub linear: Option<LinearMethod>,
    pub bellman: Option<BellmanMethod>,
    pub precision: f64,
    pub relative: bool,
    pub max_iterations: usize,
    /// Relaxation factor for SOR.
    pub omega: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            linear: None,
            bellman: None,
            precision: 1e-6,
            relative: true,
            max_iterations: 1_000_000,
            omega: 0.9,
        }
    }
}

impl SolveOptions {
    pub fn with_linear(mut self, method: LinearMethod) -> Self {
        self.linear = Some(method);
        self
    }

    pub fn with_bellman(mut self, method: BellmanMethod) -> Self {
        self.bellman = Some(method);
        self
    }

    pub fn with_precision(mut self, precision: f64) -> Self {
        self.precision = precision;
        self
    }

    pub fn linear_method<V: Value>(&self) -> LinearMethod {
        self.linear
            .unwrap_or(if V::EXACT { LinearMethod::Elimination } else { LinearMethod::GaussSeidel })
    }

    pub fn bellman_method<V: Value>(&self) -> BellmanMethod {
        self.bellman
            .unwrap_or(if V::EXACT { BellmanMethod::ExactPolicyIteration } else { BellmanMethod::ValueIteration })
    }

    fn check(&self) -> Result<(), SolverError> {
        if !(self.precision > 0.0) {
            return Err(SolverError::Invalid(format!("precision must be positive, got {}", self.precision)));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(SolverError::Invalid(format!("SOR omega must lie in (0, 2), got {}", self.omega)));
        }
        Ok(())
    }
}

/// What a solver did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub method: &'static str,
    pub iterations: usize,
}

impl SolveStats {
    pub(crate) fn new(method: &'static str) -> Self {
        Self { method, iterations: 0 }
    }

    /// Merge the work of a follow-up solve into this record.
    pub fn absorb(&mut self, other: &SolveStats) {
        if self.method.is_empty() {
            self.method = other.method;
        }
        self.iterations += other.iterations;
    }
}

/// Largest componentwise difference between two iterates, relative to the
/// new value where that is nonzero.
pub(crate) fn difference<V: Value>(old: &[V], new: &[V], relative: bool) -> f64 {
    old.iter().zip(new).map(|(a, b)| diff_one(a, b, relative)).fold(0.0, f64::max)
}

pub(crate) fn diff_one<V: Value>(old: &V, new: &V, relative: bool) -> f64 {
    let d = new.sub_ref(old).abs_value().as_float();
    if relative {
        let scale = new.abs_value().as_float();
        if scale > 0.0 {
            return d / scale;
        }
    }
    d
}
