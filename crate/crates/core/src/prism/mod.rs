//! PRISM-subset modelling language: lexer, parser, type checker, constant
//! substitution, evaluation and printing.

pub mod ast;
mod check;
pub mod eval;
pub(crate) mod lexer;
pub(crate) mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use check::{close_expression, parse_bindings, parse_literal, substitute_constants, typecheck};
pub use eval::{evaluate, Env, EvalError, NoEnv, Real, Val};
pub use parser::{parse_expression, parse_syntax};

/// Source position (1-based). Positions never take part in equality, so
/// ASTs compare structurally.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str("?")
        } else {
            write!(f, "{}:{}", self.line, self.col)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrismError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: {feature} not supported")]
    Unsupported { pos: Pos, feature: String },
    #[error("{pos}: unknown identifier '{name}'")]
    UnknownIdentifier { pos: Pos, name: String },
    #[error("{pos}: type error: {msg}")]
    Type { pos: Pos, msg: String },
    #[error("{pos}: duplicate {what} '{name}'")]
    Duplicate { pos: Pos, what: &'static str, name: String },
    #[error("{pos}: {msg}")]
    Bounds { pos: Pos, msg: String },
    #[error("cyclic definition involving '{0}'")]
    Cyclic(String),
    #[error("missing values for constants: {}", .0.join(", "))]
    MissingConstants(Vec<String>),
    #[error("value given for unknown constant '{0}'")]
    ExtraBinding(String),
    #[error("constant '{name}': {msg}")]
    Binding { name: String, msg: String },
    #[error("{pos}: {source}")]
    Eval { pos: Pos, source: EvalError },
}

/// Parse and type-check a program.
pub fn parse_program(text: &str) -> Result<Program, PrismError> {
    let program = parse_syntax(text)?;
    typecheck(&program)?;
    Ok(program)
}
