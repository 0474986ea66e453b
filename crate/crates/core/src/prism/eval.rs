//! Expression evaluation with unbounded integers and either exact or
//! floating-point reals.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::ast::{BinOp, Expr, Func, UnOp};
use crate::numeric::{rational_to_decimal, rational_to_f64, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("modulo by zero")]
    ModByZero,
    #[error("negative exponent {0} in integer power")]
    NegativeExponent(BigInt),
    #[error("unbound identifier '{0}'")]
    Unbound(String),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("{0} has no exact rational value")]
    Inexact(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

/// A real number in the active arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum Real {
    Exact(Rational),
    Float(f64),
}

impl Real {
    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => rational_to_f64(r),
            Real::Float(f) => *f,
        }
    }

    /// Exact value; floats convert to the dyadic rational they denote.
    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            Real::Exact(r) => Some(r.clone()),
            Real::Float(f) => Rational::from_float(*f),
        }
    }
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Bool(bool),
    Int(BigInt),
    Real(Real),
}

impl Val {
    pub fn type_name(&self) -> &'static str {
        match self {
            Val::Bool(_) => "bool",
            Val::Int(_) => "int",
            Val::Real(_) => "double",
        }
    }

    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Val::Bool(b) => Ok(*b),
            other => Err(EvalError::Type(format!("expected bool, got {}", other.type_name()))),
        }
    }

    pub fn as_int(&self) -> Result<&BigInt, EvalError> {
        match self {
            Val::Int(i) => Ok(i),
            other => Err(EvalError::Type(format!("expected int, got {}", other.type_name()))),
        }
    }

    pub fn as_i64(&self) -> Result<i64, EvalError> {
        self.as_int()?.to_i64().ok_or_else(|| EvalError::Type("integer out of 64-bit range".into()))
    }

    /// Numeric value as an exact rational (ints and exact reals).
    pub fn to_rational(&self) -> Result<Rational, EvalError> {
        match self {
            Val::Int(i) => Ok(Rational::from_integer(i.clone())),
            Val::Real(r) => r.to_rational().ok_or_else(|| EvalError::NonFinite(format!("{r:?}"))),
            Val::Bool(_) => Err(EvalError::Type("expected a number, got bool".into())),
        }
    }

    pub fn to_f64(&self) -> Result<f64, EvalError> {
        match self {
            Val::Int(i) => Ok(i.to_f64().unwrap_or(f64::NAN)),
            Val::Real(r) => Ok(r.to_f64()),
            Val::Bool(_) => Err(EvalError::Type("expected a number, got bool".into())),
        }
    }

    /// The literal expression denoting this value.
    pub fn to_expr(&self) -> Expr {
        match self {
            Val::Bool(b) => Expr::Bool(*b),
            Val::Int(i) => Expr::Int(i.clone()),
            Val::Real(r) => Expr::Double(r.to_rational().unwrap_or_default()),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Bool(b) => write!(f, "{b}"),
            Val::Int(i) => write!(f, "{i}"),
            Val::Real(Real::Float(x)) => write!(f, "{x}"),
            Val::Real(Real::Exact(r)) => match rational_to_decimal(r) {
                Some(d) => f.write_str(&d),
                None => write!(f, "{r}"),
            },
        }
    }
}

/// Variable and label lookup for evaluation.
pub trait Env {
    fn lookup(&self, name: &str) -> Option<Val>;

    fn label(&self, _name: &str) -> Option<bool> {
        None
    }
}

impl Env for HashMap<String, Val> {
    fn lookup(&self, name: &str) -> Option<Val> {
        self.get(name).cloned()
    }
}

impl Env for BTreeMap<String, Val> {
    fn lookup(&self, name: &str) -> Option<Val> {
        self.get(name).cloned()
    }
}

/// The empty environment.
pub struct NoEnv;

impl Env for NoEnv {
    fn lookup(&self, _name: &str) -> Option<Val> {
        None
    }
}

/// Evaluate `expr`. With `exact`, reals are rationals (double literals are
/// their exact decimal value); otherwise they are rounded to `f64` once and
/// computed in floating point.
pub fn evaluate(expr: &Expr, env: &dyn Env, exact: bool) -> Result<Val, EvalError> {
    Ok(match expr {
        Expr::Bool(b) => Val::Bool(*b),
        Expr::Int(i) => Val::Int(i.clone()),
        Expr::Double(r) => real_val(r.clone(), exact),
        Expr::Ident(name, _) => env.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
        Expr::Label(name) => Val::Bool(env.label(name).ok_or_else(|| EvalError::UnknownLabel(name.clone()))?),
        Expr::Unary(op, a) => unary(*op, evaluate(a, env, exact)?)?,
        Expr::Binary(BinOp::And, a, b) => {
            Val::Bool(evaluate(a, env, exact)?.as_bool()? && evaluate(b, env, exact)?.as_bool()?)
        }
        Expr::Binary(BinOp::Or, a, b) => {
            Val::Bool(evaluate(a, env, exact)?.as_bool()? || evaluate(b, env, exact)?.as_bool()?)
        }
        Expr::Binary(BinOp::Implies, a, b) => {
            Val::Bool(!evaluate(a, env, exact)?.as_bool()? || evaluate(b, env, exact)?.as_bool()?)
        }
        Expr::Binary(op, a, b) => binary(*op, evaluate(a, env, exact)?, evaluate(b, env, exact)?, exact)?,
        Expr::Ite(c, a, b) => {
            if evaluate(c, env, exact)?.as_bool()? {
                evaluate(a, env, exact)?
            } else {
                evaluate(b, env, exact)?
            }
        }
        Expr::Call(func, args) => {
            let vals = args.iter().map(|a| evaluate(a, env, exact)).collect::<Result<Vec<_>, _>>()?;
            call(*func, vals, exact)?
        }
    })
}

pub(crate) fn real_val(r: Rational, exact: bool) -> Val {
    if exact {
        Val::Real(Real::Exact(r))
    } else {
        Val::Real(Real::Float(rational_to_f64(&r)))
    }
}

fn to_real(v: &Val, exact: bool) -> Result<Real, EvalError> {
    match v {
        Val::Int(i) => Ok(if exact {
            Real::Exact(Rational::from_integer(i.clone()))
        } else {
            Real::Float(i.to_f64().unwrap_or(f64::NAN))
        }),
        Val::Real(Real::Exact(r)) if !exact => Ok(Real::Float(rational_to_f64(r))),
        Val::Real(Real::Float(f)) if exact => {
            Rational::from_float(*f).map(Real::Exact).ok_or_else(|| EvalError::NonFinite(f.to_string()))
        }
        Val::Real(r) => Ok(r.clone()),
        Val::Bool(_) => Err(EvalError::Type("expected a number, got bool".into())),
    }
}

pub(crate) fn unary(op: UnOp, a: Val) -> Result<Val, EvalError> {
    match (op, a) {
        (UnOp::Not, Val::Bool(b)) => Ok(Val::Bool(!b)),
        (UnOp::Neg, Val::Int(i)) => Ok(Val::Int(-i)),
        (UnOp::Neg, Val::Real(Real::Exact(r))) => Ok(Val::Real(Real::Exact(-r))),
        (UnOp::Neg, Val::Real(Real::Float(f))) => Ok(Val::Real(Real::Float(-f))),
        (UnOp::Not, v) => Err(EvalError::Type(format!("'!' applied to {}", v.type_name()))),
        (UnOp::Neg, v) => Err(EvalError::Type(format!("'-' applied to {}", v.type_name()))),
    }
}

fn compare(a: &Val, b: &Val, exact: bool) -> Result<Option<Ordering>, EvalError> {
    match (a, b) {
        (Val::Int(x), Val::Int(y)) => Ok(Some(x.cmp(y))),
        (Val::Bool(x), Val::Bool(y)) => Ok(Some(x.cmp(y))),
        (Val::Bool(_), _) | (_, Val::Bool(_)) => Err(EvalError::Type("cannot compare bool with a number".into())),
        _ => match (to_real(a, exact)?, to_real(b, exact)?) {
            (Real::Exact(x), Real::Exact(y)) => Ok(Some(x.cmp(&y))),
            (x, y) => Ok(x.to_f64().partial_cmp(&y.to_f64())),
        },
    }
}

fn check_finite(f: f64) -> Result<Val, EvalError> {
    if f.is_finite() {
        Ok(Val::Real(Real::Float(f)))
    } else {
        Err(EvalError::NonFinite(f.to_string()))
    }
}

pub(crate) fn binary(op: BinOp, a: Val, b: Val, exact: bool) -> Result<Val, EvalError> {
    use BinOp::*;
    match op {
        And | Or | Implies | Iff => {
            let (x, y) = (a.as_bool()?, b.as_bool()?);
            Ok(Val::Bool(match op {
                And => x && y,
                Or => x || y,
                Implies => !x || y,
                _ => x == y,
            }))
        }
        Eq | Neq | Lt | Le | Gt | Ge => {
            if matches!(op, Lt | Le | Gt | Ge) && (matches!(a, Val::Bool(_)) || matches!(b, Val::Bool(_))) {
                return Err(EvalError::Type(format!("'{}' applied to bool", op.symbol())));
            }
            let ord = compare(&a, &b, exact)?;
            Ok(Val::Bool(match (op, ord) {
                (Neq, None) => true,
                (_, None) => false,
                (Eq, Some(o)) => o == Ordering::Equal,
                (Neq, Some(o)) => o != Ordering::Equal,
                (Lt, Some(o)) => o == Ordering::Less,
                (Le, Some(o)) => o != Ordering::Greater,
                (Gt, Some(o)) => o == Ordering::Greater,
                (_, Some(o)) => o != Ordering::Less,
            }))
        }
        Add | Sub | Mul => {
            if let (Val::Int(x), Val::Int(y)) = (&a, &b) {
                return Ok(Val::Int(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                }));
            }
            match (to_real(&a, exact)?, to_real(&b, exact)?) {
                (Real::Exact(x), Real::Exact(y)) => Ok(Val::Real(Real::Exact(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                }))),
                (x, y) => {
                    let (x, y) = (x.to_f64(), y.to_f64());
                    check_finite(match op {
                        Add => x + y,
                        Sub => x - y,
                        _ => x * y,
                    })
                }
            }
        }
        Div => match (to_real(&a, exact)?, to_real(&b, exact)?) {
            (_, Real::Exact(y)) if y.is_zero() => Err(EvalError::DivisionByZero),
            (_, Real::Float(y)) if y == 0.0 => Err(EvalError::DivisionByZero),
            (Real::Exact(x), Real::Exact(y)) => Ok(Val::Real(Real::Exact(x / y))),
            (x, y) => check_finite(x.to_f64() / y.to_f64()),
        },
    }
}

fn int_pow(base: &BigInt, exp: &BigInt) -> Result<BigInt, EvalError> {
    if exp.is_negative() {
        return Err(EvalError::NegativeExponent(exp.clone()));
    }
    let e = exp.to_u32().ok_or_else(|| EvalError::Type(format!("exponent {exp} too large")))?;
    Ok(num_traits::pow(base.clone(), e as usize))
}

pub(crate) fn call(func: Func, args: Vec<Val>, exact: bool) -> Result<Val, EvalError> {
    match func {
        Func::Min | Func::Max => {
            let mut best = args[0].clone();
            if matches!(best, Val::Bool(_)) {
                return Err(EvalError::Type(format!("{} of bool", func.name())));
            }
            let any_real = args.iter().any(|a| matches!(a, Val::Real(_)));
            for a in &args[1..] {
                let ord = compare(a, &best, exact)?;
                let take = match func {
                    Func::Min => ord == Some(Ordering::Less),
                    _ => ord == Some(Ordering::Greater),
                };
                if take {
                    best = a.clone();
                }
            }
            if any_real {
                Ok(Val::Real(to_real(&best, exact)?))
            } else {
                Ok(best)
            }
        }
        Func::Floor | Func::Ceil => match &args[0] {
            Val::Int(i) => Ok(Val::Int(i.clone())),
            Val::Real(Real::Exact(r)) => Ok(Val::Int(if func == Func::Floor { r.floor() } else { r.ceil() }.to_integer())),
            Val::Real(Real::Float(f)) => {
                let g = if func == Func::Floor { f.floor() } else { f.ceil() };
                let r = Rational::from_float(g).ok_or_else(|| EvalError::NonFinite(g.to_string()))?;
                Ok(Val::Int(r.to_integer()))
            }
            Val::Bool(_) => Err(EvalError::Type(format!("{} of bool", func.name()))),
        },
        Func::Mod => {
            let (x, y) = (args[0].as_int()?, args[1].as_int()?);
            if y.is_zero() {
                return Err(EvalError::ModByZero);
            }
            Ok(Val::Int(x.mod_floor(&y.abs())))
        }
        Func::Pow => match (&args[0], &args[1]) {
            (Val::Int(b), Val::Int(e)) => Ok(Val::Int(int_pow(b, e)?)),
            (b, e) => {
                let base = to_real(b, exact)?;
                let exp = to_real(e, exact)?;
                match (base, exp) {
                    (Real::Exact(b), Real::Exact(e)) => {
                        if !e.is_integer() {
                            return Err(EvalError::Inexact(format!("pow({b}, {e})")));
                        }
                        let n = e.to_integer();
                        if b.is_zero() && n.is_negative() {
                            return Err(EvalError::DivisionByZero);
                        }
                        let k = n.abs().to_u32().ok_or_else(|| EvalError::Type(format!("exponent {n} too large")))?;
                        let p = num_traits::pow(b, k as usize);
                        Ok(Val::Real(Real::Exact(if n.is_negative() { Rational::one() / p } else { p })))
                    }
                    (b, e) => check_finite(b.to_f64().powf(e.to_f64())),
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_expression;
    use super::*;

    fn eval(src: &str, exact: bool) -> Result<Val, EvalError> {
        let mut env = HashMap::new();
        env.insert("x".to_string(), Val::Int(2.into()));
        evaluate(&parse_expression(src).unwrap(), &env, exact)
    }

    #[test]
    fn spec_examples() {
        assert_eq!(eval("x+1 > 2", true), Ok(Val::Bool(true)));
        assert_eq!(eval("0.1+0.2 = 0.3", true), Ok(Val::Bool(true)));
        assert_eq!(eval("0.1+0.2 = 0.3", false), Ok(Val::Bool(false)));
        assert_eq!(eval("1/0", true), Err(EvalError::DivisionByZero));
        assert_eq!(eval("1/0", false), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn integer_functions() {
        assert_eq!(eval("mod(-1, 3)", true), Ok(Val::Int((2).into())));
        assert_eq!(eval("mod(1, 0)", true), Err(EvalError::ModByZero));
        assert_eq!(eval("pow(2, 10)", true), Ok(Val::Int(1024.into())));
        assert!(matches!(eval("pow(2, -1)", true), Err(EvalError::NegativeExponent(_))));
        assert_eq!(eval("pow(2.0, -1)", true), Ok(Val::Real(Real::Exact(Rational::new(1.into(), 2.into())))));
        assert_eq!(eval("floor(7/2)", true), Ok(Val::Int(3.into())));
        assert_eq!(eval("ceil(7/2)", false), Ok(Val::Int(4.into())));
        assert_eq!(eval("max(1, x, 0)", true), Ok(Val::Int(2.into())));
        assert_eq!(eval("min(1, 0.5)", false), Ok(Val::Real(Real::Float(0.5))));
    }

    #[test]
    fn unbounded_integers() {
        assert_eq!(eval("pow(2, 100) - pow(2, 100) + 1", true), Ok(Val::Int(1.into())));
    }

    #[test]
    fn ternary_and_types() {
        assert_eq!(eval("x = 2 ? 1 : 0", true), Ok(Val::Int(1.into())));
        assert!(matches!(eval("true + 1", true), Err(EvalError::Type(_))));
        assert_eq!(eval("y", true), Err(EvalError::Unbound("y".into())));
    }
}
