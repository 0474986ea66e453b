//! Expressions compiled against variable slots and evaluated directly in the
//! model's number type.

use std::cmp::Ordering;

use num_traits::ToPrimitive;

use crate::numeric::{Rational, Value};
use crate::prism::{BinOp, EvalError, Expr, Func, UnOp};

#[derive(Debug, Clone)]
pub(crate) enum Num<V> {
    Bool(bool),
    Int(i64),
    Real(V),
}

impl<V: Value> Num<V> {
    pub(crate) fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Num::Bool(b) => Ok(*b),
            _ => Err(EvalError::Type("expected bool".into())),
        }
    }

    pub(crate) fn as_int(&self) -> Result<i64, EvalError> {
        match self {
            Num::Int(i) => Ok(*i),
            Num::Bool(b) => Ok(*b as i64),
            Num::Real(_) => Err(EvalError::Type("expected int, got double".into())),
        }
    }

    pub(crate) fn to_value(&self) -> Result<V, EvalError> {
        match self {
            Num::Int(i) => Ok(int_value(*i)),
            Num::Real(v) => Ok(v.clone()),
            Num::Bool(_) => Err(EvalError::Type("expected a number, got bool".into())),
        }
    }
}

fn int_value<V: Value>(i: i64) -> V {
    V::from_rational(&Rational::from_integer(i.into()))
}

fn finite<V: Value>(v: V) -> Result<Num<V>, EvalError> {
    if V::EXACT || v.as_float().is_finite() {
        Ok(Num::Real(v))
    } else {
        Err(EvalError::NonFinite(v.to_string()))
    }
}

fn overflow() -> EvalError {
    EvalError::Type("integer overflow".into())
}

#[derive(Debug, Clone)]
pub(crate) enum Code<V> {
    Const(Num<V>),
    Var(usize),
    BoolVar(usize),
    Not(Box<Code<V>>),
    Neg(Box<Code<V>>),
    Bin(BinOp, Box<Code<V>>, Box<Code<V>>),
    Ite(Box<Code<V>>, Box<Code<V>>, Box<Code<V>>),
    Call(Func, Vec<Code<V>>),
}

/// Compile a closed expression; `slot` maps variable names to their slot
/// and whether they are boolean.
pub(crate) fn compile<V: Value>(
    expr: &Expr,
    slot: &dyn Fn(&str) -> Option<(usize, bool)>,
) -> Result<Code<V>, EvalError> {
    let rec = |e: &Expr| compile(e, slot).map(Box::new);
    Ok(match expr {
        Expr::Bool(b) => Code::Const(Num::Bool(*b)),
        Expr::Int(i) => Code::Const(Num::Int(i.to_i64().ok_or_else(overflow)?)),
        Expr::Double(r) => Code::Const(Num::Real(V::from_rational(r))),
        Expr::Ident(name, _) => match slot(name) {
            Some((s, true)) => Code::BoolVar(s),
            Some((s, false)) => Code::Var(s),
            None => return Err(EvalError::Unbound(name.clone())),
        },
        Expr::Label(name) => return Err(EvalError::UnknownLabel(name.clone())),
        Expr::Unary(UnOp::Not, a) => Code::Not(rec(a)?),
        Expr::Unary(UnOp::Neg, a) => Code::Neg(rec(a)?),
        Expr::Binary(op, a, b) => Code::Bin(*op, rec(a)?, rec(b)?),
        Expr::Ite(c, a, b) => Code::Ite(rec(c)?, rec(a)?, rec(b)?),
        Expr::Call(f, args) => Code::Call(*f, args.iter().map(|a| compile(a, slot)).collect::<Result<_, _>>()?),
    })
}

fn compare<V: Value>(a: &Num<V>, b: &Num<V>) -> Result<Option<Ordering>, EvalError> {
    Ok(match (a, b) {
        (Num::Int(x), Num::Int(y)) => Some(x.cmp(y)),
        (Num::Bool(x), Num::Bool(y)) => Some(x.cmp(y)),
        (Num::Bool(_), _) | (_, Num::Bool(_)) => {
            return Err(EvalError::Type("cannot compare bool with a number".into()))
        }
        _ => a.to_value()?.partial_cmp(&b.to_value()?),
    })
}

fn pow_value<V: Value>(base: &V, exp: i64) -> Result<V, EvalError> {
    if base.is_exactly_zero() && exp < 0 {
        return Err(EvalError::DivisionByZero);
    }
    let mut result = V::one();
    let mut b = base.clone();
    let mut e = exp.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul_ref(&b);
        }
        b = b.mul_ref(&b);
        e >>= 1;
    }
    Ok(if exp < 0 { V::one().div_ref(&result) } else { result })
}

fn round<V: Value>(v: &V, floor: bool) -> Result<i64, EvalError> {
    if V::EXACT {
        let r = v.to_rational().expect("exact backend");
        let r = if floor { r.floor() } else { r.ceil() };
        r.to_integer().to_i64().ok_or_else(overflow)
    } else {
        let f = v.as_float();
        let g = if floor { f.floor() } else { f.ceil() };
        if !g.is_finite() || g.abs() >= 9.2e18 {
            return Err(overflow());
        }
        Ok(g as i64)
    }
}

impl<V: Value> Code<V> {
    pub(crate) fn eval(&self, state: &[i64]) -> Result<Num<V>, EvalError> {
        Ok(match self {
            Code::Const(n) => n.clone(),
            Code::Var(s) => Num::Int(state[*s]),
            Code::BoolVar(s) => Num::Bool(state[*s] != 0),
            Code::Not(a) => Num::Bool(!a.eval(state)?.as_bool()?),
            Code::Neg(a) => match a.eval(state)? {
                Num::Int(i) => Num::Int(i.checked_neg().ok_or_else(overflow)?),
                Num::Real(v) => Num::Real(-v),
                Num::Bool(_) => return Err(EvalError::Type("'-' applied to bool".into())),
            },
            Code::Bin(BinOp::And, a, b) => Num::Bool(a.eval(state)?.as_bool()? && b.eval(state)?.as_bool()?),
            Code::Bin(BinOp::Or, a, b) => Num::Bool(a.eval(state)?.as_bool()? || b.eval(state)?.as_bool()?),
            Code::Bin(BinOp::Implies, a, b) => Num::Bool(!a.eval(state)?.as_bool()? || b.eval(state)?.as_bool()?),
            Code::Bin(op, a, b) => binary(*op, a.eval(state)?, b.eval(state)?)?,
            Code::Ite(c, a, b) => {
                if c.eval(state)?.as_bool()? {
                    a.eval(state)?
                } else {
                    b.eval(state)?
                }
            }
            Code::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(state)).collect::<Result<Vec<_>, _>>()?;
                call(*f, vals)?
            }
        })
    }

    pub(crate) fn eval_bool(&self, state: &[i64]) -> Result<bool, EvalError> {
        self.eval(state)?.as_bool()
    }

    pub(crate) fn eval_value(&self, state: &[i64]) -> Result<V, EvalError> {
        self.eval(state)?.to_value()
    }

    /// `Some(b)` when the expression is the constant `b`.
    pub(crate) fn constant_bool(&self) -> Option<bool> {
        match self {
            Code::Const(Num::Bool(b)) => Some(*b),
            _ => None,
        }
    }
}

fn binary<V: Value>(op: BinOp, a: Num<V>, b: Num<V>) -> Result<Num<V>, EvalError> {
    use BinOp::*;
    Ok(match op {
        And | Or | Implies | Iff => {
            let (x, y) = (a.as_bool()?, b.as_bool()?);
            Num::Bool(match op {
                And => x && y,
                Or => x || y,
                Implies => !x || y,
                _ => x == y,
            })
        }
        Eq | Neq | Lt | Le | Gt | Ge => {
            if matches!(op, Lt | Le | Gt | Ge) && (matches!(a, Num::Bool(_)) || matches!(b, Num::Bool(_))) {
                return Err(EvalError::Type(format!("'{}' applied to bool", op.symbol())));
            }
            let ord = compare(&a, &b)?;
            Num::Bool(match (op, ord) {
                (Neq, None) => true,
                (_, None) => false,
                (Eq, Some(o)) => o == Ordering::Equal,
                (Neq, Some(o)) => o != Ordering::Equal,
                (Lt, Some(o)) => o == Ordering::Less,
                (Le, Some(o)) => o != Ordering::Greater,
                (Gt, Some(o)) => o == Ordering::Greater,
                (_, Some(o)) => o != Ordering::Less,
            })
        }
        Add | Sub | Mul => {
            if let (Num::Int(x), Num::Int(y)) = (&a, &b) {
                let r = match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                return Ok(Num::Int(r.ok_or_else(overflow)?));
            }
            let (x, y) = (a.to_value()?, b.to_value()?);
            finite(match op {
                Add => x.add_ref(&y),
                Sub => x.sub_ref(&y),
                _ => x.mul_ref(&y),
            })?
        }
        Div => {
            let (x, y) = (a.to_value()?, b.to_value()?);
            if y.is_exactly_zero() {
                return Err(EvalError::DivisionByZero);
            }
            finite(x.div_ref(&y))?
        }
    })
}

fn call<V: Value>(func: Func, args: Vec<Num<V>>) -> Result<Num<V>, EvalError> {
    Ok(match func {
        Func::Min | Func::Max => {
            if matches!(args[0], Num::Bool(_)) {
                return Err(EvalError::Type(format!("{} of bool", func.name())));
            }
            let any_real = args.iter().any(|a| matches!(a, Num::Real(_)));
            let mut best = args[0].clone();
            for a in &args[1..] {
                let ord = compare(a, &best)?;
                let take = match func {
                    Func::Min => ord == Some(Ordering::Less),
                    _ => ord == Some(Ordering::Greater),
                };
                if take {
                    best = a.clone();
                }
            }
            if any_real {
                Num::Real(best.to_value()?)
            } else {
                best
            }
        }
        Func::Floor | Func::Ceil => match &args[0] {
            Num::Int(i) => Num::Int(*i),
            Num::Real(v) => Num::Int(round(v, func == Func::Floor)?),
            Num::Bool(_) => return Err(EvalError::Type(format!("{} of bool", func.name()))),
        },
        Func::Mod => {
            let (x, y) = (args[0].as_int()?, args[1].as_int()?);
            if y == 0 {
                return Err(EvalError::ModByZero);
            }
            Num::Int(x.rem_euclid(y.checked_abs().ok_or_else(overflow)?))
        }
        Func::Pow => match (&args[0], &args[1]) {
            (Num::Int(b), Num::Int(e)) => {
                if *e < 0 {
                    return Err(EvalError::NegativeExponent((*e).into()));
                }
                let e = u32::try_from(*e).map_err(|_| overflow())?;
                Num::Int(b.checked_pow(e).ok_or_else(overflow)?)
            }
            (b, e) => {
                let base = b.to_value()?;
                let exp = e.to_value()?;
                if V::EXACT {
                    let q = exp.to_rational().expect("exact backend");
                    if !q.is_integer() {
                        return Err(EvalError::Inexact(format!("pow({base}, {exp})")));
                    }
                    let n = q.to_integer().to_i64().ok_or_else(overflow)?;
                    Num::Real(pow_value(&base, n)?)
                } else {
                    let f = base.as_float().powf(exp.as_float());
                    finite(V::from_f64(f).ok_or_else(|| EvalError::NonFinite(f.to_string()))?)?
                }
            }
        },
    })
}
