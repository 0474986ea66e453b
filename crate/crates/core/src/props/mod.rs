//! Property logic: PCTL/CSL-style state and path formulas with reward,
//! long-run and conditional operators.

mod parser;

use std::fmt::{self, Display, Formatter};

use crate::model::Direction;
use crate::prism::{close_expression, Expr, Program};

pub use parser::{parse_properties, parse_property};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    pub fn holds<V: PartialOrd>(self, value: &V, threshold: &V) -> bool {
        match self {
            Cmp::Lt => value < threshold,
            Cmp::Le => value <= threshold,
            Cmp::Gt => value > threshold,
            Cmp::Ge => value >= threshold,
        }
    }

    /// Bound on the complementary quantity: `p ⋈ t` iff `1-p ⋈' 1-t`.
    pub fn complement(self) -> Self {
        match self {
            Cmp::Lt => Cmp::Gt,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Ge => Cmp::Le,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Query,
    Compare(Cmp, Expr),
}

/// Direction annotation and bound of a quantitative operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OpInfo {
    pub dir: Option<Direction>,
    pub bound: Bound,
}

impl OpInfo {
    pub fn is_query(&self) -> bool {
        self.bound == Bound::Query
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    Bool(bool),
    Label(String),
    /// Boolean expression over model variables, e.g. `s=7`.
    Atom(Expr),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Implies(Box<StateFormula>, Box<StateFormula>),
    Iff(Box<StateFormula>, Box<StateFormula>),
    Prob { op: OpInfo, path: PathFormula },
    /// `P[path || condition]`.
    Conditional { op: OpInfo, path: PathFormula, condition: PathFormula },
    Reward { name: Option<String>, op: OpInfo, formula: RewardFormula },
    /// Long-run average of a reward structure, or fraction of time in a set.
    Lra { op: OpInfo, target: LraTarget },
    Steady { op: OpInfo, formula: Box<StateFormula> },
    /// Expected time (steps in discrete-time models) until `target`.
    Time { op: OpInfo, target: Box<StateFormula> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LraTarget {
    States(Box<StateFormula>),
    Reward(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(Box<StateFormula>),
    /// `left U right`, optionally with an upper step/time bound; `F ψ` is
    /// `true U ψ`.
    Until { left: Box<StateFormula>, right: Box<StateFormula>, bound: Option<Expr> },
    Globally { formula: Box<StateFormula>, bound: Option<Expr> },
    WeakUntil { left: Box<StateFormula>, right: Box<StateFormula>, bound: Option<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardFormula {
    Reach(Box<StateFormula>),
    Cumulative(Expr),
    Instantaneous(Expr),
}

pub type Property = StateFormula;

impl StateFormula {
    /// Apply `f` to every embedded expression (atoms, thresholds, bounds).
    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> StateFormula {
        use StateFormula::*;
        let op = |o: &OpInfo, f: &mut dyn FnMut(&Expr) -> Expr| OpInfo {
            dir: o.dir,
            bound: match &o.bound {
                Bound::Query => Bound::Query,
                Bound::Compare(c, e) => Bound::Compare(*c, f(e)),
            },
        };
        let bx = |s: &StateFormula, f: &mut dyn FnMut(&Expr) -> Expr| Box::new(s.map_exprs(f));
        match self {
            Bool(_) | Label(_) => self.clone(),
            Atom(e) => Atom(f(e)),
            Not(a) => Not(bx(a, f)),
            And(a, b) => And(bx(a, f), bx(b, f)),
            Or(a, b) => Or(bx(a, f), bx(b, f)),
            Implies(a, b) => Implies(bx(a, f), bx(b, f)),
            Iff(a, b) => Iff(bx(a, f), bx(b, f)),
            Prob { op: o, path } => Prob { op: op(o, f), path: path.map_exprs(f) },
            Conditional { op: o, path, condition } => {
                Conditional { op: op(o, f), path: path.map_exprs(f), condition: condition.map_exprs(f) }
            }
            Reward { name, op: o, formula } => Reward {
                name: name.clone(),
                op: op(o, f),
                formula: match formula {
                    RewardFormula::Reach(s) => RewardFormula::Reach(bx(s, f)),
                    RewardFormula::Cumulative(e) => RewardFormula::Cumulative(f(e)),
                    RewardFormula::Instantaneous(e) => RewardFormula::Instantaneous(f(e)),
                },
            },
            Lra { op: o, target } => Lra {
                op: op(o, f),
                target: match target {
                    LraTarget::States(s) => LraTarget::States(bx(s, f)),
                    LraTarget::Reward(r) => LraTarget::Reward(r.clone()),
                },
            },
            Steady { op: o, formula } => Steady { op: op(o, f), formula: bx(formula, f) },
            Time { op: o, target } => Time { op: op(o, f), target: bx(target, f) },
        }
    }

    /// Replace model constants and formulas by their values.
    pub fn close(&self, program: &Program) -> StateFormula {
        self.map_exprs(&mut |e| close_expression(program, e))
    }

    /// The operator info of a top-level quantitative operator.
    pub fn op(&self) -> Option<&OpInfo> {
        match self {
            StateFormula::Prob { op, .. }
            | StateFormula::Conditional { op, .. }
            | StateFormula::Reward { op, .. }
            | StateFormula::Lra { op, .. }
            | StateFormula::Steady { op, .. }
            | StateFormula::Time { op, .. } => Some(op),
            _ => None,
        }
    }

    fn is_binary(&self) -> bool {
        matches!(self, StateFormula::And(..) | StateFormula::Or(..) | StateFormula::Implies(..) | StateFormula::Iff(..))
    }
}

impl PathFormula {
    pub fn eventually(target: StateFormula, bound: Option<Expr>) -> Self {
        PathFormula::Until { left: Box::new(StateFormula::Bool(true)), right: Box::new(target), bound }
    }

    pub fn bound(&self) -> Option<&Expr> {
        match self {
            PathFormula::Next(_) => None,
            PathFormula::Until { bound, .. } | PathFormula::Globally { bound, .. } | PathFormula::WeakUntil { bound, .. } => {
                bound.as_ref()
            }
        }
    }

    fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> PathFormula {
        let mut g = |s: &StateFormula| Box::new(s.map_exprs(f));
        match self {
            PathFormula::Next(a) => PathFormula::Next(g(a)),
            PathFormula::Until { left, right, bound } => {
                let (l, r) = (g(left), g(right));
                PathFormula::Until { left: l, right: r, bound: bound.as_ref().map(|b| f(b)) }
            }
            PathFormula::Globally { formula, bound } => {
                let a = g(formula);
                PathFormula::Globally { formula: a, bound: bound.as_ref().map(|b| f(b)) }
            }
            PathFormula::WeakUntil { left, right, bound } => {
                let (l, r) = (g(left), g(right));
                PathFormula::WeakUntil { left: l, right: r, bound: bound.as_ref().map(|b| f(b)) }
            }
        }
    }
}

fn operand(f: &mut Formatter<'_>, s: &StateFormula) -> fmt::Result {
    match s {
        StateFormula::Atom(_) => write!(f, "({s})"),
        s if s.is_binary() || matches!(s, StateFormula::Not(_)) => write!(f, "({s})"),
        _ => write!(f, "{s}"),
    }
}

fn op_suffix(f: &mut Formatter<'_>, op: &OpInfo) -> fmt::Result {
    if let Some(d) = op.dir {
        write!(f, "{d}")?;
    }
    match &op.bound {
        Bound::Query => f.write_str("=?"),
        Bound::Compare(c, e) => write!(f, "{}{e}", c.symbol()),
    }
}

fn time_bound(f: &mut Formatter<'_>, bound: &Option<Expr>) -> fmt::Result {
    match bound {
        Some(b) => write!(f, "<={b}"),
        None => Ok(()),
    }
}

impl Display for StateFormula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        use StateFormula::*;
        let bin = |f: &mut Formatter<'_>, a: &StateFormula, sym: &str, b: &StateFormula| {
            operand(f, a)?;
            write!(f, " {sym} ")?;
            operand(f, b)
        };
        match self {
            Bool(b) => write!(f, "{b}"),
            Label(l) => write!(f, "\"{l}\""),
            Atom(e) => write!(f, "{e}"),
            Not(a) => {
                f.write_str("!")?;
                operand(f, a)
            }
            And(a, b) => bin(f, a, "&", b),
            Or(a, b) => bin(f, a, "|", b),
            Implies(a, b) => bin(f, a, "=>", b),
            Iff(a, b) => bin(f, a, "<=>", b),
            Prob { op, path } => {
                f.write_str("P")?;
                op_suffix(f, op)?;
                write!(f, " [ {path} ]")
            }
            Conditional { op, path, condition } => {
                f.write_str("P")?;
                op_suffix(f, op)?;
                write!(f, " [ {path} || {condition} ]")
            }
            Reward { name, op, formula } => {
                f.write_str("R")?;
                if let Some(n) = name {
                    write!(f, "{{\"{n}\"}}")?;
                }
                op_suffix(f, op)?;
                match formula {
                    RewardFormula::Reach(s) => write!(f, " [ F {} ]", Paren(s)),
                    RewardFormula::Cumulative(e) => write!(f, " [ C<={e} ]"),
                    RewardFormula::Instantaneous(e) => write!(f, " [ I={e} ]"),
                }
            }
            Lra { op, target } => {
                f.write_str("LRA")?;
                if let LraTarget::Reward(r) = target {
                    write!(f, "{{\"{r}\"}}")?;
                }
                op_suffix(f, op)?;
                match target {
                    LraTarget::States(s) => write!(f, " [ {s} ]"),
                    LraTarget::Reward(_) => f.write_str(" [ ]"),
                }
            }
            Steady { op, formula } => {
                f.write_str("S")?;
                op_suffix(f, op)?;
                write!(f, " [ {formula} ]")
            }
            Time { op, target } => {
                f.write_str("T")?;
                op_suffix(f, op)?;
                write!(f, " [ F {} ]", Paren(target))
            }
        }
    }
}

/// Path operands: parenthesized unless atomic.
struct Paren<'a>(&'a StateFormula);

impl Display for Paren<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        operand(f, self.0)
    }
}

impl Display for PathFormula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(a) => write!(f, "X {}", Paren(a)),
            PathFormula::Until { left, right, bound } if **left == StateFormula::Bool(true) => {
                f.write_str("F")?;
                time_bound(f, bound)?;
                write!(f, " {}", Paren(right))
            }
            PathFormula::Until { left, right, bound } => {
                write!(f, "{} U", Paren(left))?;
                time_bound(f, bound)?;
                write!(f, " {}", Paren(right))
            }
            PathFormula::Globally { formula, bound } => {
                f.write_str("G")?;
                time_bound(f, bound)?;
                write!(f, " {}", Paren(formula))
            }
            PathFormula::WeakUntil { left, right, bound } => {
                write!(f, "{} W", Paren(left))?;
                time_bound(f, bound)?;
                write!(f, " {}", Paren(right))
            }
        }
    }
}

#[cfg(test)]
mod tests;
