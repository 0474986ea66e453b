use num_bigint::BigInt;

use super::Pos;
use crate::model::ModelKind;
use crate::numeric::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Iff,
    Implies,
    Or,
    And,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Iff => "<=>",
            BinOp::Implies => "=>",
            BinOp::Or => "|",
            BinOp::And => "&",
            BinOp::Eq => "=",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Iff => 1,
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul | BinOp::Div => 8,
        }
    }

    pub fn is_relational(self) -> bool {
        self.precedence() == 6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Pow,
    Mod,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Pow => "pow",
            Func::Mod => "mod",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "pow" => Func::Pow,
            "mod" => Func::Mod,
            _ => return None,
        })
    }
}

/// Expression tree. Doubles are kept as the exact rational their decimal
/// literal denotes.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bool(bool),
    Int(BigInt),
    Double(Rational),
    Ident(String, Pos),
    /// A quoted label reference (property formulas only).
    Label(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into(), Pos::default())
    }

    pub fn int(value: i64) -> Self {
        Expr::Int(value.into())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn not(a: Expr) -> Self {
        Expr::Unary(UnOp::Not, Box::new(a))
    }

    /// Visit every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Ite(c, a, b) => {
                c.walk(f);
                a.walk(f);
                b.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// Identifiers mentioned anywhere in the expression.
    pub fn identifiers(&self) -> Vec<(&str, Pos)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Ident(n, p) = e {
                out.push((n.as_str(), *p));
            }
        });
        out
    }

    /// Rebuild the tree bottom-up, replacing identifiers through `f`
    /// (returning `None` keeps the identifier).
    pub fn map_idents(&self, f: &mut impl FnMut(&str, Pos) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ident(n, p) => f(n, *p).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.map_idents(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.map_idents(f)), Box::new(b.map_idents(f))),
            Expr::Ite(c, a, b) => Expr::Ite(Box::new(c.map_idents(f)), Box::new(a.map_idents(f)), Box::new(b.map_idents(f))),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|a| a.map_idents(f)).collect()),
            _ => self.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Int,
    Double,
}

impl Type {
    pub fn name(self) -> &'static str {
        match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Double => "double",
        }
    }

    pub fn is_numeric(self) -> bool {
        self != Type::Bool
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: Type,
    pub value: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarType {
    Bool,
    Range(Expr, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub weight: Expr,
    pub assignments: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    /// Rate-labelled command of a Markov automaton (`<act>` brackets).
    pub markovian: bool,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub pos: Pos,
}

impl Module {
    /// Action labels used by this module's commands.
    pub fn actions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.commands.iter().filter_map(|c| c.action.as_deref()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardTarget {
    State,
    /// Transition reward on commands with this action (`None` = silent).
    Action(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub target: RewardTarget,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStruct {
    pub name: Option<String>,
    pub items: Vec<RewardItem>,
    pub pos: Pos,
}

impl RewardStruct {
    pub fn has_state_rewards(&self) -> bool {
        self.items.iter().any(|i| i.target == RewardTarget::State)
    }

    pub fn has_action_rewards(&self) -> bool {
        self.items.iter().any(|i| i.target != RewardTarget::State)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub kind: ModelKind,
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub globals: Vec<VarDecl>,
    pub modules: Vec<Module>,
    pub labels: Vec<LabelDecl>,
    pub rewards: Vec<RewardStruct>,
    pub init: Option<Expr>,
}

impl Program {
    /// Globals first, then module variables in declaration order.
    pub fn variables(&self) -> impl Iterator<Item = &VarDecl> {
        self.globals.iter().chain(self.modules.iter().flat_map(|m| m.vars.iter()))
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn formula(&self, name: &str) -> Option<&FormulaDecl> {
        self.formulas.iter().find(|f| f.name == name)
    }

    /// Constants declared without a value.
    pub fn undefined_constants(&self) -> Vec<&str> {
        self.constants.iter().filter(|c| c.value.is_none()).map(|c| c.name.as_str()).collect()
    }

    pub fn num_commands(&self) -> usize {
        self.modules.iter().map(|m| m.commands.len()).sum()
    }
}
