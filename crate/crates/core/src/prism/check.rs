//! Name resolution, type checking and constant substitution.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::eval::{evaluate, EvalError, Env, Real, Val};
use super::{Pos, PrismError};
use crate::model::ModelKind;
use crate::numeric::{parse_rational, Rational};

enum Symbol<'a> {
    Constant(&'a ConstDecl),
    Formula(&'a FormulaDecl),
    Variable(&'a VarDecl, Option<usize>),
}

struct Scope<'a> {
    symbols: HashMap<&'a str, Symbol<'a>>,
    formula_types: std::cell::RefCell<HashMap<String, Type>>,
}

impl<'a> Scope<'a> {
    fn new(program: &'a Program) -> Result<Self, PrismError> {
        let mut symbols: HashMap<&str, Symbol> = HashMap::new();
        let mut add = |name: &'a str, sym: Symbol<'a>, pos: Pos| {
            if symbols.insert(name, sym).is_some() {
                return Err(PrismError::Duplicate { pos, what: "identifier", name: name.to_string() });
            }
            Ok(())
        };
        for c in &program.constants {
            add(&c.name, Symbol::Constant(c), c.pos)?;
        }
        for f in &program.formulas {
            add(&f.name, Symbol::Formula(f), f.pos)?;
        }
        for v in &program.globals {
            add(&v.name, Symbol::Variable(v, None), v.pos)?;
        }
        for (i, m) in program.modules.iter().enumerate() {
            for v in &m.vars {
                add(&v.name, Symbol::Variable(v, Some(i)), v.pos)?;
            }
        }
        Ok(Self { symbols, formula_types: Default::default() })
    }

    /// Type of `expr`. `constant_only` forbids variables (and formulas that
    /// use them); `stack` tracks formulas/constants being resolved.
    fn type_of(&self, expr: &Expr, constant_only: bool, stack: &mut Vec<String>) -> Result<Type, PrismError> {
        let pos = first_pos(expr);
        let err = |msg: String| PrismError::Type { pos, msg };
        Ok(match expr {
            Expr::Bool(_) => Type::Bool,
            Expr::Int(_) => Type::Int,
            Expr::Double(_) => Type::Double,
            Expr::Label(name) => return Err(err(format!("label \"{name}\" cannot be used inside the model"))),
            Expr::Ident(name, p) => match self.symbols.get(name.as_str()) {
                None => return Err(PrismError::UnknownIdentifier { pos: *p, name: name.clone() }),
                Some(Symbol::Variable(..)) if constant_only => {
                    return Err(PrismError::Type { pos: *p, msg: format!("'{name}' is a variable, expected a constant expression") })
                }
                Some(Symbol::Variable(v, _)) => match v.ty {
                    VarType::Bool => Type::Bool,
                    VarType::Range(..) => Type::Int,
                },
                Some(Symbol::Constant(c)) => {
                    if stack.contains(name) {
                        return Err(PrismError::Cyclic(name.clone()));
                    }
                    if let Some(v) = &c.value {
                        stack.push(name.clone());
                        let t = self.type_of(v, true, stack)?;
                        stack.pop();
                        if !assignable(c.ty, t) {
                            return Err(PrismError::Type {
                                pos: c.pos,
                                msg: format!("constant '{}' declared {} but defined as {}", c.name, c.ty.name(), t.name()),
                            });
                        }
                    }
                    c.ty
                }
                Some(Symbol::Formula(f)) => {
                    if stack.contains(name) {
                        return Err(PrismError::Cyclic(name.clone()));
                    }
                    if !constant_only {
                        if let Some(t) = self.formula_types.borrow().get(name) {
                            return Ok(*t);
                        }
                    }
                    stack.push(name.clone());
                    let t = self.type_of(&f.body, constant_only, stack)?;
                    stack.pop();
                    self.formula_types.borrow_mut().insert(name.clone(), t);
                    t
                }
            },
            Expr::Unary(UnOp::Not, a) => {
                expect(self.type_of(a, constant_only, stack)?, Type::Bool, "operand of '!'", pos)?;
                Type::Bool
            }
            Expr::Unary(UnOp::Neg, a) => {
                let t = self.type_of(a, constant_only, stack)?;
                if !t.is_numeric() {
                    return Err(err("operand of unary '-' must be numeric".into()));
                }
                t
            }
            Expr::Binary(op, a, b) => {
                let ta = self.type_of(a, constant_only, stack)?;
                let tb = self.type_of(b, constant_only, stack)?;
                match op {
                    BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff => {
                        expect(ta, Type::Bool, &format!("operand of '{}'", op.symbol()), pos)?;
                        expect(tb, Type::Bool, &format!("operand of '{}'", op.symbol()), pos)?;
                        Type::Bool
                    }
                    BinOp::Eq | BinOp::Neq => {
                        if ta.is_numeric() != tb.is_numeric() {
                            return Err(err(format!("cannot compare {} with {}", ta.name(), tb.name())));
                        }
                        Type::Bool
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if !ta.is_numeric() || !tb.is_numeric() {
                            return Err(err(format!("operands of '{}' must be numeric", op.symbol())));
                        }
                        Type::Bool
                    }
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        if !ta.is_numeric() || !tb.is_numeric() {
                            return Err(err(format!("operands of '{}' must be numeric", op.symbol())));
                        }
                        if *op == BinOp::Div || ta == Type::Double || tb == Type::Double {
                            Type::Double
                        } else {
                            Type::Int
                        }
                    }
                }
            }
            Expr::Ite(c, a, b) => {
                expect(self.type_of(c, constant_only, stack)?, Type::Bool, "condition of '?:'", pos)?;
                let ta = self.type_of(a, constant_only, stack)?;
                let tb = self.type_of(b, constant_only, stack)?;
                if ta == tb {
                    ta
                } else if ta.is_numeric() && tb.is_numeric() {
                    Type::Double
                } else {
                    return Err(err(format!("branches of '?:' have types {} and {}", ta.name(), tb.name())));
                }
            }
            Expr::Call(func, args) => {
                let ts = args.iter().map(|a| self.type_of(a, constant_only, stack)).collect::<Result<Vec<_>, _>>()?;
                if ts.iter().any(|t| !t.is_numeric()) {
                    return Err(err(format!("arguments of {} must be numeric", func.name())));
                }
                let all_int = ts.iter().all(|t| *t == Type::Int);
                match func {
                    Func::Min | Func::Max | Func::Pow => {
                        if all_int {
                            Type::Int
                        } else {
                            Type::Double
                        }
                    }
                    Func::Floor | Func::Ceil => Type::Int,
                    Func::Mod => {
                        if !all_int {
                            return Err(err("arguments of mod must be integers".into()));
                        }
                        Type::Int
                    }
                }
            }
        })
    }

    fn check(&self, expr: &Expr, want: Type, what: &str) -> Result<(), PrismError> {
        let t = self.type_of(expr, false, &mut Vec::new())?;
        if !assignable(want, t) {
            return Err(PrismError::Type { pos: first_pos(expr), msg: format!("{what} must be {}, got {}", want.name(), t.name()) });
        }
        Ok(())
    }

    fn check_const(&self, expr: &Expr, want: Type, what: &str) -> Result<(), PrismError> {
        let t = self.type_of(expr, true, &mut Vec::new())?;
        if !assignable(want, t) {
            return Err(PrismError::Type { pos: first_pos(expr), msg: format!("{what} must be {}, got {}", want.name(), t.name()) });
        }
        Ok(())
    }

    fn variable(&self, name: &str) -> Option<(&'a VarDecl, Option<usize>)> {
        match self.symbols.get(name) {
            Some(Symbol::Variable(v, m)) => Some((v, *m)),
            _ => None,
        }
    }
}

fn assignable(want: Type, got: Type) -> bool {
    want == got || (want == Type::Double && got == Type::Int)
}

fn expect(got: Type, want: Type, what: &str, pos: Pos) -> Result<(), PrismError> {
    if got != want {
        return Err(PrismError::Type { pos, msg: format!("{what} must be {}, got {}", want.name(), got.name()) });
    }
    Ok(())
}

/// Position of the first identifier in `expr`, for diagnostics.
pub(crate) fn first_pos(expr: &Expr) -> Pos {
    expr.identifiers().first().map(|(_, p)| *p).unwrap_or_default()
}

/// Check names, types, and the static well-formedness rules of a program.
pub fn typecheck(program: &Program) -> Result<(), PrismError> {
    let scope = Scope::new(program)?;
    for c in &program.constants {
        scope.type_of(&Expr::Ident(c.name.clone(), c.pos), true, &mut Vec::new())?;
    }
    for f in &program.formulas {
        scope.type_of(&Expr::Ident(f.name.clone(), f.pos), false, &mut Vec::new())?;
    }
    for v in program.variables() {
        if let VarType::Range(lo, hi) = &v.ty {
            scope.check_const(lo, Type::Int, &format!("lower bound of '{}'", v.name))?;
            scope.check_const(hi, Type::Int, &format!("upper bound of '{}'", v.name))?;
        }
        if let Some(init) = &v.init {
            if program.init.is_some() {
                return Err(PrismError::Type {
                    pos: v.pos,
                    msg: format!("variable '{}' has an initial value although an init block is given", v.name),
                });
            }
            let want = if v.ty == VarType::Bool { Type::Bool } else { Type::Int };
            scope.check_const(init, want, &format!("initial value of '{}'", v.name))?;
        }
    }
    for (mi, m) in program.modules.iter().enumerate() {
        for c in &m.commands {
            if c.markovian && program.kind != ModelKind::Ma {
                return Err(PrismError::Type { pos: c.pos, msg: "rate-labelled commands (<...>) are only allowed in ma models".into() });
            }
            scope.check(&c.guard, Type::Bool, "guard")?;
            if c.updates.is_empty() {
                return Err(PrismError::Syntax { pos: c.pos, msg: "command without updates".into() });
            }
            for u in &c.updates {
                scope.check(&u.weight, Type::Double, "update weight")?;
                let mut seen = BTreeSet::new();
                for (var, e) in &u.assignments {
                    let Some((decl, owner)) = scope.variable(var) else {
                        return Err(PrismError::UnknownIdentifier { pos: c.pos, name: var.clone() });
                    };
                    if owner.is_some_and(|o| o != mi) {
                        return Err(PrismError::Type {
                            pos: c.pos,
                            msg: format!("module '{}' assigns variable '{var}' of module '{}'", m.name, program.modules[owner.unwrap()].name),
                        });
                    }
                    if !seen.insert(var.as_str()) {
                        return Err(PrismError::Duplicate { pos: c.pos, what: "assignment to", name: var.clone() });
                    }
                    let want = if decl.ty == VarType::Bool { Type::Bool } else { Type::Int };
                    scope.check(e, want, &format!("value assigned to '{var}'"))?;
                }
            }
        }
    }
    let mut label_names = BTreeSet::new();
    for l in &program.labels {
        if !label_names.insert(&l.name) {
            return Err(PrismError::Duplicate { pos: l.pos, what: "label", name: l.name.clone() });
        }
        scope.check(&l.expr, Type::Bool, &format!("label \"{}\"", l.name))?;
    }
    let mut reward_names = BTreeSet::new();
    for r in &program.rewards {
        if !reward_names.insert(r.name.clone()) {
            return Err(PrismError::Duplicate { pos: r.pos, what: "reward structure", name: r.name.clone().unwrap_or_default() });
        }
        for item in &r.items {
            scope.check(&item.guard, Type::Bool, "reward guard")?;
            scope.check(&item.value, Type::Double, "reward value")?;
        }
    }
    if let Some(init) = &program.init {
        scope.check(init, Type::Bool, "init expression")?;
    }
    check_bounds(program)
}

/// Values of all constants that are defined (directly or through other
/// defined constants), evaluated exactly.
fn defined_constants(program: &Program) -> BTreeMap<String, Val> {
    let mut out = BTreeMap::new();
    loop {
        let mut progress = false;
        for c in &program.constants {
            if out.contains_key(&c.name) {
                continue;
            }
            if let Some(e) = &c.value {
                if let Ok(v) = evaluate(&inline_formulas(program, e), &out, true) {
                    out.insert(c.name.clone(), coerce(c.ty, v));
                    progress = true;
                }
            }
        }
        if !progress {
            return out;
        }
    }
}

fn inline_formulas(program: &Program, e: &Expr) -> Expr {
    e.map_idents(&mut |n, _| program.formula(n).map(|f| inline_formulas(program, &f.body)))
}

fn coerce(ty: Type, v: Val) -> Val {
    match (ty, v) {
        (Type::Double, Val::Int(i)) => Val::Real(Real::Exact(Rational::from_integer(i))),
        (_, v) => v,
    }
}

fn eval_error(pos: Pos, e: EvalError) -> PrismError {
    PrismError::Eval { pos, source: e }
}

/// Bound and initial-value checks for every variable whose bounds are
/// already known.
fn check_bounds(program: &Program) -> Result<(), PrismError> {
    let consts = defined_constants(program);
    for v in program.variables() {
        let VarType::Range(lo, hi) = &v.ty else { continue };
        let (Ok(lo), Ok(hi)) = (evaluate(lo, &consts, true), evaluate(hi, &consts, true)) else { continue };
        let (lo, hi) = (lo.as_int().map_err(|e| eval_error(v.pos, e))?.clone(), hi.as_int().map_err(|e| eval_error(v.pos, e))?.clone());
        if lo > hi {
            return Err(PrismError::Bounds { pos: v.pos, msg: format!("empty range [{lo}..{hi}] for variable '{}'", v.name) });
        }
        if let Some(init) = &v.init {
            if let Ok(Val::Int(i)) = evaluate(init, &consts, true) {
                if i < lo || i > hi {
                    return Err(PrismError::Bounds {
                        pos: v.pos,
                        msg: format!("init out of bounds: '{}' = {i} outside [{lo}..{hi}]", v.name),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Parse a command-line constant value: `true`/`false`, an integer, or a
/// decimal (read exactly).
pub fn parse_literal(text: &str) -> Result<Val, String> {
    let t = text.trim();
    match t {
        "true" => return Ok(Val::Bool(true)),
        "false" => return Ok(Val::Bool(false)),
        _ => {}
    }
    if let Ok(i) = t.parse::<num_bigint::BigInt>() {
        return Ok(Val::Int(i));
    }
    parse_rational(t).map(|r| Val::Real(Real::Exact(r))).map_err(|e| e.to_string())
}

/// Parse `N=5,p=0.3` style bindings.
pub fn parse_bindings(text: &str) -> Result<BTreeMap<String, Val>, String> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{part}'"))?;
        let name = name.trim().to_string();
        let value = parse_literal(value).map_err(|e| format!("constant {name}: {e}"))?;
        if out.insert(name.clone(), value).is_some() {
            return Err(format!("constant {name} bound twice"));
        }
    }
    Ok(out)
}

/// Give every undefined constant its binding, then replace all constant and
/// formula references by their values or bodies. The result is closed:
/// only variable identifiers remain.
pub fn substitute_constants(program: &Program, bindings: &BTreeMap<String, Val>) -> Result<Program, PrismError> {
    for (name, value) in bindings {
        let Some(decl) = program.constant(name) else {
            return Err(PrismError::ExtraBinding(name.clone()));
        };
        if decl.value.is_some() {
            return Err(PrismError::Binding { name: name.clone(), msg: "constant is already defined in the model".into() });
        }
        let got = match value {
            Val::Bool(_) => Type::Bool,
            Val::Int(_) => Type::Int,
            Val::Real(_) => Type::Double,
        };
        if !assignable(decl.ty, got) {
            return Err(PrismError::Binding { name: name.clone(), msg: format!("expected {}, got {}", decl.ty.name(), got.name()) });
        }
    }
    let missing: Vec<String> =
        program.undefined_constants().into_iter().filter(|c| !bindings.contains_key(*c)).map(str::to_string).collect();
    if !missing.is_empty() {
        return Err(PrismError::MissingConstants(missing));
    }
    let mut values: BTreeMap<String, Val> = BTreeMap::new();
    let mut pending: Vec<&ConstDecl> = program.constants.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut last_error = None;
        pending.retain(|c| {
            let v = match &c.value {
                None => Ok(bindings[&c.name].clone()),
                Some(e) => evaluate(&inline_formulas(program, e), &values, true),
            };
            match v {
                Ok(v) => {
                    values.insert(c.name.clone(), coerce(c.ty, v));
                    false
                }
                Err(EvalError::Unbound(n)) if program.constant(&n).is_some() => true,
                Err(e) => {
                    last_error = Some(eval_error(c.pos, e));
                    true
                }
            }
        });
        if let Some(e) = last_error {
            return Err(e);
        }
        if pending.len() == before {
            return Err(PrismError::Cyclic(pending[0].name.clone()));
        }
    }
    let close = |e: &Expr| close_with(program, &values, e);
    let ty = |t: &VarType| match t {
        VarType::Bool => VarType::Bool,
        VarType::Range(lo, hi) => VarType::Range(close(lo), close(hi)),
    };
    let var = |v: &VarDecl| VarDecl { name: v.name.clone(), ty: ty(&v.ty), init: v.init.as_ref().map(close), pos: v.pos };
    let closed = Program {
        kind: program.kind,
        constants: program
            .constants
            .iter()
            .map(|c| ConstDecl { name: c.name.clone(), ty: c.ty, value: Some(values[&c.name].to_expr()), pos: c.pos })
            .collect(),
        formulas: program.formulas.iter().map(|f| FormulaDecl { name: f.name.clone(), body: close(&f.body), pos: f.pos }).collect(),
        globals: program.globals.iter().map(var).collect(),
        modules: program
            .modules
            .iter()
            .map(|m| Module {
                name: m.name.clone(),
                vars: m.vars.iter().map(var).collect(),
                commands: m
                    .commands
                    .iter()
                    .map(|c| Command {
                        action: c.action.clone(),
                        markovian: c.markovian,
                        guard: close(&c.guard),
                        updates: c
                            .updates
                            .iter()
                            .map(|u| Update {
                                weight: close(&u.weight),
                                assignments: u.assignments.iter().map(|(v, e)| (v.clone(), close(e))).collect(),
                            })
                            .collect(),
                        pos: c.pos,
                    })
                    .collect(),
                pos: m.pos,
            })
            .collect(),
        labels: program.labels.iter().map(|l| LabelDecl { name: l.name.clone(), expr: close(&l.expr), pos: l.pos }).collect(),
        rewards: program
            .rewards
            .iter()
            .map(|r| RewardStruct {
                name: r.name.clone(),
                items: r
                    .items
                    .iter()
                    .map(|i| RewardItem { target: i.target.clone(), guard: close(&i.guard), value: close(&i.value) })
                    .collect(),
                pos: r.pos,
            })
            .collect(),
        init: program.init.as_ref().map(close),
    };
    check_bounds(&closed)?;
    Ok(closed)
}

fn close_with(program: &Program, values: &BTreeMap<String, Val>, e: &Expr) -> Expr {
    e.map_idents(&mut |n, _| {
        if let Some(v) = values.get(n) {
            return Some(v.to_expr());
        }
        program.formula(n).map(|f| close_with(program, values, &f.body))
    })
}

/// Replace constant and formula references in an expression from outside the
/// program (a property) using a closed program's definitions.
pub fn close_expression(program: &Program, e: &Expr) -> Expr {
    let values: BTreeMap<String, Val> = program
        .constants
        .iter()
        .filter_map(|c| c.value.as_ref().and_then(|v| evaluate(v, &EmptyEnv, true).ok()).map(|v| (c.name.clone(), v)))
        .collect();
    close_with(program, &values, e)
}

struct EmptyEnv;

impl Env for EmptyEnv {
    fn lookup(&self, _name: &str) -> Option<Val> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    #[test]
    fn untyped_and_typed_constants() {
        let p = parse_program("dtmc const N = 3; const double p = 1/N; module m x:[0..N] init 0; [] x<N -> p:(x'=x+1) + 1-p:true; endmodule")
            .unwrap();
        let closed = substitute_constants(&p, &BTreeMap::new()).unwrap();
        assert_eq!(closed.constants[1].value, Some(Expr::Double(Rational::new(1.into(), 3.into()))));
        assert_eq!(substitute_constants(&closed, &BTreeMap::new()).unwrap(), closed);
    }

    #[test]
    fn missing_and_extra_bindings() {
        let p = parse_program("dtmc const int N; module m x:[0..N] init 0; [] x<N -> (x'=x+1); endmodule").unwrap();
        assert_eq!(substitute_constants(&p, &BTreeMap::new()).unwrap_err(), PrismError::MissingConstants(vec!["N".into()]));
        let mut b = parse_bindings("N=5").unwrap();
        let closed = substitute_constants(&p, &b).unwrap();
        assert!(closed.undefined_constants().is_empty());
        b.insert("M".into(), Val::Int(1.into()));
        assert_eq!(substitute_constants(&p, &b).unwrap_err(), PrismError::ExtraBinding("M".into()));
        let b = parse_bindings("N=0.5").unwrap();
        assert!(matches!(substitute_constants(&p, &b), Err(PrismError::Binding { .. })));
    }

    #[test]
    fn formulas_are_inlined() {
        let p = parse_program("dtmc formula done = x=1; module m x:[0..1] init 0; [] !done -> (x'=1); endmodule label \"d\" = done;").unwrap();
        let closed = substitute_constants(&p, &BTreeMap::new()).unwrap();
        assert!(closed.modules[0].commands[0].guard.identifiers().iter().all(|(n, _)| *n == "x"));
    }

    #[test]
    fn type_errors() {
        for src in [
            "dtmc module m x:[0..1] init 0; [] x -> (x'=1); endmodule",
            "dtmc module m x:[0..1] init 0; [] x=0 -> (x'=true); endmodule",
            "dtmc module m b:bool init 0; [] true -> (b'=true); endmodule",
            "dtmc module m x:[0..1] init 0; [] x=0 -> (x'=0.5); endmodule",
            "dtmc module m x:[0..1] init 0; [] y=0 -> (x'=1); endmodule",
            "dtmc module m x:[0..1] init 0; [] x=0 -> (x'=1)&(x'=0); endmodule",
            "dtmc module m x:[0..1] init 0; endmodule module n x:[0..1] init 0; endmodule",
            "dtmc formula f = g; formula g = f; module m x:[0..1] init 0; [] f -> true; endmodule",
            "dtmc module m x:[0..1] init 0; <> x=0 -> 1:(x'=1); endmodule",
            "dtmc module m x:[0..1] init 0; [] 1+true=2 -> (x'=1); endmodule",
        ] {
            assert!(parse_program(src).is_err(), "{src}");
        }
    }

    #[test]
    fn init_out_of_bounds() {
        let err = parse_program("dtmc module m x:[0..1] init 2; [] x=0 -> 0.5:(x'=0)+0.5:(x'=1); endmodule").unwrap_err();
        assert!(err.to_string().contains("init out of bounds"), "{err}");
        let p = parse_program("dtmc const int N; module m x:[0..N] init 2; [] true -> true; endmodule").unwrap();
        let err = substitute_constants(&p, &parse_bindings("N=1").unwrap()).unwrap_err();
        assert!(err.to_string().contains("init out of bounds"));
    }
}
