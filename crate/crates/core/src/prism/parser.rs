use std::collections::BTreeMap;

use num_bigint::BigInt;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{Pos, PrismError};
use crate::model::ModelKind;
use crate::numeric::parse_rational;

const KEYWORDS: &[&str] = &[
    "bool", "clock", "const", "ctmc", "double", "dtmc", "endinit", "endmodule", "endrewards", "endsystem", "false",
    "formula", "global", "init", "int", "label", "ma", "mdp", "module", "nondeterministic", "probabilistic", "rewards",
    "stochastic", "system", "true",
];

/// Token cursor shared with the property parser.
pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, PrismError>;

impl Parser {
    pub(crate) fn new(text: &str) -> PResult<Self> {
        Ok(Self { toks: lex(text)?, at: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub(crate) fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub(crate) fn mark(&self) -> usize {
        self.at
    }

    pub(crate) fn reset(&mut self, mark: usize) {
        self.at = mark;
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    pub(crate) fn eat_word(&mut self, word: &str) -> bool {
        if self.is_word(word) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(PrismError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    pub(crate) fn expect(&mut self, tok: &Tok) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.error(format!("expected {tok}, found {}", self.peek()))
        }
    }

    pub(crate) fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            self.error(format!("expected '{word}', found {}", self.peek()))
        }
    }

    pub(crate) fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                self.bump();
                Ok(w)
            }
            other => self.error(format!("expected identifier, found {other}")),
        }
    }

    pub(crate) fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected quoted name, found {other}")),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(1)?;
        if self.eat(&Tok::Question) {
            let a = self.expr()?;
            self.expect(&Tok::Colon)?;
            let b = self.expr()?;
            return Ok(Expr::Ite(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Iff => BinOp::Iff,
            Tok::Implies => BinOp::Implies,
            Tok::Or => BinOp::Or,
            Tok::And => BinOp::And,
            Tok::Eq => BinOp::Eq,
            Tok::Neq => BinOp::Neq,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return None,
        })
    }

    /// Expressions binding at least as tightly as `level`: 1 `<=>`,
    /// 2 `=>`, 3 `|`, 4 `&`, 5 `!`, 6 relations, 7 `+ -`, 8 `* /`, 9 unary minus.
    pub(crate) fn binary(&mut self, level: u8) -> PResult<Expr> {
        match level {
            5 => {
                if self.eat(&Tok::Not) {
                    return Ok(Expr::Unary(UnOp::Not, Box::new(self.binary(5)?)));
                }
                return self.binary(6);
            }
            9 => {
                if self.eat(&Tok::Minus) {
                    return Ok(Expr::Unary(UnOp::Neg, Box::new(self.binary(9)?)));
                }
                return self.primary();
            }
            _ => {}
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop().filter(|op| op.precedence() == level) {
            self.bump();
            if op == BinOp::Implies {
                let rhs = self.binary(level)?;
                return Ok(Expr::binary(op, lhs, rhs));
            }
            let rhs = self.binary(level + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                Ok(Expr::Int(s.parse::<BigInt>().expect("lexer produced digits")))
            }
            Tok::Double(s) => {
                self.bump();
                let r = parse_rational(&s).map_err(|e| PrismError::Syntax { pos, msg: e.to_string() })?;
                Ok(Expr::Double(r))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Label(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Expr::Bool(w == "true"))
            }
            Tok::Ident(w) => {
                if let Some(func) = Func::from_name(&w) {
                    if *self.peek_at(1) == Tok::LParen {
                        self.bump();
                        self.bump();
                        let mut args = vec![self.expr()?];
                        while self.eat(&Tok::Comma) {
                            args.push(self.expr()?);
                        }
                        self.expect(&Tok::RParen)?;
                        let arity_ok = match func {
                            Func::Min | Func::Max => args.len() >= 2,
                            Func::Floor | Func::Ceil => args.len() == 1,
                            Func::Pow | Func::Mod => args.len() == 2,
                        };
                        if !arity_ok {
                            return Err(PrismError::Syntax {
                                pos,
                                msg: format!("wrong number of arguments to {}", func.name()),
                            });
                        }
                        return Ok(Expr::Call(func, args));
                    }
                }
                let name = self.ident()?;
                Ok(Expr::Ident(name, pos))
            }
            other => self.error(format!("expected expression, found {other}")),
        }
    }
}

fn model_kind(p: &mut Parser) -> PResult<ModelKind> {
    let kind = match p.peek() {
        Tok::Ident(w) => match w.as_str() {
            "dtmc" | "probabilistic" => ModelKind::Dtmc,
            "ctmc" | "stochastic" => ModelKind::Ctmc,
            "mdp" | "nondeterministic" => ModelKind::Mdp,
            "ma" => ModelKind::Ma,
            "pta" => return Err(PrismError::Unsupported { pos: p.pos(), feature: "model type pta".into() }),
            _ => return p.error(format!("expected a model type, found {}", p.peek())),
        },
        other => return p.error(format!("expected a model type, found {other}")),
    };
    p.bump();
    Ok(kind)
}

fn var_decl(p: &mut Parser) -> PResult<VarDecl> {
    let pos = p.pos();
    let name = p.ident()?;
    p.expect(&Tok::Colon)?;
    let ty = if p.eat(&Tok::LBracket) {
        let lo = p.expr()?;
        p.expect(&Tok::DotDot)?;
        let hi = p.expr()?;
        p.expect(&Tok::RBracket)?;
        VarType::Range(lo, hi)
    } else if p.eat_word("bool") {
        VarType::Bool
    } else {
        let feature = match p.peek() {
            Tok::Ident(w) if w == "int" => "unbounded integer variables",
            Tok::Ident(w) if w == "clock" => "clock variables",
            Tok::Ident(w) if w == "array" => "array variables",
            Tok::Ident(w) if w == "double" => "double variables",
            _ => return p.error(format!("expected variable type, found {}", p.peek())),
        };
        return Err(PrismError::Unsupported { pos: p.pos(), feature: feature.into() });
    };
    let init = if p.eat_word("init") { Some(p.expr()?) } else { None };
    p.expect(&Tok::Semi)?;
    Ok(VarDecl { name, ty, init, pos })
}

fn assignment_follows(p: &Parser) -> bool {
    *p.peek() == Tok::LParen && matches!(p.peek_at(1), Tok::Ident(_)) && *p.peek_at(2) == Tok::Prime
}

fn assignments(p: &mut Parser) -> PResult<Vec<(String, Expr)>> {
    if p.eat_word("true") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    loop {
        if !assignment_follows(p) {
            return p.error(format!("expected assignment (x'=...), found {}", p.peek()));
        }
        p.expect(&Tok::LParen)?;
        let var = p.ident()?;
        p.expect(&Tok::Prime)?;
        p.expect(&Tok::Eq)?;
        let e = p.expr()?;
        p.expect(&Tok::RParen)?;
        out.push((var, e));
        if !p.eat(&Tok::And) {
            return Ok(out);
        }
    }
}

fn update(p: &mut Parser) -> PResult<Update> {
    let bare_true = p.is_word("true") && matches!(p.peek_at(1), Tok::Semi | Tok::Plus);
    if bare_true || assignment_follows(p) {
        return Ok(Update { weight: Expr::int(1), assignments: assignments(p)? });
    }
    let weight = p.expr()?;
    p.expect(&Tok::Colon)?;
    Ok(Update { weight, assignments: assignments(p)? })
}

fn command(p: &mut Parser) -> PResult<Command> {
    let pos = p.pos();
    let markovian = match p.bump() {
        Tok::LBracket => false,
        Tok::Lt => true,
        other => return Err(PrismError::Syntax { pos, msg: format!("expected command, found {other}") }),
    };
    let close = if markovian { Tok::Gt } else { Tok::RBracket };
    let action = if p.eat(&close) {
        None
    } else {
        let a = p.ident()?;
        p.expect(&close)?;
        Some(a)
    };
    let guard = p.expr()?;
    p.expect(&Tok::Arrow)?;
    let mut updates = vec![update(p)?];
    while p.eat(&Tok::Plus) {
        updates.push(update(p)?);
    }
    p.expect(&Tok::Semi)?;
    Ok(Command { action, markovian, guard, updates, pos })
}

enum ModuleDef {
    Plain(Module),
    Renamed { name: String, base: String, renames: BTreeMap<String, String>, pos: Pos },
}

fn module(p: &mut Parser) -> PResult<ModuleDef> {
    let pos = p.pos();
    p.expect_word("module")?;
    let name = p.ident()?;
    if p.eat(&Tok::Eq) {
        let base = p.ident()?;
        p.expect(&Tok::LBracket)?;
        let mut renames = BTreeMap::new();
        loop {
            let from = p.ident()?;
            p.expect(&Tok::Eq)?;
            let to = p.ident()?;
            if renames.insert(from.clone(), to).is_some() {
                return Err(PrismError::Duplicate { pos, what: "renaming of", name: from });
            }
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
        p.expect(&Tok::RBracket)?;
        p.expect_word("endmodule")?;
        return Ok(ModuleDef::Renamed { name, base, renames, pos });
    }
    let mut vars = Vec::new();
    let mut commands = Vec::new();
    loop {
        match p.peek() {
            Tok::Ident(w) if w == "endmodule" => {
                p.bump();
                break;
            }
            Tok::LBracket | Tok::Lt => commands.push(command(p)?),
            Tok::Ident(_) if commands.is_empty() => vars.push(var_decl(p)?),
            _ => return p.error(format!("expected command or 'endmodule', found {}", p.peek())),
        }
    }
    Ok(ModuleDef::Plain(Module { name, vars, commands, pos }))
}

fn rewards(p: &mut Parser) -> PResult<RewardStruct> {
    let pos = p.pos();
    p.expect_word("rewards")?;
    let name = match p.peek() {
        Tok::Str(_) => Some(p.string()?),
        _ => None,
    };
    let mut items = Vec::new();
    while !p.eat_word("endrewards") {
        let target = if p.eat(&Tok::LBracket) {
            if p.eat(&Tok::RBracket) {
                RewardTarget::Action(None)
            } else {
                let a = p.ident()?;
                p.expect(&Tok::RBracket)?;
                RewardTarget::Action(Some(a))
            }
        } else {
            RewardTarget::State
        };
        let guard = p.expr()?;
        p.expect(&Tok::Colon)?;
        let value = p.expr()?;
        p.expect(&Tok::Semi)?;
        items.push(RewardItem { target, guard, value });
    }
    Ok(RewardStruct { name, items, pos })
}

fn rename(module: &Module, name: String, renames: &BTreeMap<String, String>, pos: Pos) -> Module {
    let r = |s: &str| renames.get(s).cloned().unwrap_or_else(|| s.to_string());
    let expr = |e: &Expr| e.map_idents(&mut |n, p| renames.get(n).map(|t| Expr::Ident(t.clone(), p)));
    let ty = |t: &VarType| match t {
        VarType::Bool => VarType::Bool,
        VarType::Range(lo, hi) => VarType::Range(expr(lo), expr(hi)),
    };
    Module {
        name,
        vars: module
            .vars
            .iter()
            .map(|v| VarDecl { name: r(&v.name), ty: ty(&v.ty), init: v.init.as_ref().map(expr), pos: v.pos })
            .collect(),
        commands: module
            .commands
            .iter()
            .map(|c| Command {
                action: c.action.as_deref().map(r),
                markovian: c.markovian,
                guard: expr(&c.guard),
                updates: c
                    .updates
                    .iter()
                    .map(|u| Update {
                        weight: expr(&u.weight),
                        assignments: u.assignments.iter().map(|(v, e)| (r(v), expr(e))).collect(),
                    })
                    .collect(),
                pos: c.pos,
            })
            .collect(),
        pos,
    }
}

/// Parse program text into an AST without semantic checks.
pub fn parse_syntax(text: &str) -> PResult<Program> {
    let mut p = Parser::new(text)?;
    let kind = model_kind(&mut p)?;
    let mut program = Program {
        kind,
        constants: Vec::new(),
        formulas: Vec::new(),
        globals: Vec::new(),
        modules: Vec::new(),
        labels: Vec::new(),
        rewards: Vec::new(),
        init: None,
    };
    let mut defs = Vec::new();
    while !p.at_eof() {
        let pos = p.pos();
        let word = match p.peek() {
            Tok::Ident(w) => w.clone(),
            other => return p.error(format!("expected a declaration, found {other}")),
        };
        match word.as_str() {
            "const" => {
                p.bump();
                let ty = if p.eat_word("int") {
                    Type::Int
                } else if p.eat_word("double") || p.eat_word("rate") || p.eat_word("prob") {
                    Type::Double
                } else if p.eat_word("bool") {
                    Type::Bool
                } else {
                    Type::Int
                };
                let name = p.ident()?;
                let value = if p.eat(&Tok::Eq) { Some(p.expr()?) } else { None };
                p.expect(&Tok::Semi)?;
                program.constants.push(ConstDecl { name, ty, value, pos });
            }
            "formula" => {
                p.bump();
                let name = p.ident()?;
                p.expect(&Tok::Eq)?;
                let body = p.expr()?;
                p.expect(&Tok::Semi)?;
                program.formulas.push(FormulaDecl { name, body, pos });
            }
            "label" => {
                p.bump();
                let name = p.string()?;
                p.expect(&Tok::Eq)?;
                let expr = p.expr()?;
                p.expect(&Tok::Semi)?;
                program.labels.push(LabelDecl { name, expr, pos });
            }
            "global" => {
                p.bump();
                program.globals.push(var_decl(&mut p)?);
            }
            "module" => defs.push(module(&mut p)?),
            "rewards" => program.rewards.push(rewards(&mut p)?),
            "init" => {
                p.bump();
                if program.init.is_some() {
                    return Err(PrismError::Duplicate { pos, what: "init block", name: "init".into() });
                }
                program.init = Some(p.expr()?);
                p.expect_word("endinit")?;
            }
            "system" => return Err(PrismError::Unsupported { pos, feature: "system ... endsystem blocks".into() }),
            _ => return p.error(format!("expected a declaration, found {}", p.peek())),
        }
    }
    let plain: BTreeMap<String, Module> = defs
        .iter()
        .filter_map(|d| match d {
            ModuleDef::Plain(m) => Some((m.name.clone(), m.clone())),
            ModuleDef::Renamed { .. } => None,
        })
        .collect();
    for def in defs {
        program.modules.push(match def {
            ModuleDef::Plain(m) => m,
            ModuleDef::Renamed { name, base, renames, pos } => {
                let Some(base_module) = plain.get(&base) else {
                    return Err(PrismError::UnknownIdentifier { pos, name: base });
                };
                rename(base_module, name, &renames, pos)
            }
        });
    }
    if program.modules.is_empty() {
        return Err(PrismError::Syntax { pos: p.pos(), msg: "program declares no module".into() });
    }
    Ok(program)
}

/// Parse a single expression.
pub fn parse_expression(text: &str) -> PResult<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after expression", p.peek()));
    }
    Ok(e)
}
