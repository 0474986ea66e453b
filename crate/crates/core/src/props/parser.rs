use super::*;
use crate::prism::lexer::Tok;
use crate::prism::parser::Parser;
use crate::prism::{evaluate, NoEnv, PrismError};
use num_traits::Zero;

type PResult<T> = Result<T, PrismError>;

/// Parse one property, e.g. `Pmax=? [ "a" U<=3 "b" ]`.
pub fn parse_property(text: &str) -> PResult<Property> {
    let mut p = Parser::new(text)?;
    let f = state(&mut p)?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after property", p.peek()));
    }
    Ok(f)
}

/// One property per non-empty line; `//` comments are skipped.
pub fn parse_properties(text: &str) -> PResult<Vec<Property>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.find("//").map_or(line, |c| &line[..c]).trim();
        if body.is_empty() {
            continue;
        }
        out.push(parse_property(body).map_err(|e| shift_line(e, i + 1))?);
    }
    Ok(out)
}

fn shift_line(e: PrismError, line: usize) -> PrismError {
    match e {
        PrismError::Syntax { mut pos, msg } => {
            pos.line = line;
            PrismError::Syntax { pos, msg }
        }
        PrismError::Unsupported { mut pos, feature } => {
            pos.line = line;
            PrismError::Unsupported { pos, feature }
        }
        other => other,
    }
}

fn state(p: &mut Parser) -> PResult<StateFormula> {
    iff(p)
}

fn iff(p: &mut Parser) -> PResult<StateFormula> {
    let mut lhs = implies(p)?;
    while p.eat(&Tok::Iff) {
        lhs = StateFormula::Iff(Box::new(lhs), Box::new(implies(p)?));
    }
    Ok(lhs)
}

fn implies(p: &mut Parser) -> PResult<StateFormula> {
    let lhs = or(p)?;
    if p.eat(&Tok::Implies) {
        return Ok(StateFormula::Implies(Box::new(lhs), Box::new(implies(p)?)));
    }
    Ok(lhs)
}

fn or(p: &mut Parser) -> PResult<StateFormula> {
    let mut lhs = and(p)?;
    while p.eat(&Tok::Or) {
        lhs = StateFormula::Or(Box::new(lhs), Box::new(and(p)?));
    }
    Ok(lhs)
}

fn and(p: &mut Parser) -> PResult<StateFormula> {
    let mut lhs = not(p)?;
    while p.eat(&Tok::And) {
        lhs = StateFormula::And(Box::new(lhs), Box::new(not(p)?));
    }
    Ok(lhs)
}

fn not(p: &mut Parser) -> PResult<StateFormula> {
    if p.eat(&Tok::Not) {
        return Ok(StateFormula::Not(Box::new(not(p)?)));
    }
    atom(p)
}

fn continues_expression(tok: &Tok) -> bool {
    matches!(
        tok,
        Tok::Eq | Tok::Neq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Question
    )
}

/// Quantitative operator word: `P`, `Pmin`, `Rmax`, `LRA`, `S`, ...
fn operator_word(tok: &Tok) -> Option<(&'static str, Option<Direction>)> {
    let Tok::Ident(w) = tok else { return None };
    for op in ["LRA", "P", "R", "S", "T"] {
        if let Some(rest) = w.strip_prefix(op) {
            let dir = match rest {
                "" => None,
                "min" => Some(Direction::Minimize),
                "max" => Some(Direction::Maximize),
                _ => continue,
            };
            return Some((op, dir));
        }
    }
    None
}

fn starts_operator(p: &Parser) -> bool {
    operator_word(p.peek()).is_some()
        && matches!(p.peek_at(1), Tok::Eq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::LBrace | Tok::Ident(_))
}

fn atom(p: &mut Parser) -> PResult<StateFormula> {
    if starts_operator(p) {
        return operator(p);
    }
    if *p.peek() == Tok::LParen {
        let mark = p.mark();
        p.bump();
        if let Ok(inner) = state(p) {
            if p.eat(&Tok::RParen) && !continues_expression(p.peek()) {
                return Ok(inner);
            }
        }
        p.reset(mark);
    }
    let e = p.binary(6)?;
    Ok(match e {
        Expr::Bool(b) => StateFormula::Bool(b),
        Expr::Label(l) => StateFormula::Label(l),
        e => StateFormula::Atom(e),
    })
}

fn op_info(p: &mut Parser, mut dir: Option<Direction>, name: &mut Option<String>, named: bool) -> PResult<OpInfo> {
    if named && p.eat(&Tok::LBrace) {
        *name = Some(p.string()?);
        p.expect(&Tok::RBrace)?;
    }
    if dir.is_none() {
        if p.eat_word("min") {
            dir = Some(Direction::Minimize);
        } else if p.eat_word("max") {
            dir = Some(Direction::Maximize);
        }
    }
    let bound = match p.bump() {
        Tok::Eq => {
            p.expect(&Tok::Question)?;
            Bound::Query
        }
        t @ (Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) => {
            let cmp = match t {
                Tok::Lt => Cmp::Lt,
                Tok::Le => Cmp::Le,
                Tok::Gt => Cmp::Gt,
                _ => Cmp::Ge,
            };
            Bound::Compare(cmp, p.binary(7)?)
        }
        other => return p.error(format!("expected '=?' or a bound, found {other}")),
    };
    Ok(OpInfo { dir, bound })
}

fn operator(p: &mut Parser) -> PResult<StateFormula> {
    let (word, dir) = operator_word(&p.bump()).expect("checked by caller");
    let mut name = None;
    let op = op_info(p, dir, &mut name, word == "R" || word == "LRA")?;
    p.expect(&Tok::LBracket)?;
    let f = match word {
        "P" => {
            let path = path(p)?;
            if p.eat(&Tok::DoubleBar) {
                let condition = self::path(p)?;
                StateFormula::Conditional { op, path, condition }
            } else {
                StateFormula::Prob { op, path }
            }
        }
        "R" => {
            let formula = if p.eat_word("F") {
                RewardFormula::Reach(Box::new(state(p)?))
            } else if p.eat_word("C") {
                p.expect(&Tok::Le)?;
                RewardFormula::Cumulative(p.binary(7)?)
            } else if p.eat_word("I") {
                p.expect(&Tok::Eq)?;
                RewardFormula::Instantaneous(p.binary(7)?)
            } else if p.is_word("S") {
                return p.error("long-run rewards are written LRA{\"name\"}=? [ ]");
            } else {
                return p.error(format!("expected F, C<= or I= in reward operator, found {}", p.peek()));
            };
            StateFormula::Reward { name, op, formula }
        }
        "LRA" => match name {
            Some(r) => StateFormula::Lra { op, target: LraTarget::Reward(r) },
            None => StateFormula::Lra { op, target: LraTarget::States(Box::new(state(p)?)) },
        },
        "T" => {
            if !p.eat_word("F") {
                return p.error(format!("expected F in time operator, found {}", p.peek()));
            }
            StateFormula::Time { op, target: Box::new(state(p)?) }
        }
        _ => StateFormula::Steady { op, formula: Box::new(state(p)?) },
    };
    p.expect(&Tok::RBracket)?;
    Ok(f)
}

/// Optional upper bound after a temporal operator: `<=b` or `[0,b]`.
fn temporal_bound(p: &mut Parser) -> PResult<Option<Expr>> {
    let pos = p.pos();
    match p.peek() {
        Tok::Le => {
            p.bump();
            Ok(Some(p.binary(7)?))
        }
        Tok::Lt => p.error("strict bounds are not supported; use <="),
        Tok::Ge | Tok::Gt => {
            Err(PrismError::Unsupported { pos, feature: "lower time bound".into() })
        }
        Tok::LBracket => {
            p.bump();
            let lo = p.binary(7)?;
            p.expect(&Tok::Comma)?;
            let hi = p.binary(7)?;
            p.expect(&Tok::RBracket)?;
            let zero = evaluate(&lo, &NoEnv, true).ok().and_then(|v| v.to_rational().ok()).is_some_and(|q| q.is_zero());
            if !zero {
                return Err(PrismError::Unsupported { pos, feature: format!("time interval with lower bound {lo}") });
            }
            Ok(Some(hi))
        }
        _ => Ok(None),
    }
}

fn path(p: &mut Parser) -> PResult<PathFormula> {
    if p.eat_word("X") {
        return Ok(PathFormula::Next(Box::new(state(p)?)));
    }
    if p.eat_word("F") {
        let bound = temporal_bound(p)?;
        return Ok(PathFormula::eventually(state(p)?, bound));
    }
    if p.eat_word("G") {
        let bound = temporal_bound(p)?;
        return Ok(PathFormula::Globally { formula: Box::new(state(p)?), bound });
    }
    let left = Box::new(state(p)?);
    if p.eat_word("U") {
        let bound = temporal_bound(p)?;
        return Ok(PathFormula::Until { left, right: Box::new(state(p)?), bound });
    }
    if p.eat_word("W") {
        let bound = temporal_bound(p)?;
        return Ok(PathFormula::WeakUntil { left, right: Box::new(state(p)?), bound });
    }
    p.error(format!("expected a path formula (X, F, G, U or W), found {}", p.peek()))
}
