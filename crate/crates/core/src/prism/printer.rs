use std::fmt::{self, Display, Formatter, Write as _};

use super::ast::*;
use crate::model::ModelKind;
use crate::numeric::rational_to_decimal;

fn operand(f: &mut Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Binary(..) | Expr::Ite(..) => write!(f, "({e})"),
        Expr::Unary(..) => write!(f, "({e})"),
        Expr::Double(r) if rational_to_decimal(r).is_none() => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Int(i) if i.sign() == num_bigint::Sign::Minus => write!(f, "({i})"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Double(r) => match rational_to_decimal(r) {
                Some(d) if d.contains('.') => f.write_str(&d),
                Some(d) => write!(f, "{d}.0"),
                None => write!(f, "{}/{}", r.numer(), r.denom()),
            },
            Expr::Ident(n, _) => f.write_str(n),
            Expr::Label(n) => write!(f, "\"{n}\""),
            Expr::Unary(UnOp::Not, a) => {
                f.write_str("!")?;
                operand(f, a)
            }
            Expr::Unary(UnOp::Neg, a) => {
                f.write_str("-")?;
                operand(f, a)
            }
            Expr::Binary(op, a, b) => {
                operand(f, a)?;
                write!(f, " {} ", op.symbol())?;
                operand(f, b)
            }
            Expr::Ite(c, a, b) => {
                operand(f, c)?;
                f.write_str(" ? ")?;
                operand(f, a)?;
                f.write_str(" : ")?;
                operand(f, b)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn var_decl(out: &mut String, v: &VarDecl) {
    let _ = match &v.ty {
        VarType::Bool => write!(out, "{} : bool", v.name),
        VarType::Range(lo, hi) => write!(out, "{} : [{lo}..{hi}]", v.name),
    };
    if let Some(init) = &v.init {
        let _ = write!(out, " init {init}");
    }
    out.push_str(";\n");
}

impl Display for Update {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} : ", self.weight)?;
        if self.assignments.is_empty() {
            return f.write_str("true");
        }
        for (i, (v, e)) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "({v}'={e})")?;
        }
        Ok(())
    }
}

impl Display for Command {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let (open, close) = if self.markovian { ('<', '>') } else { ('[', ']') };
        write!(f, "{open}{}{close} {} -> ", self.action.as_deref().unwrap_or(""), self.guard)?;
        for (i, u) in self.updates.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{u}")?;
        }
        f.write_str(";")
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let kind = match self.kind {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
            ModelKind::Mdp => "mdp",
            ModelKind::Ma => "ma",
        };
        let _ = writeln!(out, "{kind}\n");
        for c in &self.constants {
            let _ = write!(out, "const {} {}", c.ty.name(), c.name);
            if let Some(v) = &c.value {
                let _ = write!(out, " = {v}");
            }
            out.push_str(";\n");
        }
        for fd in &self.formulas {
            let _ = writeln!(out, "formula {} = {};", fd.name, fd.body);
        }
        for g in &self.globals {
            out.push_str("global ");
            var_decl(&mut out, g);
        }
        for m in &self.modules {
            let _ = writeln!(out, "\nmodule {}", m.name);
            for v in &m.vars {
                out.push_str("  ");
                var_decl(&mut out, v);
            }
            for c in &m.commands {
                let _ = writeln!(out, "  {c}");
            }
            out.push_str("endmodule\n");
        }
        if let Some(init) = &self.init {
            let _ = writeln!(out, "\ninit {init} endinit");
        }
        for l in &self.labels {
            let _ = writeln!(out, "label \"{}\" = {};", l.name, l.expr);
        }
        for r in &self.rewards {
            match &r.name {
                Some(n) => {
                    let _ = writeln!(out, "\nrewards \"{n}\"");
                }
                None => out.push_str("\nrewards\n"),
            }
            for item in &r.items {
                let _ = match &item.target {
                    RewardTarget::State => writeln!(out, "  {} : {};", item.guard, item.value),
                    RewardTarget::Action(a) => writeln!(out, "  [{}] {} : {};", a.as_deref().unwrap_or(""), item.guard, item.value),
                };
            }
            out.push_str("endrewards\n");
        }
        f.write_str(&out)
    }
}
