//! Canonical pretty-printer. Output reparses to an equal [`ModelAst`].

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use super::ast::*;

/// Renders a model with two-space indentation, declarations first.
pub fn pretty_print(model: &ModelAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {} {{", model.name);
    for d in &model.dims {
        let _ = write!(out, "  dim {}(size = {}", d.name, d.size);
        if d.boundary == Boundary::Cyclic {
            out.push_str(", boundary = 'cyclic'");
        }
        out.push_str(")\n");
    }
    for c in &model.consts {
        let _ = writeln!(out, "  const {} = {}", c.name, number(c.value));
    }
    for v in &model.vars {
        let _ = write!(out, "  {} {}", v.role, v.name);
        if !v.dims.is_empty() {
            let _ = write!(out, "[{}]", v.dims.join(", "));
        }
        out.push('\n');
    }
    for b in &model.blocks {
        let _ = write!(out, "\n  sub {}", b.name);
        if !b.args.is_empty() {
            let _ = write!(out, "({})", named_args(&b.args));
        }
        out.push_str(" {\n");
        for s in &b.statements {
            statement(&mut out, s, 2);
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn statement(out: &mut String, s: &Statement, level: usize) {
    indent(out, level);
    match s {
        Statement::Sample { lhs, dist } => {
            let args = dist
                .args
                .iter()
                .map(|a| match a {
                    Arg::Positional(e) => expr(e),
                    Arg::Named(n, e) => format!("{n} = {}", expr(e)),
                })
                .collect::<alloc::vec::Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "{} ~ {}({})", var_ref(lhs), dist.name, args);
        }
        Statement::Assign { lhs, rhs } => {
            let _ = writeln!(out, "{} <- {}", var_ref(lhs), expr(rhs));
        }
        Statement::Ode { args, equations } => {
            out.push_str("ode");
            if !args.is_empty() {
                let _ = write!(out, "({})", named_args(args));
            }
            out.push_str(" {\n");
            for eq in equations {
                indent(out, level + 1);
                let _ = writeln!(out, "d{}/dt = {}", var_ref(&eq.lhs), expr(&eq.rhs));
            }
            indent(out, level);
            out.push_str("}\n");
        }
    }
}

fn named_args(args: &[NamedArg]) -> String {
    args.iter()
        .map(|a| match &a.value {
            ArgValue::Expr(e) => format!("{} = {}", a.name, expr(e)),
            ArgValue::Str(s) => format!("{} = '{}'", a.name, s),
        })
        .collect::<alloc::vec::Vec<_>>()
        .join(", ")
}

pub(crate) fn number(x: f64) -> String {
    // Debug formatting of f64 is the shortest representation that
    // round-trips and always contains a `.` or an exponent.
    format!("{x:?}")
}

fn var_ref(v: &VarRef) -> String {
    if v.indices.is_empty() {
        return v.name.clone();
    }
    let idx = v
        .indices
        .iter()
        .map(|i| match i {
            IndexExpr::Literal(k) => format!("{k}"),
            IndexExpr::Dim { name, offset: 0 } => name.clone(),
            IndexExpr::Dim { name, offset } if *offset > 0 => format!("{name} + {offset}"),
            IndexExpr::Dim { name, offset } => format!("{name} - {}", offset.unsigned_abs()),
        })
        .collect::<alloc::vec::Vec<_>>()
        .join(", ");
    format!("{}[{}]", v.name, idx)
}

/// Renders an expression, parenthesising only where the parse would differ.
pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Number(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => {
            format!("({})", number(*x))
        }
        Expr::Number(x) => number(*x),
        Expr::Var(v) => var_ref(v),
        Expr::Neg(inner) => {
            let s = match **inner {
                Expr::Binary { .. } | Expr::Neg(_) => format!("({})", expr(inner)),
                _ => expr(inner),
            };
            if s.starts_with('-') {
                format!("-({s})")
            } else {
                format!("-{s}")
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let l = match **lhs {
                Expr::Binary { op: lop, .. } if lop.precedence() < op.precedence() => {
                    format!("({})", expr(lhs))
                }
                _ => expr(lhs),
            };
            let r = match **rhs {
                Expr::Binary { op: rop, .. } if rop.precedence() <= op.precedence() => {
                    format!("({})", expr(rhs))
                }
                _ => expr(rhs),
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::Call { func, args } => {
            let a = args.iter().map(expr).collect::<alloc::vec::Vec<_>>().join(", ");
            format!("{func}({a})")
        }
    }
}
