use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical text of a whole program; loops are separated by a blank line.
pub fn print(p: &Program) -> String {
    p.loops
        .iter()
        .map(print_loop)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn print_loop(l: &LoopNest) -> String {
    let mut out = String::new();
    let par = if l.parallel { "parallel " } else { "" };
    let _ = writeln!(
        out,
        "for ({par}{idx}={lo}; {idx}<{hi}; {idx}++) {{",
        idx = l.index,
        lo = l.lower,
        hi = l.upper
    );
    for item in l.body() {
        out.push_str(INDENT);
        match item {
            BodyItem::Stmt(s) => out.push_str(&print_statement(s, &l.index)),
            BodyItem::Sync(s) => out.push_str(&print_sync(s, &l.index)),
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

pub fn print_statement(s: &Statement, index: &str) -> String {
    let mut rhs = String::new();
    write_expr(&mut rhs, &s.rhs, index, 0, false);
    format!("{}: {} = {};", s.label, print_ref(&s.lhs, index), rhs)
}

pub fn print_sync(s: &SyncInstr, index: &str) -> String {
    match s.op {
        SyncOp::Send => format!("send({}, {}, {});", s.reg, index, s.var),
        SyncOp::Wait => format!(
            "wait({}, {}, {});",
            s.reg,
            offset_index(index, -s.offset),
            s.var
        ),
    }
}

pub fn print_ref(r: &ArrayRef, index: &str) -> String {
    format!("{}[{}]", r.array, offset_index(index, r.offset))
}

fn offset_index(index: &str, offset: i64) -> String {
    match offset {
        0 => index.to_string(),
        o if o > 0 => format!("{index}+{o}"),
        o => format!("{index}-{}", o.unsigned_abs()),
    }
}

pub fn print_expr(e: &Expr, index: &str) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, index, 0, false);
    out
}

fn write_expr(out: &mut String, e: &Expr, index: &str, parent_prec: u8, right: bool) {
    match e {
        Expr::Lit { lit } => {
            let _ = write!(out, "{lit}");
        }
        Expr::Ref { target } => out.push_str(&print_ref(target, index)),
        Expr::Bin { op, lhs, rhs } => {
            let prec = op.precedence();
            let parens = prec < parent_prec || (right && prec == parent_prec);
            if parens {
                out.push('(');
            }
            write_expr(out, lhs, index, prec, false);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, index, prec, true);
            if parens {
                out.push(')');
            }
        }
    }
}
