use std::fmt::Write;

use crate::ast::*;

const INDENT: &str = "  ";

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

/// Renders a module in canonical concrete syntax. Parsing the output yields
/// a module equal to the input.
pub fn pretty_module(m: &Module) -> String {
    let mut blocks = Vec::new();
    for (name, g) in &m.protocols {
        let mut out = format!("protocol {name} {{\n");
        indent(&mut out, 1);
        global(&mut out, g, 1);
        out.push_str("\n}\n");
        blocks.push(out);
    }
    for proc in m.procedures.values() {
        blocks.push(procedure(proc));
    }
    blocks.join("\n")
}

pub fn pretty_global(g: &GlobalType) -> String {
    let mut out = String::new();
    global(&mut out, g, 0);
    out
}

fn global(out: &mut String, g: &GlobalType, level: usize) {
    match g {
        GlobalType::End => out.push_str("end"),
        GlobalType::Interaction { from, to, branches } => {
            let _ = write!(out, "{from} -> {to}: ");
            if branches.len() == 1 {
                let (op, b) = branches.iter().next().unwrap();
                global_branch(out, op, b, level);
            } else {
                out.push_str("{\n");
                for (i, (op, b)) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push_str(",\n");
                    }
                    indent(out, level + 1);
                    global_branch(out, op, b, level + 1);
                }
                out.push('\n');
                indent(out, level);
                out.push('}');
            }
        }
    }
}

fn global_branch(out: &mut String, op: &OpName, b: &Branch<GlobalType>, level: usize) {
    let _ = write!(out, "{op}({})", b.payload);
    if b.cont != GlobalType::End {
        out.push_str(";\n");
        indent(out, level);
        global(out, &b.cont, level);
    }
}

fn procedure(proc: &Procedure) -> String {
    let mut out = format!("define {}(", proc.name);
    out.push_str(&join(proc.processes.iter()));
    out.push(')');
    if !proc.sessions.is_empty() {
        out.push_str(" (");
        for (i, s) in proc.sessions.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}[{}: ", s.name, s.protocol);
            let roles: Vec<String> = s.roles.iter().map(|b| format!("{}[{}]", b.participant, b.role)).collect();
            out.push_str(&roles.join(", "));
            out.push(']');
        }
        out.push(')');
    }
    out.push_str(" {\n");
    block(&mut out, &proc.body, 1);
    out.push_str("}\n");
    out
}

fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

fn block(out: &mut String, chor: &Choreography, level: usize) {
    for (i, s) in chor.stmts.iter().enumerate() {
        indent(out, level);
        statement(out, s, level);
        if i + 1 < chor.stmts.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn statement(out: &mut String, s: &Stmt, level: usize) {
    match &s.kind {
        StmtKind::ValueComm(c) => {
            out.push_str(c.from.name());
            if let Some(e) = &c.expr {
                let _ = write!(out, ".{}", pretty_expr(e));
            }
            let _ = write!(out, " -> {}", c.to);
            if let Some(v) = &c.var {
                let _ = write!(out, ".{v}");
            }
            let _ = write!(out, " : {}({})", c.op, c.session);
        }
        StmtKind::Selection(sel) => {
            let _ = write!(out, "{} -> {} : {}({})", sel.from, sel.to, sel.op, sel.session);
        }
        StmtKind::Assign(a) => {
            let _ = write!(out, "{}.{} = {}", a.at, a.var, pretty_expr(&a.expr));
        }
        StmtKind::Call(c) => {
            let _ = write!(out, "{}({})", c.proc_name, join(c.processes.iter()));
        }
        StmtKind::Cond(c) => {
            let _ = writeln!(out, "if ({})@{} {{", pretty_expr(&c.guard), c.at);
            block(out, &c.then_branch, level + 1);
            indent(out, level);
            out.push('}');
            if !c.else_branch.is_empty() {
                out.push_str(" else {\n");
                block(out, &c.else_branch, level + 1);
                indent(out, level);
                out.push('}');
            }
        }
    }
}

/// Renders an expression with the minimum parentheses needed to re-parse to
/// the same tree.
pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e);
    out
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Lit(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Var(v) => out.push_str(v.as_str()),
        ExprKind::Unary(UnOp::Not, inner) => {
            out.push('!');
            operand(out, inner, matches!(inner.kind, ExprKind::Binary(..)));
        }
        ExprKind::Binary(op, l, r) => {
            let needs = |child: &Expr, strict: bool| match &child.kind {
                ExprKind::Binary(cop, _, _) => {
                    if strict {
                        cop.precedence() <= op.precedence()
                    } else {
                        cop.precedence() < op.precedence()
                    }
                }
                _ => false,
            };
            operand(out, l, needs(l, false));
            let _ = write!(out, " {} ", op.symbol());
            operand(out, r, needs(r, true));
        }
        ExprKind::Call(name, args) => {
            let _ = write!(out, "{name}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, a);
            }
            out.push(')');
        }
    }
}

fn operand(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}
