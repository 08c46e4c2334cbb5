use std::collections::BTreeSet;
use std::fmt::Write;

use super::ProjectedSystem;
use crate::ast::*;
use crate::parser::pretty_expr;

/// Renders one endpoint program in the textual endpoint language.
pub fn emit_program(prog: &EndpointProgram) -> String {
    let mut out = String::new();
    if prog.is_end() {
        out.push_str("end\n");
    } else {
        block(&mut out, prog, 0);
    }
    out
}

/// One `(process, text)` pair per endpoint, in process order. Each text
/// holds the endpoint's main program followed by the procedure projections
/// it may call.
pub fn emit_system(sys: &ProjectedSystem) -> Vec<(ProcessId, String)> {
    sys.endpoints
        .iter()
        .map(|(p, prog)| {
            let mut out = emit_program(prog);
            for (name, formal) in reachable_procedures(sys, prog) {
                let body = &sys.procedures[&(name.clone(), formal.clone())];
                let _ = writeln!(out, "\nproc {name}@{formal} {{");
                block(&mut out, body, 1);
                out.push_str("}\n");
            }
            (p.clone(), out)
        })
        .collect()
}

fn reachable_procedures(sys: &ProjectedSystem, prog: &EndpointProgram) -> BTreeSet<(ProcName, ProcessId)> {
    let mut seen = BTreeSet::new();
    let mut todo = Vec::new();
    calls(prog, &mut todo);
    while let Some(key) = todo.pop() {
        if seen.insert(key.clone()) {
            if let Some(body) = sys.procedures.get(&key) {
                calls(body, &mut todo);
            }
        }
    }
    seen
}

fn calls(prog: &EndpointProgram, out: &mut Vec<(ProcName, ProcessId)>) {
    use EndpointProgram::*;
    match prog {
        End => {}
        Send { cont, .. } | Assign { cont, .. } => calls(cont, out),
        Recv { branches, .. } => branches.values().for_each(|b| calls(&b.cont, out)),
        Cond { then_branch, else_branch, .. } => {
            calls(then_branch, out);
            calls(else_branch, out);
        }
        Call { proc_name, formal, cont, .. } => {
            out.push((proc_name.clone(), formal.clone()));
            calls(cont, out);
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn block(out: &mut String, mut prog: &EndpointProgram, level: usize) {
    use EndpointProgram::*;
    loop {
        match prog {
            End => return,
            Send { session, to, op, expr, cont } => {
                indent(out, level);
                let payload = expr.as_ref().map(pretty_expr).unwrap_or_default();
                let _ = writeln!(out, "send {session} -> {to} : {op}({payload});");
                prog = cont;
            }
            Recv { session, from, branches } if branches.len() == 1 => {
                let (op, b) = branches.iter().next().unwrap();
                indent(out, level);
                let var = b.var.as_ref().map(|v| v.as_str()).unwrap_or_default();
                let _ = writeln!(out, "recv {session} <- {from} : {op}({var});");
                prog = &b.cont;
            }
            Recv { session, from, branches } => {
                indent(out, level);
                let _ = writeln!(out, "recv {session} <- {from} {{");
                for (op, b) in branches {
                    indent(out, level + 1);
                    let var = b.var.as_ref().map(|v| v.as_str()).unwrap_or_default();
                    let _ = writeln!(out, "{op}({var}) => {{");
                    block(out, &b.cont, level + 2);
                    indent(out, level + 1);
                    out.push_str("}\n");
                }
                indent(out, level);
                out.push_str("}\n");
                return;
            }
            Cond { guard, then_branch, else_branch } => {
                indent(out, level);
                let _ = writeln!(out, "if ({}) {{", pretty_expr(guard));
                block(out, then_branch, level + 1);
                indent(out, level);
                out.push_str("} else {\n");
                block(out, else_branch, level + 1);
                indent(out, level);
                out.push_str("}\n");
                return;
            }
            Assign { var, expr, cont } => {
                indent(out, level);
                let _ = writeln!(out, "{var} = {};", pretty_expr(expr));
                prog = cont;
            }
            Call { proc_name, formal, sessions, cont } => {
                indent(out, level);
                let sessions: Vec<_> = sessions.iter().map(|s| s.as_str()).collect();
                let _ = writeln!(out, "call {proc_name}@{formal}({});", sessions.join(", "));
                prog = cont;
            }
        }
    }
}
