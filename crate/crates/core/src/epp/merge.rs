use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::{EndpointProgram, RecvBranch, VarName};

/// Variables a continuation may read. `All` is used whenever the
/// continuation is unknown or contains a call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Live {
    All,
    Vars(BTreeSet<VarName>),
}

impl Live {
    pub fn none() -> Self {
        Live::Vars(BTreeSet::new())
    }

    pub fn contains(&self, v: &VarName) -> bool {
        match self {
            Live::All => true,
            Live::Vars(s) => s.contains(v),
        }
    }

    pub fn union(&self, other: &Live) -> Live {
        match (self, other) {
            (Live::Vars(a), Live::Vars(b)) => Live::Vars(a.union(b).cloned().collect()),
            _ => Live::All,
        }
    }

    /// Over-approximates the variables `prog` reads.
    pub fn of(prog: &EndpointProgram) -> Live {
        let mut vars = BTreeSet::new();
        if collect_reads(prog, &mut vars) {
            Live::Vars(vars)
        } else {
            Live::All
        }
    }
}

/// Returns false if the program contains a call.
fn collect_reads(prog: &EndpointProgram, out: &mut BTreeSet<VarName>) -> bool {
    use EndpointProgram::*;
    match prog {
        End => true,
        Send { expr, cont, .. } => {
            if let Some(e) = expr {
                e.vars(out);
            }
            collect_reads(cont, out)
        }
        Recv { branches, .. } => branches.values().all(|b| collect_reads(&b.cont, out)),
        Cond { guard, then_branch, else_branch } => {
            guard.vars(out);
            collect_reads(then_branch, out) && collect_reads(else_branch, out)
        }
        Assign { expr, cont, .. } => {
            expr.vars(out);
            collect_reads(cont, out)
        }
        Call { .. } => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct MergeError {
    /// Actions leading to the point of divergence.
    pub path: Vec<String>,
    pub reason: String,
}

impl fmt::Display for MergeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.reason)
        } else {
            write!(f, "after {}: {}", self.path.join(", "), self.reason)
        }
    }
}

/// Merges two endpoint programs, assuming nothing about what runs after them.
pub fn merge(a: &EndpointProgram, b: &EndpointProgram) -> Result<EndpointProgram, MergeError> {
    merge_live(a, b, &Live::All)
}

/// Merges the projections of two branches of a conditional the process does
/// not decide. The programs must agree action by action, except that
/// receive offers are unioned. A shared label may bind different variable
/// names only if neither is read afterwards (`live` covers what runs after
/// both programs); the smaller name is kept.
pub fn merge_live(a: &EndpointProgram, b: &EndpointProgram, live: &Live) -> Result<EndpointProgram, MergeError> {
    let mut path = Vec::new();
    merge_in(a, b, live, &mut path)
}

fn describe(p: &EndpointProgram) -> String {
    use EndpointProgram::*;
    match p {
        End => "end".into(),
        Send { session, to, op, .. } => format!("send {op} to {to} on {session}"),
        Recv { session, from, branches } => {
            let labels: Vec<_> = branches.keys().map(|k| k.as_str()).collect();
            format!("receive {{{}}} from {from} on {session}", labels.join(", "))
        }
        Cond { .. } => "conditional".into(),
        Assign { var, .. } => format!("assignment to {var}"),
        Call { proc_name, .. } => format!("call to {proc_name}"),
    }
}

fn merge_in(
    a: &EndpointProgram,
    b: &EndpointProgram,
    live: &Live,
    path: &mut Vec<String>,
) -> Result<EndpointProgram, MergeError> {
    use EndpointProgram::*;
    let fail = |path: &Vec<String>, reason: String| MergeError { path: path.clone(), reason };
    let mismatch =
        |path: &Vec<String>| fail(path, format!("cannot reconcile `{}` with `{}`", describe(a), describe(b)));
    match (a, b) {
        (End, End) => Ok(End),
        (Send { session, to, op, expr, cont }, Send { session: s2, to: t2, op: o2, expr: e2, cont: c2 })
            if session == s2 && to == t2 && op == o2 && expr == e2 =>
        {
            path.push(describe(a));
            let cont = merge_in(cont, c2, live, path)?;
            path.pop();
            Ok(Send {
                session: session.clone(),
                to: to.clone(),
                op: op.clone(),
                expr: expr.clone(),
                cont: Box::new(cont),
            })
        }
        (Recv { session, from, branches }, Recv { session: s2, from: f2, branches: b2 })
            if session == s2 && from == f2 =>
        {
            let mut merged = BTreeMap::new();
            for (op, ba) in branches {
                let Some(bb) = b2.get(op) else {
                    merged.insert(op.clone(), ba.clone());
                    continue;
                };
                path.push(format!("receive {op} from {from} on {session}"));
                let var = match (&ba.var, &bb.var) {
                    (None, None) => None,
                    (Some(x), Some(y)) if x == y => Some(x.clone()),
                    (Some(x), Some(y)) => {
                        let after = live.union(&Live::of(&ba.cont)).union(&Live::of(&bb.cont));
                        if after.contains(x) || after.contains(y) {
                            return Err(fail(
                                path,
                                format!(
                                    "binds `{x}` in one branch and `{y}` in the other, and the value is read later"
                                ),
                            ));
                        }
                        Some(if x <= y { x.clone() } else { y.clone() })
                    }
                    _ => return Err(fail(path, "binds a value in one branch but not in the other".into())),
                };
                let cont = merge_in(&ba.cont, &bb.cont, live, path)?;
                path.pop();
                merged.insert(op.clone(), RecvBranch { var, cont });
            }
            for (op, bb) in b2 {
                merged.entry(op.clone()).or_insert_with(|| bb.clone());
            }
            Ok(Recv { session: session.clone(), from: from.clone(), branches: merged })
        }
        (Cond { guard, then_branch, else_branch }, Cond { guard: g2, then_branch: t2, else_branch: e2 })
            if guard == g2 =>
        {
            path.push("conditional (then)".into());
            let t = merge_in(then_branch, t2, live, path)?;
            path.pop();
            path.push("conditional (else)".into());
            let e = merge_in(else_branch, e2, live, path)?;
            path.pop();
            Ok(Cond { guard: guard.clone(), then_branch: Box::new(t), else_branch: Box::new(e) })
        }
        (Assign { var, expr, cont }, Assign { var: v2, expr: x2, cont: c2 }) if var == v2 && expr == x2 => {
            path.push(describe(a));
            let cont = merge_in(cont, c2, live, path)?;
            path.pop();
            Ok(Assign { var: var.clone(), expr: expr.clone(), cont: Box::new(cont) })
        }
        (Call { proc_name, formal, sessions, cont }, Call { proc_name: p2, formal: f2, sessions: s2, cont: c2 })
            if proc_name == p2 && formal == f2 && sessions == s2 =>
        {
            path.push(describe(a));
            let cont = merge_in(cont, c2, live, path)?;
            path.pop();
            Ok(Call {
                proc_name: proc_name.clone(),
                formal: formal.clone(),
                sessions: sessions.clone(),
                cont: Box::new(cont),
            })
        }
        _ => Err(mismatch(path)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::*;

    fn recv(label: &str, var: Option<&str>, cont: EndpointProgram) -> EndpointProgram {
        let mut branches = BTreeMap::new();
        branches.insert(OpName::new(label), RecvBranch { var: var.map(VarName::new), cont });
        EndpointProgram::Recv { session: "k".into(), from: "C".into(), branches }
    }

    fn send(label: &str, cont: EndpointProgram) -> EndpointProgram {
        EndpointProgram::Send {
            session: "k".into(),
            to: "C".into(),
            op: label.into(),
            expr: None,
            cont: Box::new(cont),
        }
    }

    #[test]
    fn disjoint_offers_are_unioned() {
        let a = recv("write", Some("data"), send("ok", EndpointProgram::End));
        let b = recv("writeAsync", Some("data"), EndpointProgram::End);
        let EndpointProgram::Recv { branches, .. } = merge(&a, &b).unwrap() else { panic!() };
        let labels: Vec<_> = branches.keys().map(|k| k.as_str()).collect();
        assert_eq!(labels, ["write", "writeAsync"]);
    }

    #[test]
    fn idempotent() {
        let a = recv("write", Some("data"), send("ok", EndpointProgram::End));
        assert_eq!(merge(&a, &a).unwrap(), a);
    }

    #[test]
    fn send_against_receive_fails() {
        let err = merge(&send("ok", EndpointProgram::End), &recv("ok", None, EndpointProgram::End)).unwrap_err();
        assert!(err.reason.contains("cannot reconcile"));
    }

    #[test]
    fn end_against_action_fails() {
        assert!(merge(&EndpointProgram::End, &recv("a", None, EndpointProgram::End)).is_err());
    }

    #[test]
    fn shared_label_recurses() {
        let a = recv("go", None, recv("x", None, EndpointProgram::End));
        let b = recv("go", None, recv("y", None, EndpointProgram::End));
        let merged = merge(&a, &b).unwrap();
        let EndpointProgram::Recv { branches, .. } = &merged else { panic!() };
        let EndpointProgram::Recv { branches: inner, .. } = &branches["go"].cont else { panic!() };
        assert_eq!(inner.len(), 2);
    }

    #[test]
    fn differing_binders_need_dead_values() {
        let a = recv("write", Some("blocks"), EndpointProgram::End);
        let b = recv("write", Some("data"), EndpointProgram::End);
        let merged = merge_live(&a, &b, &Live::none()).unwrap();
        let EndpointProgram::Recv { branches, .. } = &merged else { panic!() };
        assert_eq!(branches["write"].var.as_ref().unwrap().as_str(), "blocks");
        assert_eq!(merge_live(&b, &a, &Live::none()).unwrap(), merged);
        assert!(merge(&a, &b).is_err());

        let reads =
            EndpointProgram::Assign { var: "z".into(), expr: Expr::var("data"), cont: Box::new(EndpointProgram::End) };
        let a = recv("write", Some("blocks"), reads.clone());
        let b = recv("write", Some("data"), reads);
        assert!(merge_live(&a, &b, &Live::none()).is_err());
    }
}
