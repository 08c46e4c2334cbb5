use std::collections::BTreeSet;

use super::global::{consume, merge_local};
use crate::ast::*;

/// The local type of process `p` on session `k` as written in the body of
/// `proc`. For a procedure accepted by the checker this equals the
/// projection of the session's protocol onto `p`'s role.
pub fn infer_local_behaviour(m: &Module, proc: &Procedure, p: &ProcessId, k: &SessionId) -> LocalType {
    let Some(decl) = proc.session(k.as_str()) else { return LocalType::End };
    let Some(g) = m.protocol(decl.protocol.as_str()) else { return LocalType::End };
    let mut visiting = BTreeSet::new();
    Inference { module: m, proc, p, k, visiting: &mut visiting }.walk(vec![&proc.body.stmts], g.clone())
}

struct Inference<'a, 'v> {
    module: &'a Module,
    proc: &'a Procedure,
    p: &'a ProcessId,
    k: &'a SessionId,
    visiting: &'v mut BTreeSet<(ProcName, ProcessId)>,
}

impl<'a> Inference<'a, '_> {
    fn is_me(&self, peer: &Peer) -> bool {
        peer.as_process() == Some(self.p)
    }

    /// `frames` is a stack of statement lists still to run, innermost last.
    fn walk(&mut self, mut frames: Vec<&'a [Stmt]>, mut g: GlobalType) -> LocalType {
        loop {
            while frames.last().is_some_and(|f| f.is_empty()) {
                frames.pop();
            }
            let Some(top) = frames.last_mut() else { return LocalType::End };
            let stmt = &top[0];
            *top = &top[1..];
            let comm = match &stmt.kind {
                StmtKind::ValueComm(c) => Some((&c.from, &c.to, &c.op, &c.session)),
                StmtKind::Selection(s) => Some((&s.from, &s.to, &s.op, &s.session)),
                _ => None,
            };
            if let Some((from, to, op, session)) = comm {
                if session != self.k {
                    continue;
                }
                let decl = self.proc.session(session.as_str()).expect("session is declared");
                let (Some(rf), Some(rt)) = (decl.role_of(from), decl.role_of(to)) else { continue };
                let Ok((rest, payload)) = consume(&g, rf, rt, op) else { continue };
                g = rest;
                let (sends, receives) = (self.is_me(from), self.is_me(to));
                if !sends && !receives {
                    continue;
                }
                let cont = self.walk(frames, g);
                let branches = [(op.clone(), Branch { payload, cont })].into_iter().collect();
                return if sends {
                    LocalType::Send { to: rt.clone(), branches }
                } else {
                    LocalType::Recv { from: rf.clone(), branches }
                };
            }
            match &stmt.kind {
                StmtKind::Cond(c) => {
                    let mut then_frames = frames.clone();
                    then_frames.push(&c.then_branch.stmts);
                    let mut else_frames = frames;
                    else_frames.push(&c.else_branch.stmts);
                    let t = self.walk(then_frames, g.clone());
                    let e = self.walk(else_frames, g);
                    return if &c.at == self.p { choice(t, e) } else { merge_local(&t, &e).unwrap_or(t) };
                }
                StmtKind::Call(call) if call.sessions.contains(self.k) => {
                    let Some(i) = call.processes.iter().position(|x| x == self.p) else {
                        g = GlobalType::End;
                        continue;
                    };
                    let Some(callee) = self.module.procedure(call.proc_name.as_str()) else {
                        return LocalType::End;
                    };
                    let formal = callee.processes[i].clone();
                    let key = (call.proc_name.clone(), formal.clone());
                    if !self.visiting.insert(key.clone()) {
                        return LocalType::End;
                    }
                    let Some(decl) = callee.session(self.k.as_str()) else { return LocalType::End };
                    let Some(fresh) = self.module.protocol(decl.protocol.as_str()) else {
                        return LocalType::End;
                    };
                    let out =
                        Inference { module: self.module, proc: callee, p: &formal, k: self.k, visiting: self.visiting }
                            .walk(vec![&callee.body.stmts], fresh.clone());
                    self.visiting.remove(&key);
                    return out;
                }
                _ => {}
            }
        }
    }
}

/// Joins the two branches of a choice made by the process itself: sends to
/// the same peer become one internal choice.
fn choice(t: LocalType, e: LocalType) -> LocalType {
    match (&t, &e) {
        (LocalType::Send { to, branches }, LocalType::Send { to: t2, branches: b2 }) if to == t2 => {
            let mut out = branches.clone();
            for (op, b) in b2 {
                let joined = match branches.get(op) {
                    Some(a) => Branch {
                        payload: a.payload,
                        cont: merge_local(&a.cont, &b.cont).unwrap_or_else(|_| a.cont.clone()),
                    },
                    None => b.clone(),
                };
                out.insert(op.clone(), joined);
            }
            LocalType::Send { to: to.clone(), branches: out }
        }
        _ => merge_local(&t, &e).unwrap_or(t),
    }
}
