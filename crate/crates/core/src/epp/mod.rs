//! Endpoint projection: compiles a procedure into one program per process,
//! and links separately projected systems through their external roles.

mod emit;
mod link;
mod merge;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::ast::*;

pub use emit::{emit_program, emit_system};
pub use link::{link, LinkError};
pub use merge::{merge, merge_live, Live, MergeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionInfo {
    pub protocol: ProtocolName,
    pub global: GlobalType,
    /// Who plays each protocol role: a local process or an external reference.
    pub roles: BTreeMap<RoleId, Peer>,
}

impl SessionInfo {
    pub fn process_of(&self, role: &RoleId) -> Option<&ProcessId> {
        self.roles.get(role).and_then(Peer::as_process)
    }

    pub fn role_of_process(&self, p: &ProcessId) -> Option<&RoleId> {
        self.roles.iter().find(|(_, peer)| peer.as_process() == Some(p)).map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProjectedSystem {
    pub endpoints: BTreeMap<ProcessId, EndpointProgram>,
    /// Projections of called procedures, keyed by procedure and formal process.
    pub procedures: BTreeMap<(ProcName, ProcessId), EndpointProgram>,
    pub sessions: BTreeMap<SessionId, SessionInfo>,
    /// Roles not played by any process of this system.
    pub externals: BTreeSet<(SessionId, RoleId)>,
}

impl ProjectedSystem {
    pub fn is_closed(&self) -> bool {
        self.externals.is_empty()
    }

    /// Resolves a role of a session to the process playing it.
    pub fn resolve(&self, session: &SessionId, role: &RoleId) -> Option<&ProcessId> {
        self.sessions.get(session)?.process_of(role)
    }

    pub(crate) fn recompute_externals(&mut self) {
        self.externals = self
            .sessions
            .iter()
            .flat_map(|(k, info)| {
                info.roles.iter().filter(|(_, p)| p.is_external()).map(move |(r, _)| (k.clone(), r.clone()))
            })
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EppError {
    #[error("procedure `{0}` is not defined")]
    UnknownProcedure(String),
    #[error("procedure `{proc_name}` uses undeclared protocol or session `{name}`")]
    UnknownSession { proc_name: String, name: String },
    #[error("`{peer}` plays no role in session `{session}`")]
    NoRole { peer: String, session: String },
    #[error("cannot project the conditional at line {} for `{process}`: {source}", .span.line)]
    Merge {
        process: ProcessId,
        span: Span,
        #[source]
        source: MergeError,
    },
}

/// Projects `entry` and every procedure it reaches.
pub fn project(m: &Module, entry: &str) -> Result<ProjectedSystem, EppError> {
    let proc = m.procedure(entry).ok_or_else(|| EppError::UnknownProcedure(entry.into()))?;
    let mut sys = ProjectedSystem::default();
    for decl in &proc.sessions {
        let global = m.protocol(decl.protocol.as_str()).ok_or_else(|| EppError::UnknownSession {
            proc_name: proc.name.to_string(),
            name: decl.protocol.to_string(),
        })?;
        let roles = decl.roles.iter().map(|b| (b.role.clone(), b.participant.clone())).collect();
        sys.sessions
            .insert(decl.name.clone(), SessionInfo { protocol: decl.protocol.clone(), global: global.clone(), roles });
    }
    sys.recompute_externals();

    let mut pending = VecDeque::new();
    for p in &proc.processes {
        let mut cx = Projector { module: m, proc, process: p, pending: &mut pending };
        let prog = cx.block(&proc.body.stmts, EndpointProgram::End, &Live::none())?;
        sys.endpoints.insert(p.clone(), prog);
    }
    while let Some((name, formal)) = pending.pop_front() {
        if sys.procedures.contains_key(&(name.clone(), formal.clone())) {
            continue;
        }
        let callee: &Procedure =
            m.procedure(name.as_str()).ok_or_else(|| EppError::UnknownProcedure(name.to_string()))?;
        let mut cx = Projector { module: m, proc: callee, process: &formal, pending: &mut pending };
        let prog = cx.block(&callee.body.stmts, EndpointProgram::End, &Live::All)?;
        sys.procedures.insert((name, formal), prog);
    }
    Ok(sys)
}

/// Projects a single process of a procedure, without callee bodies. `tail`
/// describes what may run after the procedure: nothing for an entry point,
/// [`Live::All`] for a procedure that is called.
pub fn project_process(
    m: &Module,
    proc: &Procedure,
    process: &ProcessId,
    tail: &Live,
) -> Result<EndpointProgram, EppError> {
    let mut pending = VecDeque::new();
    let mut cx = Projector { module: m, proc, process, pending: &mut pending };
    cx.block(&proc.body.stmts, EndpointProgram::End, tail)
}

struct Projector<'a> {
    module: &'a Module,
    proc: &'a Procedure,
    process: &'a ProcessId,
    pending: &'a mut VecDeque<(ProcName, ProcessId)>,
}

impl Projector<'_> {
    fn is_me(&self, peer: &Peer) -> bool {
        peer.as_process() == Some(self.process)
    }

    fn role(&self, session: &SessionId, peer: &Peer) -> Result<RoleId, EppError> {
        let decl = self.proc.session(session.as_str()).ok_or_else(|| EppError::UnknownSession {
            proc_name: self.proc.name.to_string(),
            name: session.to_string(),
        })?;
        decl.role_of(peer)
            .cloned()
            .ok_or_else(|| EppError::NoRole { peer: peer.to_string(), session: session.to_string() })
    }

    /// Projects `stmts` followed by `cont`. `tail` over-approximates what
    /// runs after `cont` (unknown for callee bodies).
    fn block(&mut self, stmts: &[Stmt], mut cont: EndpointProgram, tail: &Live) -> Result<EndpointProgram, EppError> {
        for stmt in stmts.iter().rev() {
            cont = self.statement(stmt, cont, tail)?;
        }
        Ok(cont)
    }

    fn statement(&mut self, stmt: &Stmt, cont: EndpointProgram, tail: &Live) -> Result<EndpointProgram, EppError> {
        use EndpointProgram as E;
        Ok(match &stmt.kind {
            StmtKind::ValueComm(c) => {
                if self.is_me(&c.from) {
                    E::Send {
                        session: c.session.clone(),
                        to: self.role(&c.session, &c.to)?,
                        op: c.op.clone(),
                        expr: c.expr.clone(),
                        cont: Box::new(cont),
                    }
                } else if self.is_me(&c.to) {
                    recv_one(c.session.clone(), self.role(&c.session, &c.from)?, c.op.clone(), c.var.clone(), cont)
                } else {
                    cont
                }
            }
            StmtKind::Selection(s) => {
                if self.is_me(&s.from) {
                    E::Send {
                        session: s.session.clone(),
                        to: self.role(&s.session, &s.to)?,
                        op: s.op.clone(),
                        expr: None,
                        cont: Box::new(cont),
                    }
                } else if self.is_me(&s.to) {
                    recv_one(s.session.clone(), self.role(&s.session, &s.from)?, s.op.clone(), None, cont)
                } else {
                    cont
                }
            }
            StmtKind::Assign(a) if &a.at == self.process => {
                E::Assign { var: a.var.clone(), expr: a.expr.clone(), cont: Box::new(cont) }
            }
            StmtKind::Assign(_) => cont,
            StmtKind::Cond(c) if &c.at == self.process => E::Cond {
                guard: c.guard.clone(),
                then_branch: Box::new(self.block(&c.then_branch.stmts, cont.clone(), tail)?),
                else_branch: Box::new(self.block(&c.else_branch.stmts, cont, tail)?),
            },
            StmtKind::Cond(c) => {
                let live = tail.union(&Live::of(&cont));
                let a = self.block(&c.then_branch.stmts, E::End, &live)?;
                let b = self.block(&c.else_branch.stmts, E::End, &live)?;
                let merged = merge_live(&a, &b, &live).map_err(|source| EppError::Merge {
                    process: self.process.clone(),
                    span: stmt.span,
                    source,
                })?;
                merged.then(&cont)
            }
            StmtKind::Call(call) => {
                let Some(i) = call.processes.iter().position(|p| p == self.process) else {
                    return Ok(cont);
                };
                let callee = self
                    .module
                    .procedure(call.proc_name.as_str())
                    .ok_or_else(|| EppError::UnknownProcedure(call.proc_name.to_string()))?;
                let formal = callee.processes[i].clone();
                self.pending.push_back((call.proc_name.clone(), formal.clone()));
                E::Call {
                    proc_name: call.proc_name.clone(),
                    formal,
                    sessions: call.sessions.clone(),
                    cont: Box::new(cont),
                }
            }
        })
    }
}

fn recv_one(
    session: SessionId,
    from: RoleId,
    op: OpName,
    var: Option<VarName>,
    cont: EndpointProgram,
) -> EndpointProgram {
    let mut branches = BTreeMap::new();
    branches.insert(op, RecvBranch { var, cont });
    EndpointProgram::Recv { session, from, branches }
}

#[cfg(test)]
mod tests;
