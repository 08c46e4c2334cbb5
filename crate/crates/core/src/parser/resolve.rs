//! Name resolution: classifies communication peers as local processes or
//! external roles, binds sessions and callees, and enforces the syntactic
//! well-formedness rules of statements.

use std::collections::{BTreeMap, BTreeSet};

use super::RawModule;
use crate::ast::*;
use crate::diagnostics::{Code, Diagnostic};

pub(crate) fn resolve(raw: RawModule, diags: &mut Vec<Diagnostic>) -> Module {
    let mut module = Module::default();
    for (name, g) in raw.protocols {
        if let Some((prev, _)) = module.protocols.get_key_value(&name) {
            diags.push(Diagnostic::error(
                Code::DuplicateName,
                name.span(),
                format!("protocol `{name}` is already defined at line {}", prev.span().line),
            ));
            continue;
        }
        module.protocols.insert(name, g);
    }

    // Signatures first so calls can refer to procedures defined later.
    let mut signatures: BTreeMap<ProcName, (usize, Vec<SessionId>)> = BTreeMap::new();
    let mut procedures = Vec::new();
    for proc in raw.procedures {
        if let Some((prev, _)) = signatures.get_key_value(&proc.name) {
            diags.push(Diagnostic::error(
                Code::DuplicateName,
                proc.name.span(),
                format!("procedure `{}` is already defined at line {}", proc.name, prev.span().line),
            ));
            continue;
        }
        let sessions = proc.sessions.iter().map(|s| s.name.clone()).collect();
        signatures.insert(proc.name.clone(), (proc.processes.len(), sessions));
        procedures.push(proc);
    }

    for mut proc in procedures {
        let mut scope = Scope::new(&proc, &module, diags);
        let body = std::mem::take(&mut proc.body);
        proc.body = scope.choreography(body, &signatures);
        proc.sessions = scope.sessions;
        module.procedures.insert(proc.name.clone(), proc);
    }
    module.infer_entry();
    module
}

struct Scope<'d> {
    processes: BTreeSet<String>,
    externals: BTreeSet<String>,
    sessions: Vec<SessionDecl>,
    diags: &'d mut Vec<Diagnostic>,
}

impl<'d> Scope<'d> {
    fn new(proc: &Procedure, module: &Module, diags: &'d mut Vec<Diagnostic>) -> Self {
        let mut processes = BTreeSet::new();
        for p in &proc.processes {
            if !processes.insert(p.as_str().to_string()) {
                diags.push(Diagnostic::error(
                    Code::DuplicateName,
                    p.span(),
                    format!("process parameter `{p}` is declared twice"),
                ));
            }
        }
        let mut externals = BTreeSet::new();
        let mut sessions: Vec<SessionDecl> = Vec::new();
        for decl in &proc.sessions {
            if sessions.iter().any(|s| s.name == decl.name) {
                diags.push(Diagnostic::error(
                    Code::DuplicateName,
                    decl.name.span(),
                    format!("session `{}` is declared twice", decl.name),
                ));
                continue;
            }
            if module.protocol(decl.protocol.as_str()).is_none() {
                diags.push(Diagnostic::error(
                    Code::Unbound,
                    decl.protocol.span(),
                    format!("unknown protocol `{}`", decl.protocol),
                ));
            }
            let mut decl = decl.clone();
            for binding in &mut decl.roles {
                let name = binding.participant.name().to_string();
                if !processes.contains(&name) {
                    let span = binding.participant.span();
                    binding.participant = Peer::Role(RoleId::with_span(name.clone(), span));
                    externals.insert(name);
                }
            }
            sessions.push(decl);
        }
        Scope { processes, externals, sessions, diags }
    }

    fn err(&mut self, code: Code, span: Span, msg: String) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn peer(&mut self, peer: Peer) -> Option<Peer> {
        let name = peer.name();
        if self.processes.contains(name) {
            Some(peer)
        } else if self.externals.contains(name) {
            Some(Peer::Role(RoleId::with_span(name, peer.span())))
        } else {
            self.err(Code::Unbound, peer.span(), format!("unbound process or role `{name}`"));
            None
        }
    }

    fn process(&mut self, p: &ProcessId, what: &str) -> bool {
        if self.processes.contains(p.as_str()) {
            return true;
        }
        let msg = if self.externals.contains(p.as_str()) {
            format!("{what} `{p}` is an external role, not a local process")
        } else {
            format!("unbound process `{p}`")
        };
        self.err(Code::Unbound, p.span(), msg);
        false
    }

    fn session(&mut self, k: &SessionId) -> bool {
        if self.sessions.iter().any(|s| &s.name == k) {
            return true;
        }
        self.err(Code::Unbound, k.span(), format!("unbound session `{k}`"));
        false
    }

    /// Resolves both ends of a communication; `None` if either is invalid.
    fn endpoints(&mut self, from: Peer, to: Peer, span: Span) -> Option<(Peer, Peer)> {
        let from = self.peer(from);
        let to = self.peer(to);
        let (from, to) = (from?, to?);
        if from.name() == to.name() {
            self.err(Code::Unbound, to.span(), format!("sender and receiver are both `{}`", from.name()));
            return None;
        }
        if from.is_external() && to.is_external() {
            self.err(Code::Unbound, span, format!("communication between two external roles `{from}` and `{to}`"));
            return None;
        }
        Some((from, to))
    }

    fn choreography(&mut self, chor: Choreography, sigs: &BTreeMap<ProcName, (usize, Vec<SessionId>)>) -> Choreography {
        let stmts = chor.stmts.into_iter().map(|s| self.statement(s, sigs)).collect();
        Choreography::new(stmts)
    }

    fn statement(&mut self, stmt: Stmt, sigs: &BTreeMap<ProcName, (usize, Vec<SessionId>)>) -> Stmt {
        let span = stmt.span;
        let kind = match stmt.kind {
            StmtKind::ValueComm(mut c) => {
                self.session(&c.session);
                if let Some((from, to)) = self.endpoints(c.from.clone(), c.to.clone(), span) {
                    match (&from, &c.expr) {
                        (Peer::Role(r), Some(e)) => self.err(
                            Code::Unbound,
                            e.span,
                            format!("external role `{r}` cannot evaluate an expression here"),
                        ),
                        (Peer::Process(p), None) => {
                            self.err(Code::Unbound, p.span(), format!("process `{p}` must send a value (`{p}.expr`)"))
                        }
                        _ => {}
                    }
                    match (&to, &c.var) {
                        (Peer::Role(r), Some(v)) => self.err(
                            Code::Unbound,
                            v.span(),
                            format!("external role `{r}` has no local variable `{v}`"),
                        ),
                        (Peer::Process(p), None) => self.err(
                            Code::Unbound,
                            p.span(),
                            format!("process `{p}` must bind the received value (`{p}.var`)"),
                        ),
                        _ => {}
                    }
                    c.from = from;
                    c.to = to;
                }
                StmtKind::ValueComm(c)
            }
            StmtKind::Selection(mut s) => {
                self.session(&s.session);
                if let Some((from, to)) = self.endpoints(s.from.clone(), s.to.clone(), span) {
                    s.from = from;
                    s.to = to;
                }
                StmtKind::Selection(s)
            }
            StmtKind::Cond(mut c) => {
                self.process(&c.at, "deciding process");
                c.then_branch = self.choreography(c.then_branch, sigs);
                c.else_branch = self.choreography(c.else_branch, sigs);
                StmtKind::Cond(c)
            }
            StmtKind::Assign(a) => {
                self.process(&a.at, "assignment target");
                StmtKind::Assign(a)
            }
            StmtKind::Call(mut call) => {
                for p in &call.processes {
                    self.process(p, "argument");
                }
                let mut seen = BTreeSet::new();
                for p in &call.processes {
                    if !seen.insert(p.as_str()) {
                        self.err(
                            Code::Unbound,
                            p.span(),
                            format!("process `{p}` is passed twice to `{}`", call.proc_name),
                        );
                    }
                }
                match sigs.get(&call.proc_name) {
                    None => self.err(
                        Code::Unbound,
                        call.proc_name.span(),
                        format!("unknown procedure `{}`", call.proc_name),
                    ),
                    Some((arity, sessions)) => {
                        if *arity != call.processes.len() {
                            self.err(
                                Code::Unbound,
                                call.proc_name.span(),
                                format!(
                                    "`{}` takes {arity} process argument(s), {} given",
                                    call.proc_name,
                                    call.processes.len()
                                ),
                            );
                        }
                        for k in sessions {
                            if !self.sessions.iter().any(|s| &s.name == k) {
                                self.err(
                                    Code::Unbound,
                                    call.proc_name.span(),
                                    format!("`{}` uses session `{k}`, which is not in scope here", call.proc_name),
                                );
                            }
                        }
                        call.sessions = sessions.clone();
                    }
                }
                StmtKind::Call(call)
            }
        };
        Stmt { kind, span }
    }
}
