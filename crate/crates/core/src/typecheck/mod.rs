//! Protocol conformance: projects protocols onto roles and checks that every
//! procedure drives each of its sessions through its declared protocol, with
//! well-typed payloads and informed branching.

mod global;
mod infer;

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::diagnostics::{sort_diagnostics, Code, Diagnostic};
use crate::epp::{self, EppError, Live};
use crate::eval::Builtins;

pub use global::{merge_local, project_global, ProjectionError};
pub use infer::infer_local_behaviour;

use global::{consume, ConsumeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinSig {
    pub name: BuiltinName,
    pub params: Vec<PayloadType>,
    pub ret: PayloadType,
}

impl BuiltinSig {
    pub fn new(name: &str, params: Vec<PayloadType>, ret: PayloadType) -> Self {
        BuiltinSig { name: BuiltinName::new(name), params, ret }
    }

    /// `blocks: (string) -> string`.
    pub fn defaults() -> Vec<BuiltinSig> {
        Self::of(&Builtins::default())
    }

    pub fn of(builtins: &Builtins) -> Vec<BuiltinSig> {
        builtins
            .iter()
            .map(|d| BuiltinSig {
                name: d.name.clone(),
                params: d.params.iter().map(|(_, t)| *t).collect(),
                ret: d.ret,
            })
            .collect()
    }
}

/// Variables each process reads before any statement binds them. Their
/// values must come from the initial store. `None` means the type could not
/// be determined from the context of the first read.
pub type Inputs = BTreeMap<ProcessId, BTreeMap<VarName, Option<PayloadType>>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModuleTyping {
    pub inputs: BTreeMap<ProcName, Inputs>,
}

impl ModuleTyping {
    pub fn inputs_of(&self, proc: &str) -> Option<&Inputs> {
        self.inputs.get(proc)
    }
}

/// Checks every procedure of `m`. Diagnostics are returned in source order.
pub fn check_module(m: &Module, builtins: &[BuiltinSig]) -> Result<ModuleTyping, Vec<Diagnostic>> {
    let mut checker = Checker {
        module: m,
        builtins: builtins.iter().map(|b| (b.name.as_str(), b)).collect(),
        done: BTreeMap::new(),
        in_progress: BTreeSet::new(),
        called: called_procedures(m),
    };
    let mut diags = checker.declarations();
    for name in m.procedures.keys() {
        checker.procedure(name);
    }
    let mut typing = ModuleTyping::default();
    for (name, result) in checker.done {
        diags.extend(result.diags);
        typing.inputs.insert(name, result.summary.inputs);
    }
    if diags.is_empty() {
        Ok(typing)
    } else {
        sort_diagnostics(&mut diags);
        Err(diags)
    }
}

fn called_procedures(m: &Module) -> BTreeSet<ProcName> {
    fn walk(stmts: &[Stmt], out: &mut BTreeSet<ProcName>) {
        for s in stmts {
            match &s.kind {
                StmtKind::Call(c) => {
                    out.insert(c.proc_name.clone());
                }
                StmtKind::Cond(c) => {
                    walk(&c.then_branch.stmts, out);
                    walk(&c.else_branch.stmts, out);
                }
                _ => {}
            }
        }
    }
    let mut out = BTreeSet::new();
    for p in m.procedures.values() {
        walk(&p.body.stmts, &mut out);
    }
    out
}

/// What a call to a procedure does to the stores of its arguments.
#[derive(Debug, Clone, Default)]
struct Summary {
    inputs: Inputs,
    writes: BTreeMap<ProcessId, BTreeMap<VarName, Var>>,
}

struct Checked {
    summary: Summary,
    diags: Vec<Diagnostic>,
}

/// Static knowledge about a variable at one program point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Bound(Option<PayloadType>),
    /// Bound on some paths only; elsewhere it keeps its initial value.
    Maybe(Option<PayloadType>),
    /// Bound with different types on different paths.
    Conflict(PayloadType, PayloadType),
}

fn join_var(a: Option<Var>, b: Option<Var>) -> Var {
    use Var::*;
    let ty = |v: Var| match v {
        Bound(t) | Maybe(t) => Ok(t),
        Conflict(x, y) => Err((x, y)),
    };
    match (a, b) {
        (Some(x), Some(y)) => match (ty(x), ty(y)) {
            (Err((p, q)), _) | (_, Err((p, q))) => Conflict(p, q),
            (Ok(Some(p)), Ok(Some(q))) if p != q => Conflict(p, q),
            (Ok(p), Ok(q)) => {
                let t = p.or(q);
                if matches!(x, Maybe(_)) || matches!(y, Maybe(_)) {
                    Maybe(t)
                } else {
                    Bound(t)
                }
            }
        },
        (Some(x), None) | (None, Some(x)) => match ty(x) {
            Ok(t) => Maybe(t),
            Err((p, q)) => Conflict(p, q),
        },
        (None, None) => unreachable!("joined variables are bound on at least one side"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Logged {
    Interaction { from: RoleId, to: RoleId, op: OpName },
    Call(ProcName),
}

impl Logged {
    fn involves(&self, r: &RoleId) -> bool {
        match self {
            Logged::Interaction { from, to, .. } => from == r || to == r,
            Logged::Call(_) => true,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Flow {
    residual: BTreeMap<SessionId, GlobalType>,
    log: BTreeMap<SessionId, Vec<Logged>>,
    vars: BTreeMap<ProcessId, BTreeMap<VarName, Var>>,
    /// Sessions whose branches already disagreed; not reported again at the end.
    diverged: BTreeSet<SessionId>,
}

struct Checker<'a> {
    module: &'a Module,
    builtins: BTreeMap<&'a str, &'a BuiltinSig>,
    done: BTreeMap<ProcName, Checked>,
    in_progress: BTreeSet<ProcName>,
    called: BTreeSet<ProcName>,
}

/// Per-procedure checking state.
struct Cx<'a> {
    proc: &'a Procedure,
    inputs: Inputs,
    diags: Vec<Diagnostic>,
}

impl Cx<'_> {
    fn err(&mut self, code: Code, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }
}

fn describe_next(g: &GlobalType) -> String {
    match g {
        GlobalType::End => "nothing".into(),
        GlobalType::Interaction { from, to, branches } => {
            let labels: Vec<_> = branches.keys().map(|l| l.as_str()).collect();
            if labels.len() == 1 {
                format!("`{from} -> {to}: {}`", labels[0])
            } else {
                format!("`{from} -> {to}: {{{}}}`", labels.join(", "))
            }
        }
    }
}

impl<'a> Checker<'a> {
    /// Module-level checks: protocol projectability and role assignments.
    fn declarations(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for (name, g) in &self.module.protocols {
            for r in g.roles() {
                if let Err(e) = project_global(g, &r) {
                    diags.push(Diagnostic::error(
                        Code::UnprojectableProtocol,
                        name.span(),
                        format!("protocol `{name}`: {e}"),
                    ));
                }
            }
        }
        for proc in self.module.procedures.values() {
            for decl in &proc.sessions {
                let Some(g) = self.module.protocol(decl.protocol.as_str()) else { continue };
                let roles = g.roles();
                let mut seen_roles = BTreeSet::new();
                let mut seen_peers = BTreeSet::new();
                for b in &decl.roles {
                    let msg = if !roles.contains(&b.role) {
                        format!("protocol `{}` has no role `{}`", decl.protocol, b.role)
                    } else if !seen_roles.insert(b.role.clone()) {
                        format!("role `{}` is assigned twice in session `{}`", b.role, decl.name)
                    } else if !seen_peers.insert(b.participant.clone()) {
                        format!("`{}` plays two roles in session `{}`", b.participant, decl.name)
                    } else {
                        continue;
                    };
                    diags.push(Diagnostic::error(Code::RoleMismatch, b.role.span(), msg));
                }
                for r in roles.difference(&seen_roles) {
                    diags.push(Diagnostic::error(
                        Code::RoleMismatch,
                        decl.name.span(),
                        format!("session `{}` assigns nobody to role `{r}` of `{}`", decl.name, decl.protocol),
                    ));
                }
            }
        }
        diags
    }

    fn procedure(&mut self, name: &ProcName) {
        if self.done.contains_key(name) || self.in_progress.contains(name) {
            return;
        }
        let Some(proc) = self.module.procedure(name.as_str()) else { return };
        self.in_progress.insert(name.clone());
        let mut cx = Cx { proc, inputs: Inputs::new(), diags: Vec::new() };
        let mut flow = Flow::default();
        for decl in &proc.sessions {
            if let Some(g) = self.module.protocol(decl.protocol.as_str()) {
                flow.residual.insert(decl.name.clone(), g.clone());
                flow.log.insert(decl.name.clone(), Vec::new());
            }
        }
        self.block(&mut cx, &mut flow, &proc.body.stmts);
        for decl in &proc.sessions {
            if let Some(g) = flow.residual.get(&decl.name) {
                if *g != GlobalType::End && !flow.diverged.contains(&decl.name) {
                    cx.err(
                        Code::ProtocolNotConsumed,
                        decl.name.span(),
                        format!(
                            "session `{}` does not complete protocol `{}`: {} is still expected",
                            decl.name,
                            decl.protocol,
                            describe_next(g)
                        ),
                    );
                }
            }
        }
        if cx.diags.is_empty() {
            self.projection_check(&mut cx);
        }
        let summary = Summary { inputs: cx.inputs, writes: flow.vars };
        self.in_progress.remove(name);
        self.done.insert(name.clone(), Checked { summary, diags: cx.diags });
    }

    /// Endpoint projection must succeed for every process; a merge failure
    /// means some process cannot learn which branch was taken.
    fn projection_check(&self, cx: &mut Cx) {
        let tail = if self.called.contains(&cx.proc.name) { Live::All } else { Live::none() };
        for p in &cx.proc.processes {
            if let Err(EppError::Merge { process, span, source }) = epp::project_process(self.module, cx.proc, p, &tail)
            {
                cx.err(
                    Code::KnowledgeOfChoice,
                    span,
                    format!("`{process}` cannot tell which branch was taken: {source}"),
                );
            }
        }
    }

    fn block(&mut self, cx: &mut Cx, flow: &mut Flow, stmts: &[Stmt]) {
        for s in stmts {
            self.statement(cx, flow, s);
        }
    }

    fn statement(&mut self, cx: &mut Cx, flow: &mut Flow, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::ValueComm(c) => {
                let payload = self.interaction(cx, flow, stmt, &c.from, &c.to, &c.op, &c.session);
                let sent = match (&c.from, &c.expr) {
                    (Peer::Process(p), Some(e)) => {
                        let t = self.expr(cx, flow, p, e, payload);
                        if let (Some(want), Some(got)) = (payload, t) {
                            if want != got {
                                cx.err(
                                    Code::PayloadMismatch,
                                    e.span,
                                    format!("`{}` carries {want} in protocol, but `{p}` sends {got}", c.op),
                                );
                            }
                        }
                        t
                    }
                    _ => None,
                };
                if let (Peer::Process(q), Some(x)) = (&c.to, &c.var) {
                    flow.vars.entry(q.clone()).or_default().insert(x.clone(), Var::Bound(payload.or(sent)));
                }
            }
            StmtKind::Selection(s) => {
                let payload = self.interaction(cx, flow, stmt, &s.from, &s.to, &s.op, &s.session);
                if let Some(t) = payload.filter(|t| *t != PayloadType::Void) {
                    cx.err(
                        Code::PayloadMismatch,
                        s.op.span(),
                        format!("`{}` carries {t} in protocol, but this message sends no value", s.op),
                    );
                }
            }
            StmtKind::Assign(a) => {
                let t = self.expr(cx, flow, &a.at, &a.expr, None);
                flow.vars.entry(a.at.clone()).or_default().insert(a.var.clone(), Var::Bound(t));
            }
            StmtKind::Cond(c) => self.conditional(cx, flow, stmt, c),
            StmtKind::Call(call) => self.call(cx, flow, stmt, call),
        }
    }

    /// Consumes one interaction from a session's residual protocol and
    /// returns its payload type.
    #[allow(clippy::too_many_arguments)]
    fn interaction(
        &mut self,
        cx: &mut Cx,
        flow: &mut Flow,
        stmt: &Stmt,
        from: &Peer,
        to: &Peer,
        op: &OpName,
        k: &SessionId,
    ) -> Option<PayloadType> {
        let decl = cx.proc.session(k.as_str())?;
        let residual = flow.residual.get(k)?;
        let role = |peer: &Peer| decl.role_of(peer).cloned();
        let (Some(rf), Some(rt)) = (role(from), role(to)) else {
            let missing = if role(from).is_none() { from } else { to };
            cx.err(Code::RoleMismatch, missing.span(), format!("`{missing}` plays no role in session `{k}`"));
            return None;
        };
        match consume(residual, &rf, &rt, op) {
            Ok((rest, ty)) => {
                flow.residual.insert(k.clone(), rest);
                flow.log.entry(k.clone()).or_default().push(Logged::Interaction { from: rf, to: rt, op: op.clone() });
                Some(ty)
            }
            Err(ConsumeError::Exhausted) => {
                cx.err(
                    Code::UnknownLabel,
                    op.span(),
                    format!("protocol `{}` of session `{k}` has no further `{rf} -> {rt}` interaction", decl.protocol),
                );
                None
            }
            Err(ConsumeError::UnknownLabel { labels, recovered }) => {
                if let Some(rest) = recovered {
                    flow.residual.insert(k.clone(), *rest);
                }
                let labels: Vec<_> = labels.iter().map(|l| format!("`{l}`")).collect();
                cx.err(
                    Code::UnknownLabel,
                    op.span(),
                    format!(
                        "`{op}` is not offered here by `{rf} -> {rt}` in session `{k}`; expected {}",
                        labels.join(" or ")
                    ),
                );
                None
            }
            Err(ConsumeError::Blocked { .. }) => {
                cx.err(
                    Code::RoleMismatch,
                    stmt.span,
                    format!("session `{k}` expects {} before `{rf} -> {rt}: {op}`", describe_next(residual)),
                );
                None
            }
            Err(ConsumeError::Ambiguous) => {
                cx.err(
                    Code::PayloadMismatch,
                    op.span(),
                    format!(
                        "`{rf} -> {rt}: {op}` carries different payload types in different branches of session `{k}`"
                    ),
                );
                None
            }
        }
    }

    fn conditional(&mut self, cx: &mut Cx, flow: &mut Flow, stmt: &Stmt, c: &Cond) {
        if let Some(t) = self.expr(cx, flow, &c.at, &c.guard, Some(PayloadType::Bool)) {
            if t != PayloadType::Bool {
                cx.err(Code::GuardNotBool, c.guard.span, format!("condition has type {t}, expected bool"));
            }
        }
        let before: BTreeMap<SessionId, usize> = flow.log.iter().map(|(k, l)| (k.clone(), l.len())).collect();
        let mut then_flow = flow.clone();
        let mut else_flow = flow.clone();
        self.block(cx, &mut then_flow, &c.then_branch.stmts);
        self.block(cx, &mut else_flow, &c.else_branch.stmts);

        let proc = cx.proc;
        for decl in &proc.sessions {
            let k = &decl.name;
            let (Some(rt), Some(re)) = (then_flow.residual.get(k), else_flow.residual.get(k)) else {
                continue;
            };
            if rt != re {
                cx.err(
                    Code::ProtocolNotConsumed,
                    stmt.span,
                    format!(
                        "the branches leave session `{k}` at different points: {} is next after `then`, {} after `else`",
                        describe_next(rt),
                        describe_next(re)
                    ),
                );
                then_flow.diverged.insert(k.clone());
                continue;
            }
            let start = before.get(k).copied().unwrap_or(0);
            let lt = &then_flow.log[k][start..];
            let le = &else_flow.log[k][start..];
            let roles = self.module.protocol(decl.protocol.as_str()).map(GlobalType::roles).unwrap_or_default();
            let differs =
                roles.iter().any(|r| lt.iter().filter(|e| e.involves(r)).ne(le.iter().filter(|e| e.involves(r))));
            if !differs {
                continue;
            }
            let decider = decl.role_of(&Peer::Process(c.at.clone()));
            let informed = match (decider, lt.first(), le.first()) {
                (
                    Some(d),
                    Some(Logged::Interaction { from: f1, op: o1, .. }),
                    Some(Logged::Interaction { from: f2, op: o2, .. }),
                ) => f1 == d && f2 == d && o1 != o2,
                _ => false,
            };
            if !informed {
                let who = match decider {
                    Some(d) => format!("role `{d}` played by `{}`", c.at),
                    None => format!("`{}`, which plays no role in it", c.at),
                };
                cx.err(
                    Code::KnowledgeOfChoice,
                    stmt.span,
                    format!(
                        "session `{k}` proceeds differently in each branch, so both branches must start it with differently labelled messages from {who}"
                    ),
                );
            }
        }

        flow.residual = then_flow.residual;
        flow.log = then_flow.log;
        flow.diverged = then_flow.diverged.union(&else_flow.diverged).cloned().collect();
        let procs: BTreeSet<ProcessId> = then_flow.vars.keys().chain(else_flow.vars.keys()).cloned().collect();
        flow.vars.clear();
        for p in procs {
            let a = then_flow.vars.remove(&p).unwrap_or_default();
            let b = else_flow.vars.remove(&p).unwrap_or_default();
            let names: BTreeSet<&VarName> = a.keys().chain(b.keys()).collect();
            let joined =
                names.into_iter().map(|v| (v.clone(), join_var(a.get(v).copied(), b.get(v).copied()))).collect();
            flow.vars.insert(p, joined);
        }
    }

    fn call(&mut self, cx: &mut Cx, flow: &mut Flow, stmt: &Stmt, call: &Call) {
        let Some(callee) = self.module.procedure(call.proc_name.as_str()) else { return };
        if callee.processes.len() != call.processes.len() {
            return;
        }
        let actual: BTreeMap<&ProcessId, &ProcessId> = callee.processes.iter().zip(&call.processes).collect();

        for k in &call.sessions {
            let (Some(mine), Some(theirs)) = (cx.proc.session(k.as_str()), callee.session(k.as_str())) else {
                continue;
            };
            if mine.protocol != theirs.protocol {
                cx.err(
                    Code::CallMismatch,
                    call.proc_name.span(),
                    format!(
                        "`{}` expects session `{k}` to follow `{}`, but here it follows `{}`",
                        call.proc_name, theirs.protocol, mine.protocol
                    ),
                );
                continue;
            }
            let fresh = self.module.protocol(mine.protocol.as_str());
            if let (Some(fresh), Some(now)) = (fresh, flow.residual.get(k)) {
                if now != fresh {
                    cx.err(
                        Code::CallMismatch,
                        call.proc_name.span(),
                        format!(
                            "`{}` runs session `{k}` from its start, but {} is next here",
                            call.proc_name,
                            describe_next(now)
                        ),
                    );
                }
            }
            for b in &theirs.roles {
                let expected = match &b.participant {
                    Peer::Process(x) => actual.get(x).map(|p| Peer::Process((*p).clone())),
                    Peer::Role(r) => Some(Peer::Role(r.clone())),
                };
                let here = mine.participant_of(&b.role);
                if expected.is_none() || here != expected.as_ref() {
                    let here = here.map(|p| format!("`{p}`")).unwrap_or_else(|| "nobody".into());
                    cx.err(
                        Code::CallMismatch,
                        call.proc_name.span(),
                        format!(
                            "role `{}` of session `{k}` is played by {here} here, but by `{}` in `{}`",
                            b.role, b.participant, call.proc_name
                        ),
                    );
                }
            }
            flow.residual.insert(k.clone(), GlobalType::End);
            flow.log.entry(k.clone()).or_default().push(Logged::Call(call.proc_name.clone()));
        }

        self.procedure(&call.proc_name);
        let Some(summary) = self.done.get(&call.proc_name).map(|c| c.summary.clone()) else {
            return;
        };
        for (formal, p) in &actual {
            for (v, want) in summary.inputs.get(*formal).into_iter().flatten() {
                let got = self.read(cx, flow, p, v, *want, stmt.span);
                if let (Some(want), Some(got)) = (want, got) {
                    if *want != got {
                        cx.err(
                            Code::PayloadMismatch,
                            call.proc_name.span(),
                            format!("`{}` reads `{v}` at `{p}` as {want}, but it holds {got} here", call.proc_name),
                        );
                    }
                }
            }
            for (v, state) in summary.writes.get(*formal).into_iter().flatten() {
                let vars = flow.vars.entry((*p).clone()).or_default();
                let merged = match state {
                    Var::Maybe(_) => join_var(vars.get(v).copied(), Some(*state)),
                    _ => *state,
                };
                vars.insert(v.clone(), merged);
            }
        }
    }

    fn read(
        &mut self,
        cx: &mut Cx,
        flow: &mut Flow,
        p: &ProcessId,
        v: &VarName,
        expected: Option<PayloadType>,
        span: Span,
    ) -> Option<PayloadType> {
        let vars = flow.vars.entry(p.clone()).or_default();
        let (ty, input) = match vars.get(v) {
            Some(Var::Bound(None)) if expected.is_some() => {
                // An input first read without context takes the first known type.
                if let Some(slot) = cx.inputs.get_mut(p).and_then(|m| m.get_mut(v)) {
                    if slot.is_none() {
                        *slot = expected;
                        vars.insert(v.clone(), Var::Bound(expected));
                        return expected;
                    }
                }
                return None;
            }
            Some(Var::Bound(t)) => return *t,
            Some(Var::Maybe(t)) => (t.or(expected), true),
            Some(Var::Conflict(a, b)) => {
                cx.err(
                    Code::PayloadMismatch,
                    span,
                    format!("`{v}` at `{p}` holds {a} or {b} depending on the branch taken"),
                );
                return None;
            }
            None => (expected, true),
        };
        if input {
            let entry = cx.inputs.entry(p.clone()).or_default().entry(v.clone()).or_insert(ty);
            if entry.is_none() {
                *entry = ty;
            }
        }
        vars.insert(v.clone(), Var::Bound(ty));
        ty
    }

    fn expr(
        &mut self,
        cx: &mut Cx,
        flow: &mut Flow,
        p: &ProcessId,
        e: &Expr,
        expected: Option<PayloadType>,
    ) -> Option<PayloadType> {
        use PayloadType as T;
        match &e.kind {
            ExprKind::Lit(v) => Some(v.payload_type()),
            ExprKind::Var(v) => self.read(cx, flow, p, v, expected, e.span),
            ExprKind::Unary(UnOp::Not, inner) => self.operand(cx, flow, p, inner, T::Bool, "!").then_some(T::Bool),
            ExprKind::Binary(op, l, r) => match op {
                BinOp::Eq | BinOp::Ne => {
                    let lt = self.expr(cx, flow, p, l, None);
                    let rt = self.expr(cx, flow, p, r, lt);
                    if let (Some(a), Some(b)) = (lt, rt) {
                        if a != b {
                            cx.err(Code::PayloadMismatch, e.span, format!("`{}` compares {a} with {b}", op.symbol()));
                        }
                    }
                    Some(T::Bool)
                }
                _ => {
                    let (arg, ret) = match op {
                        BinOp::Lt | BinOp::Le => (T::Int, T::Bool),
                        BinOp::Add => (T::Int, T::Int),
                        BinOp::Concat => (T::String, T::String),
                        _ => (T::Bool, T::Bool),
                    };
                    let ok = self.operand(cx, flow, p, l, arg, op.symbol());
                    let ok = self.operand(cx, flow, p, r, arg, op.symbol()) && ok;
                    ok.then_some(ret)
                }
            },
            ExprKind::Call(name, args) => {
                let Some(sig) = self.builtins.get(name.as_str()).copied() else {
                    cx.err(Code::UnboundVariable, e.span, format!("unknown builtin `{name}`"));
                    for a in args {
                        self.expr(cx, flow, p, a, None);
                    }
                    return None;
                };
                if sig.params.len() != args.len() {
                    cx.err(
                        Code::PayloadMismatch,
                        e.span,
                        format!("`{name}` takes {} argument(s), {} given", sig.params.len(), args.len()),
                    );
                }
                for (i, a) in args.iter().enumerate() {
                    match sig.params.get(i) {
                        Some(t) => {
                            self.operand(cx, flow, p, a, *t, name.as_str());
                        }
                        None => {
                            self.expr(cx, flow, p, a, None);
                        }
                    }
                }
                Some(sig.ret)
            }
        }
    }

    /// Types an operand against `want`; false if it is known to mismatch.
    fn operand(
        &mut self,
        cx: &mut Cx,
        flow: &mut Flow,
        p: &ProcessId,
        e: &Expr,
        want: PayloadType,
        what: &str,
    ) -> bool {
        match self.expr(cx, flow, p, e, Some(want)) {
            Some(got) if got != want => {
                cx.err(Code::PayloadMismatch, e.span, format!("`{what}` expects {want}, found {got}"));
                false
            }
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests;
