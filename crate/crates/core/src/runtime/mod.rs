//! Executes projected systems over a simulated network, either with
//! synchronous rendezvous or with asynchronous FIFO channels, and compares
//! network behaviour with the choreography it came from.

mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::*;
use crate::epp::{project, EppError, ProjectedSystem};
use crate::eval::{eval, Builtins, EvalError, Store};
use crate::semantics::{enumerate_traces, ChorConfig, Event, Explore, SemanticsError, Trace};

pub use scenario::{parse_scenario, Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Sync,
    Async,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sync => "sync",
            Mode::Async => "async",
        })
    }
}

/// An endpoint that cannot move, with the action it waits on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Stuck {
    pub process: ProcessId,
    pub waiting: String,
}

impl fmt::Display for Stuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.process, self.waiting)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Terminated,
    Deadlock(Vec<Stuck>),
    BoundExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub trace: Trace,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("role `{role}` of session `{session}` is not played by any process")]
    Open { session: SessionId, role: RoleId },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("at `{process}`: {source}")]
    Eval {
        process: ProcessId,
        #[source]
        source: EvalError,
    },
    #[error("no projection of `{0}` for `{1}`")]
    MissingProcedure(ProcName, ProcessId),
    #[error("exploration exceeded {0} steps")]
    BoundExceeded(usize),
    #[error("deadlock after {} event(s)", .trace.len())]
    Deadlock { trace: Trace, stuck: Vec<Stuck> },
    #[error(transparent)]
    Projection(#[from] EppError),
    #[error(transparent)]
    Choreography(#[from] SemanticsError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Endpoint {
    /// Current program on top; below it, what remains after each active call.
    stack: Vec<EndpointProgram>,
    store: Store,
}

impl Endpoint {
    fn head(&self) -> &EndpointProgram {
        self.stack.last().unwrap_or(&EndpointProgram::End)
    }

    fn take_head(&mut self) -> EndpointProgram {
        match self.stack.last_mut() {
            Some(top) => std::mem::replace(top, EndpointProgram::End),
            None => EndpointProgram::End,
        }
    }

    fn set_head(&mut self, prog: EndpointProgram) {
        match self.stack.last_mut() {
            Some(top) => *top = prog,
            None => self.stack.push(prog),
        }
        while self.stack.len() > 1 && self.head().is_end() {
            self.stack.pop();
        }
    }

    fn is_done(&self) -> bool {
        self.stack.iter().all(EndpointProgram::is_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ActionKind {
    /// Assignment, conditional or call.
    Local,
    /// Synchronous communication led by the sender.
    Rendezvous,
    Send,
    Recv,
}

/// Enabled actions sort by process, then kind, which fixes the scheduler's
/// view of the choices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Action {
    process: ProcessId,
    kind: ActionKind,
}

type Channel = (SessionId, ProcessId, ProcessId);

#[derive(Debug, Clone)]
struct Network<'s> {
    sys: &'s ProjectedSystem,
    builtins: &'s Builtins,
    mode: Mode,
    endpoints: BTreeMap<ProcessId, Endpoint>,
    queues: BTreeMap<Channel, VecDeque<(OpName, Value)>>,
    trace: Trace,
    /// Each process's own communications, in the order it performed them.
    logs: BTreeMap<ProcessId, Vec<Event>>,
}

impl<'s> Network<'s> {
    fn new(sys: &'s ProjectedSystem, scenario: &'s Scenario, mode: Mode) -> Result<Self, RuntimeError> {
        if let Some((session, role)) = sys.externals.iter().next() {
            return Err(RuntimeError::Open { session: session.clone(), role: role.clone() });
        }
        let endpoints = sys
            .endpoints
            .iter()
            .map(|(p, prog)| {
                let store = scenario.stores.get(p).cloned().unwrap_or_default();
                (p.clone(), Endpoint { stack: vec![prog.clone()], store })
            })
            .collect();
        Ok(Network {
            sys,
            builtins: &scenario.builtins,
            mode,
            endpoints,
            queues: BTreeMap::new(),
            trace: Vec::new(),
            logs: BTreeMap::new(),
        })
    }

    fn resolve(&self, session: &SessionId, role: &RoleId) -> Option<&ProcessId> {
        self.sys.resolve(session, role)
    }

    fn role_of(&self, session: &SessionId, p: &ProcessId) -> Option<&RoleId> {
        self.sys.sessions.get(session)?.role_of_process(p)
    }

    fn enabled(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for (p, ep) in &self.endpoints {
            let kind = match ep.head() {
                EndpointProgram::Assign { .. } | EndpointProgram::Cond { .. } | EndpointProgram::Call { .. } => {
                    Some(ActionKind::Local)
                }
                EndpointProgram::Send { .. } if self.mode == Mode::Async => Some(ActionKind::Send),
                EndpointProgram::Send { session, to, op, .. } => {
                    self.partner_ready(p, session, to, op).then_some(ActionKind::Rendezvous)
                }
                EndpointProgram::Recv { session, from, branches } if self.mode == Mode::Async => self
                    .resolve(session, from)
                    .and_then(|q| self.queues.get(&(session.clone(), q.clone(), p.clone())))
                    .and_then(VecDeque::front)
                    .filter(|(op, _)| branches.contains_key(op))
                    .map(|_| ActionKind::Recv),
                EndpointProgram::Recv { .. } | EndpointProgram::End => None,
            };
            out.extend(kind.map(|kind| Action { process: p.clone(), kind }));
        }
        out
    }

    /// Whether the receiver of a synchronous send offers `op` from `p`.
    fn partner_ready(&self, p: &ProcessId, session: &SessionId, to: &RoleId, op: &OpName) -> bool {
        let Some(q) = self.resolve(session, to) else { return false };
        let Some(me) = self.role_of(session, p) else { return false };
        matches!(
            self.endpoints.get(q).map(Endpoint::head),
            Some(EndpointProgram::Recv { session: s, from, branches })
                if s == session && from == me && branches.contains_key(op)
        )
    }

    fn eval_at(&self, p: &ProcessId, e: &Expr) -> Result<Value, RuntimeError> {
        eval(e, &self.endpoints[p].store, self.builtins).map_err(|source| match source {
            EvalError::UnboundVariable(v) => {
                ScenarioError::MissingVariable { process: p.clone(), var: VarName::new(v) }.into()
            }
            EvalError::UnknownBuiltin(b) => ScenarioError::MissingBuiltin(b).into(),
            source => RuntimeError::Eval { process: p.clone(), source },
        })
    }

    fn ep(&mut self, p: &ProcessId) -> &mut Endpoint {
        self.endpoints.get_mut(p).expect("action refers to a known endpoint")
    }

    fn record(&mut self, e: Event, sender_log: bool, receiver_log: bool) {
        if sender_log {
            self.logs.entry(e.sender.clone()).or_default().push(e.clone());
        }
        if receiver_log {
            self.logs.entry(e.receiver.clone()).or_default().push(e.clone());
            self.trace.push(e);
        }
    }

    fn fire(&mut self, a: &Action) -> Result<(), RuntimeError> {
        let p = &a.process;
        let head = self.ep(p).take_head();
        match (a.kind, head) {
            (ActionKind::Local, EndpointProgram::Assign { var, expr, cont }) => {
                let v = self.eval_at(p, &expr)?;
                let ep = self.ep(p);
                ep.store.insert(var, v);
                ep.set_head(*cont);
            }
            (ActionKind::Local, EndpointProgram::Cond { guard, then_branch, else_branch }) => {
                let next = match self.eval_at(p, &guard)? {
                    Value::Bool(true) => then_branch,
                    Value::Bool(false) => else_branch,
                    other => {
                        return Err(RuntimeError::Eval {
                            process: p.clone(),
                            source: EvalError::Type(format!("condition evaluated to {other}")),
                        })
                    }
                };
                self.ep(p).set_head(*next);
            }
            (ActionKind::Local, EndpointProgram::Call { proc_name, formal, cont, .. }) => {
                let body = self
                    .sys
                    .procedures
                    .get(&(proc_name.clone(), formal.clone()))
                    .ok_or(RuntimeError::MissingProcedure(proc_name, formal))?
                    .clone();
                let ep = self.ep(p);
                match ep.stack.last_mut() {
                    Some(top) if !cont.is_end() => *top = *cont,
                    _ => {
                        ep.stack.pop();
                    }
                }
                ep.stack.push(EndpointProgram::End);
                ep.set_head(body);
            }
            (ActionKind::Rendezvous, EndpointProgram::Send { session, to, op, expr, cont }) => {
                let value = self.send_value(p, expr.as_ref())?;
                let q = self.resolve(&session, &to).expect("rendezvous partner is resolved").clone();
                self.ep(p).set_head(*cont);
                let EndpointProgram::Recv { mut branches, .. } = self.ep(&q).take_head() else {
                    unreachable!("rendezvous partner waits on a receive")
                };
                let branch = branches.remove(&op).expect("partner offers the label");
                let ep = self.ep(&q);
                if let Some(x) = branch.var {
                    ep.store.insert(x, value.clone());
                }
                ep.set_head(branch.cont);
                let e = Event { session, sender: p.clone(), receiver: q, op, value };
                self.record(e, true, true);
            }
            (ActionKind::Send, EndpointProgram::Send { session, to, op, expr, cont }) => {
                let value = self.send_value(p, expr.as_ref())?;
                let q = self.resolve(&session, &to).expect("closed system").clone();
                self.ep(p).set_head(*cont);
                self.queues
                    .entry((session.clone(), p.clone(), q.clone()))
                    .or_default()
                    .push_back((op.clone(), value.clone()));
                self.record(Event { session, sender: p.clone(), receiver: q, op, value }, true, false);
            }
            (ActionKind::Recv, EndpointProgram::Recv { session, from, mut branches }) => {
                let q = self.resolve(&session, &from).expect("closed system").clone();
                let channel = (session.clone(), q.clone(), p.clone());
                let queue = self.queues.get_mut(&channel).expect("receive is enabled");
                let (op, value) = queue.pop_front().expect("receive is enabled");
                if queue.is_empty() {
                    self.queues.remove(&channel);
                }
                let branch = branches.remove(&op).expect("receive is enabled");
                let ep = self.ep(p);
                if let Some(x) = branch.var {
                    ep.store.insert(x, value.clone());
                }
                ep.set_head(branch.cont);
                self.record(Event { session, sender: q, receiver: p.clone(), op, value }, false, true);
            }
            (kind, _) => unreachable!("{kind:?} is not enabled for `{p}`"),
        }
        Ok(())
    }

    fn send_value(&self, p: &ProcessId, expr: Option<&Expr>) -> Result<Value, RuntimeError> {
        match expr {
            Some(e) => self.eval_at(p, e),
            None => Ok(Value::Unit),
        }
    }

    fn is_terminated(&self) -> bool {
        self.queues.is_empty() && self.endpoints.values().all(Endpoint::is_done)
    }

    fn stuck(&self) -> Vec<Stuck> {
        let mut out: Vec<Stuck> = self
            .endpoints
            .iter()
            .filter(|(_, ep)| !ep.is_done())
            .map(|(p, ep)| Stuck { process: p.clone(), waiting: describe(ep.head()) })
            .collect();
        for ((k, from, to), q) in &self.queues {
            for (op, _) in q {
                out.push(Stuck { process: to.clone(), waiting: format!("undelivered {k} {from}->{to} {op}") });
            }
        }
        out
    }
}

fn describe(prog: &EndpointProgram) -> String {
    match prog {
        EndpointProgram::Send { session, to, op, .. } => format!("send {session} -> {to} : {op}"),
        EndpointProgram::Recv { session, from, branches } => {
            let ops: Vec<&str> = branches.keys().map(OpName::as_str).collect();
            format!("recv {session} <- {from} : {{{}}}", ops.join(", "))
        }
        EndpointProgram::End => "end".into(),
        _ => "local step".into(),
    }
}

/// Runs the system once, choosing uniformly among enabled actions with a
/// generator seeded by `seed`.
pub fn run(
    sys: &ProjectedSystem,
    scenario: &Scenario,
    mode: Mode,
    seed: u64,
    bound: usize,
) -> Result<RunResult, RuntimeError> {
    let mut net = Network::new(sys, scenario, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..bound {
        let enabled = net.enabled();
        if enabled.is_empty() {
            let outcome = if net.is_terminated() { Outcome::Terminated } else { Outcome::Deadlock(net.stuck()) };
            return Ok(RunResult { trace: net.trace, outcome });
        }
        let a = &enabled[rng.gen_range(0..enabled.len())];
        net.fire(a)?;
    }
    let outcome =
        if net.enabled().is_empty() && net.is_terminated() { Outcome::Terminated } else { Outcome::BoundExceeded };
    Ok(RunResult { trace: net.trace, outcome })
}

/// Takes local actions, and in asynchronous mode sends, until only
/// deliveries remain. These steps commute with everything else enabled, so
/// taking them first preserves both trace sets and deadlocks.
fn settle(net: &mut Network, steps: &mut usize, bound: usize) -> Result<(), RuntimeError> {
    loop {
        let eager = net.enabled().into_iter().find(|a| matches!(a.kind, ActionKind::Local | ActionKind::Send));
        let Some(a) = eager else { return Ok(()) };
        *steps += 1;
        if *steps > bound {
            return Err(RuntimeError::BoundExceeded(bound));
        }
        net.fire(&a)?;
    }
}

fn explore<T: Ord>(
    mut net: Network,
    mut steps: usize,
    bound: usize,
    leaf: &(impl Fn(&Network) -> T + Sync),
    out: &mut BTreeSet<T>,
) -> Result<(), RuntimeError> {
    settle(&mut net, &mut steps, bound)?;
    let enabled = net.enabled();
    if enabled.is_empty() {
        if !net.is_terminated() {
            return Err(RuntimeError::Deadlock { stuck: net.stuck(), trace: net.trace });
        }
        out.insert(leaf(&net));
        return Ok(());
    }
    if steps >= bound {
        return Err(RuntimeError::BoundExceeded(bound));
    }
    for a in &enabled {
        let mut next = net.clone();
        next.fire(a)?;
        explore(next, steps + 1, bound, leaf, out)?;
    }
    Ok(())
}

/// Explores every schedule, reporting the first deadlock found in
/// depth-first order.
fn explore_all<T: Ord + Send>(
    sys: &ProjectedSystem,
    scenario: &Scenario,
    mode: Mode,
    opts: Explore,
    leaf: impl Fn(&Network) -> T + Sync,
) -> Result<BTreeSet<T>, RuntimeError> {
    let mut net = Network::new(sys, scenario, mode)?;
    let mut steps = 0;
    settle(&mut net, &mut steps, opts.bound)?;
    let enabled = net.enabled();
    if opts.jobs <= 1 || enabled.len() <= 1 {
        let mut out = BTreeSet::new();
        explore(net, steps, opts.bound, &leaf, &mut out)?;
        return Ok(out);
    }
    let workers = opts.jobs.min(enabled.len());
    let results: Vec<Result<BTreeSet<T>, RuntimeError>> = std::thread::scope(|scope| {
        let (net, enabled, leaf) = (&net, &enabled, &leaf);
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = BTreeSet::new();
                    for a in enabled.iter().skip(w).step_by(workers) {
                        let mut next = net.clone();
                        next.fire(a)?;
                        explore(next, steps + 1, opts.bound, leaf, &mut out)?;
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("exploration worker panicked")).collect()
    });
    let mut out = BTreeSet::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Every complete trace of the system over all schedules. A reachable
/// deadlock is an error carrying the trace that leads to it.
pub fn enumerate_network_traces(
    sys: &ProjectedSystem,
    scenario: &Scenario,
    mode: Mode,
    opts: Explore,
) -> Result<BTreeSet<Trace>, RuntimeError> {
    explore_all(sys, scenario, mode, opts, |net| net.trace.clone())
}

/// Per-process views of every complete run: each process's communications
/// in the order it performed them.
pub type LocalViews = BTreeMap<ProcessId, Vec<Event>>;

pub fn enumerate_local_views(
    sys: &ProjectedSystem,
    scenario: &Scenario,
    mode: Mode,
    opts: Explore,
) -> Result<BTreeSet<LocalViews>, RuntimeError> {
    explore_all(sys, scenario, mode, opts, |net| net.logs.clone())
}

/// An asynchronous run whose local views no synchronous run produces, if any.
pub fn check_async_soundness(
    sys: &ProjectedSystem,
    scenario: &Scenario,
    opts: Explore,
) -> Result<Option<LocalViews>, RuntimeError> {
    let sync = enumerate_local_views(sys, scenario, Mode::Sync, opts)?;
    let asynchronous = enumerate_local_views(sys, scenario, Mode::Async, opts)?;
    Ok(asynchronous.into_iter().find(|v| !sync.contains(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Choreography,
    Network,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Choreography => "choreography",
            Side::Network => "network",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent {
        traces: usize,
    },
    /// A trace produced only by `side`.
    Counterexample {
        trace: Trace,
        side: Side,
    },
}

/// Compares two trace sets; `left` stands for the choreography.
pub fn compare_traces(left: &BTreeSet<Trace>, right: &BTreeSet<Trace>) -> Equivalence {
    if let Some(t) = left.difference(right).next() {
        return Equivalence::Counterexample { trace: t.clone(), side: Side::Choreography };
    }
    if let Some(t) = right.difference(left).next() {
        return Equivalence::Counterexample { trace: t.clone(), side: Side::Network };
    }
    Equivalence::Equivalent { traces: left.len() }
}

/// Compares the traces of procedure `entry` with those of its projection.
pub fn check_equivalence(
    m: &Module,
    entry: &str,
    scenario: &Scenario,
    mode: Mode,
    opts: Explore,
) -> Result<Equivalence, RuntimeError> {
    let sys = project(m, entry)?;
    check_system_equivalence(m, entry, &sys, scenario, mode, opts)
}

/// Compares the traces of procedure `entry` with those of `sys`, which may
/// have been projected or linked separately.
pub fn check_system_equivalence(
    m: &Module,
    entry: &str,
    sys: &ProjectedSystem,
    scenario: &Scenario,
    mode: Mode,
    opts: Explore,
) -> Result<Equivalence, RuntimeError> {
    let cfg = ChorConfig::new(m, entry, &scenario.stores, &scenario.builtins)?;
    let chor = enumerate_traces(&cfg, opts)?;
    if mode == Mode::Sync {
        let net = enumerate_network_traces(sys, scenario, mode, opts)?;
        return Ok(compare_traces(&chor, &net));
    }
    // Delivery order across processes is not observable asynchronously, so
    // runs are compared by what each process saw.
    let chor_views: BTreeMap<LocalViews, &Trace> = chor.iter().map(|t| (local_views(t), t)).collect();
    let net: BTreeMap<LocalViews, Trace> =
        explore_all(sys, scenario, mode, opts, |net| (net.logs.clone(), net.trace.clone()))?.into_iter().collect();
    if let Some((_, t)) = chor_views.iter().find(|(v, _)| !net.contains_key(*v)) {
        return Ok(Equivalence::Counterexample { trace: (*t).clone(), side: Side::Choreography });
    }
    if let Some((_, t)) = net.iter().find(|(v, _)| !chor_views.contains_key(*v)) {
        return Ok(Equivalence::Counterexample { trace: t.clone(), side: Side::Network });
    }
    Ok(Equivalence::Equivalent { traces: chor.len() })
}

/// Splits a trace into the events each process takes part in.
pub fn local_views(trace: &[Event]) -> LocalViews {
    let mut out = LocalViews::new();
    for e in trace {
        out.entry(e.sender.clone()).or_default().push(e.clone());
        out.entry(e.receiver.clone()).or_default().push(e.clone());
    }
    out
}
