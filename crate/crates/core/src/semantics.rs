//! Interleaving semantics of choreographies. A statement may run as soon as
//! no earlier statement involves one of its processes, which is the same as
//! swapping it to the head of the body.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::*;
use crate::eval::{eval, Builtins, EvalError, Store};

/// One communication: a value (unit for selections) sent on a session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub session: SessionId,
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub op: OpName,
    pub value: Value,
}

impl fmt::Display for Event {
    /// `k c->j1 write("d")`; unit values are omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}->{} {}(", self.session, self.sender, self.receiver, self.op)?;
        if self.value != Value::Unit {
            write!(f, "{}", self.value)?;
        }
        f.write_str(")")
    }
}

pub type Trace = Vec<Event>;

pub fn format_trace(trace: &[Event]) -> String {
    trace.iter().map(|e| format!("{e}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("exploration exceeded {0} steps")]
    BoundExceeded(usize),
    #[error("at `{process}`: {source}")]
    Eval {
        process: ProcessId,
        #[source]
        source: EvalError,
    },
    #[error("procedure `{0}` is not defined")]
    UnknownProcedure(String),
    #[error("`{0}` is an external role; only closed choreographies can run")]
    Open(String),
}

/// Exploration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Explore {
    /// Maximum number of steps on any path, internal steps included.
    pub bound: usize,
    /// Worker threads; 1 explores sequentially.
    pub jobs: usize,
}

impl Default for Explore {
    fn default() -> Self {
        Explore { bound: 10_000, jobs: 1 }
    }
}

/// A choreography in mid-execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChorConfig<'m> {
    pub remaining: Vec<Stmt>,
    pub stores: BTreeMap<ProcessId, Store>,
    module: &'m Module,
    builtins: &'m Builtins,
}

impl<'m> ChorConfig<'m> {
    /// The initial configuration of procedure `entry`. Processes without an
    /// entry in `stores` start empty.
    pub fn new(
        module: &'m Module,
        entry: &str,
        stores: &BTreeMap<ProcessId, Store>,
        builtins: &'m Builtins,
    ) -> Result<Self, SemanticsError> {
        let proc = module.procedure(entry).ok_or_else(|| SemanticsError::UnknownProcedure(entry.into()))?;
        if let Some(r) = proc.externals().into_iter().next() {
            return Err(SemanticsError::Open(r.to_string()));
        }
        let stores = proc.processes.iter().map(|p| (p.clone(), stores.get(p).cloned().unwrap_or_default())).collect();
        Ok(ChorConfig { remaining: proc.body.stmts.clone(), stores, module, builtins })
    }

    pub fn is_done(&self) -> bool {
        self.remaining.is_empty()
    }

    /// Indices of statements in `remaining` that may run next.
    pub fn enabled(&self) -> Vec<usize> {
        enabled_statements(&self.remaining)
    }

    /// Runs statement `i`, which must be enabled.
    pub fn step(&self, i: usize) -> Result<(ChorConfig<'m>, Option<Event>), SemanticsError> {
        let mut next = self.clone();
        let stmt = next.remaining.remove(i);
        let event = next.apply(i, stmt)?;
        Ok((next, event))
    }

    fn eval_at(&self, p: &ProcessId, e: &Expr) -> Result<Value, SemanticsError> {
        let empty = Store::new();
        let store = self.stores.get(p).unwrap_or(&empty);
        eval(e, store, self.builtins).map_err(|source| SemanticsError::Eval { process: p.clone(), source })
    }

    /// Executes `stmt`, already removed from position `i`.
    fn apply(&mut self, i: usize, stmt: Stmt) -> Result<Option<Event>, SemanticsError> {
        let process = |peer: &Peer| match peer {
            Peer::Process(p) => Ok(p.clone()),
            Peer::Role(r) => Err(SemanticsError::Open(r.to_string())),
        };
        match stmt.kind {
            StmtKind::ValueComm(c) => {
                let (from, to) = (process(&c.from)?, process(&c.to)?);
                let value = match &c.expr {
                    Some(e) => self.eval_at(&from, e)?,
                    None => Value::Unit,
                };
                if let Some(x) = c.var {
                    self.stores.entry(to.clone()).or_default().insert(x, value.clone());
                }
                Ok(Some(Event { session: c.session, sender: from, receiver: to, op: c.op, value }))
            }
            StmtKind::Selection(s) => Ok(Some(Event {
                session: s.session,
                sender: process(&s.from)?,
                receiver: process(&s.to)?,
                op: s.op,
                value: Value::Unit,
            })),
            StmtKind::Assign(a) => {
                let v = self.eval_at(&a.at, &a.expr)?;
                self.stores.entry(a.at).or_default().insert(a.var, v);
                Ok(None)
            }
            StmtKind::Cond(c) => {
                let branch = match self.eval_at(&c.at, &c.guard)? {
                    Value::Bool(true) => c.then_branch,
                    Value::Bool(false) => c.else_branch,
                    other => {
                        return Err(SemanticsError::Eval {
                            process: c.at,
                            source: EvalError::Type(format!("condition evaluated to {other}")),
                        })
                    }
                };
                self.remaining.splice(i..i, branch.stmts);
                Ok(None)
            }
            StmtKind::Call(call) => {
                let callee = self
                    .module
                    .procedure(call.proc_name.as_str())
                    .ok_or_else(|| SemanticsError::UnknownProcedure(call.proc_name.to_string()))?;
                let subst: BTreeMap<&ProcessId, &ProcessId> = callee.processes.iter().zip(&call.processes).collect();
                let body = callee.body.stmts.iter().map(|s| substitute(s, &subst));
                self.remaining.splice(i..i, body);
                Ok(None)
            }
        }
    }

    /// Index of the first enabled statement that produces no event.
    fn next_internal(&self) -> Option<usize> {
        self.enabled()
            .into_iter()
            .find(|&i| matches!(self.remaining[i].kind, StmtKind::Assign(_) | StmtKind::Cond(_) | StmtKind::Call(_)))
    }
}

/// Statements that can be swapped to the head: no earlier statement mentions
/// any of their processes. Conditionals block on every process of their
/// branches. Calls are always enabled, since unfolding a call in place
/// changes nothing observable.
pub fn enabled_statements(body: &[Stmt]) -> Vec<usize> {
    let mut busy: BTreeSet<Peer> = BTreeSet::new();
    let mut out = Vec::new();
    for (i, s) in body.iter().enumerate() {
        let free = s.free_processes();
        if matches!(s.kind, StmtKind::Call(_)) || free.is_disjoint(&busy) {
            out.push(i);
        }
        busy.extend(s.all_processes());
    }
    out
}

fn substitute(s: &Stmt, subst: &BTreeMap<&ProcessId, &ProcessId>) -> Stmt {
    let p = |x: &ProcessId| subst.get(x).map(|y| (*y).clone()).unwrap_or_else(|| x.clone());
    let peer = |x: &Peer| match x {
        Peer::Process(q) => Peer::Process(p(q)),
        Peer::Role(_) => x.clone(),
    };
    let block = |c: &Choreography| Choreography::new(c.stmts.iter().map(|s| substitute(s, subst)).collect());
    let kind = match &s.kind {
        StmtKind::ValueComm(c) => StmtKind::ValueComm(ValueComm { from: peer(&c.from), to: peer(&c.to), ..c.clone() }),
        StmtKind::Selection(sel) => {
            StmtKind::Selection(Selection { from: peer(&sel.from), to: peer(&sel.to), ..sel.clone() })
        }
        StmtKind::Cond(c) => StmtKind::Cond(Cond {
            at: p(&c.at),
            guard: c.guard.clone(),
            then_branch: block(&c.then_branch),
            else_branch: block(&c.else_branch),
        }),
        StmtKind::Assign(a) => StmtKind::Assign(Assign { at: p(&a.at), ..a.clone() }),
        StmtKind::Call(c) => StmtKind::Call(Call { processes: c.processes.iter().map(p).collect(), ..c.clone() }),
    };
    Stmt { kind, span: s.span }
}

/// Every complete trace of the choreography. Internal steps are taken
/// eagerly, as they commute with everything else that is enabled.
pub fn enumerate_traces(cfg: &ChorConfig, opts: Explore) -> Result<BTreeSet<Trace>, SemanticsError> {
    let (cfg, steps) = settle(cfg.clone(), 0, opts.bound)?;
    let enabled = cfg.enabled();
    if opts.jobs <= 1 || enabled.len() <= 1 {
        let mut out = BTreeSet::new();
        explore(cfg, steps, &mut Vec::new(), &mut out, opts.bound)?;
        return Ok(out);
    }
    let results: Vec<Result<BTreeSet<Trace>, SemanticsError>> = std::thread::scope(|scope| {
        let cfg = &cfg;
        let chunks: Vec<Vec<usize>> = (0..opts.jobs.min(enabled.len()))
            .map(|w| enabled.iter().copied().skip(w).step_by(opts.jobs).collect())
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    let mut out = BTreeSet::new();
                    for i in chunk {
                        let (next, event) = cfg.step(i)?;
                        let mut prefix: Trace = event.into_iter().collect();
                        explore(next, steps + 1, &mut prefix, &mut out, opts.bound)?;
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

fn settle<'m>(
    mut cfg: ChorConfig<'m>,
    mut steps: usize,
    bound: usize,
) -> Result<(ChorConfig<'m>, usize), SemanticsError> {
    while let Some(i) = cfg.next_internal() {
        steps += 1;
        if steps > bound {
            return Err(SemanticsError::BoundExceeded(bound));
        }
        cfg = cfg.step(i)?.0;
    }
    Ok((cfg, steps))
}

fn explore(
    cfg: ChorConfig,
    steps: usize,
    prefix: &mut Trace,
    out: &mut BTreeSet<Trace>,
    bound: usize,
) -> Result<(), SemanticsError> {
    let (cfg, steps) = settle(cfg, steps, bound)?;
    let enabled = cfg.enabled();
    if enabled.is_empty() {
        out.insert(prefix.clone());
        return Ok(());
    }
    if steps >= bound {
        return Err(SemanticsError::BoundExceeded(bound));
    }
    for i in enabled {
        let (next, event) = cfg.step(i)?;
        let pushed = event.is_some();
        prefix.extend(event);
        explore(next, steps + 1, prefix, out, bound)?;
        if pushed {
            prefix.pop();
        }
    }
    Ok(())
}

/// Runs the choreography once, always taking the first enabled statement.
pub fn run_in_order(cfg: &ChorConfig, bound: usize) -> Result<Trace, SemanticsError> {
    let mut cfg = cfg.clone();
    let mut trace = Vec::new();
    for _ in 0..bound {
        let Some(&i) = cfg.enabled().first() else { return Ok(trace) };
        let (next, event) = cfg.step(i)?;
        trace.extend(event);
        cfg = next;
    }
    if cfg.is_done() {
        Ok(trace)
    } else {
        Err(SemanticsError::BoundExceeded(bound))
    }
}
