//! Random modules for property tests and benchmarks.
//!
//! [`well_typed`] builds a choreography first and derives each session's
//! protocol from it, so the result typechecks by construction.
//! [`arbitrary_module`] covers the whole syntax but is only guaranteed to
//! resolve, not to typecheck.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ast::*;
use crate::runtime::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub max_processes: usize,
    /// Counts statements inside conditional branches too.
    pub max_statements: usize,
    pub max_sessions: usize,
    pub max_conditionals: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_processes: 5, max_statements: 10, max_sessions: 2, max_conditionals: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub module: Module,
    pub entry: String,
    /// Initial stores with every variable the body may read.
    pub scenario: Scenario,
}

const TYPES: [PayloadType; 3] = [PayloadType::Int, PayloadType::String, PayloadType::Bool];

fn role_of(p: &ProcessId) -> RoleId {
    RoleId::new(p.as_str().to_uppercase())
}

fn literal(rng: &mut impl Rng, t: PayloadType) -> Value {
    match t {
        PayloadType::Int => Value::Int(rng.gen_range(-20..100)),
        PayloadType::String => Value::Str(["a", "xy", "", "d"].choose(rng).unwrap().to_string()),
        PayloadType::Bool => Value::Bool(rng.gen()),
        PayloadType::Void => Value::Unit,
    }
}

struct Body<'r, R: Rng> {
    rng: &'r mut R,
    processes: Vec<ProcessId>,
    /// Candidate participants of each session.
    sessions: Vec<(SessionId, Vec<ProcessId>)>,
    vars: BTreeMap<ProcessId, Vec<(VarName, PayloadType)>>,
    payloads: BTreeMap<VarName, PayloadType>,
    fresh: usize,
    budget: usize,
    conditionals: usize,
}

impl<R: Rng> Body<'_, R> {
    fn fresh_var(&mut self) -> VarName {
        self.fresh += 1;
        VarName::new(format!("v{}", self.fresh))
    }

    fn expr(&mut self, p: &ProcessId, t: PayloadType) -> Expr {
        let known: Vec<VarName> = self.vars[p].iter().filter(|(_, ty)| *ty == t).map(|(v, _)| v.clone()).collect();
        let var = known.choose(self.rng).cloned();
        let lit = literal(self.rng, t);
        match (t, var, self.rng.gen_range(0..4)) {
            (_, None, _) | (_, _, 0) => Expr::lit(lit),
            (_, Some(v), 1) => Expr::new(ExprKind::Var(v)),
            (PayloadType::Int, Some(v), _) => Expr::binary(BinOp::Add, Expr::new(ExprKind::Var(v)), Expr::lit(lit)),
            (PayloadType::String, Some(v), _) => {
                Expr::binary(BinOp::Concat, Expr::new(ExprKind::Var(v)), Expr::lit(lit))
            }
            (PayloadType::Bool, Some(v), 2) => !Expr::new(ExprKind::Var(v)),
            (PayloadType::Bool, Some(v), _) => Expr::binary(BinOp::Or, Expr::new(ExprKind::Var(v)), Expr::lit(lit)),
            (PayloadType::Void, _, _) => Expr::lit(Value::Unit),
        }
    }

    fn comm(&mut self, k: &SessionId, from: &ProcessId, to: &ProcessId) -> Stmt {
        let op = OpName::new(*["go", "put", "get"].choose(self.rng).unwrap());
        let (from_peer, to_peer) = (Peer::Process(from.clone()), Peer::Process(to.clone()));
        if self.rng.gen_ratio(1, 6) {
            return Stmt::new(StmtKind::Selection(Selection { from: from_peer, to: to_peer, op, session: k.clone() }));
        }
        let t = *TYPES.choose(self.rng).unwrap();
        let expr = self.expr(from, t);
        let var = self.fresh_var();
        self.vars.get_mut(to).unwrap().push((var.clone(), t));
        self.payloads.insert(var.clone(), t);
        Stmt::new(StmtKind::ValueComm(ValueComm {
            from: from_peer,
            expr: Some(expr),
            to: to_peer,
            var: Some(var),
            op,
            session: k.clone(),
        }))
    }

    fn random_comm(&mut self) -> Stmt {
        let (k, members) = self.sessions.choose(self.rng).unwrap().clone();
        let pair: Vec<&ProcessId> = members.choose_multiple(self.rng, 2).collect();
        self.comm(&k, pair[0], pair[1])
    }

    fn assign(&mut self) -> Stmt {
        let p = self.processes.choose(self.rng).unwrap().clone();
        let t = *TYPES.choose(self.rng).unwrap();
        let expr = self.expr(&p, t);
        let var = self.fresh_var();
        self.vars.get_mut(&p).unwrap().push((var.clone(), t));
        Stmt::new(StmtKind::Assign(Assign { at: p, var, expr }))
    }

    /// A conditional whose decider first tells every other participant of
    /// one session which branch was taken.
    fn conditional(&mut self) -> Option<Stmt> {
        let (k, members) = self.sessions.choose(self.rng).unwrap().clone();
        let d = members.choose(self.rng).unwrap().clone();
        let others: Vec<ProcessId> = members.iter().filter(|q| **q != d).cloned().collect();
        let cost = 1 + 2 * others.len();
        if self.budget < cost {
            return None;
        }
        self.budget -= cost;
        self.conditionals += 1;
        let guard = self.expr(&d, PayloadType::Bool);
        let saved = self.vars.clone();
        let branch = |this: &mut Self, label: &str, extra: usize| {
            let mut stmts: Vec<Stmt> = others
                .iter()
                .map(|q| {
                    Stmt::new(StmtKind::Selection(Selection {
                        from: Peer::Process(d.clone()),
                        to: Peer::Process(q.clone()),
                        op: OpName::new(label),
                        session: k.clone(),
                    }))
                })
                .collect();
            for _ in 0..extra {
                let pair: Vec<&ProcessId> = members.choose_multiple(this.rng, 2).collect();
                stmts.push(this.comm(&k, pair[0], pair[1]));
            }
            this.vars = saved.clone();
            Choreography::new(stmts)
        };
        let room = self.budget.min(3);
        let t_extra = self.rng.gen_range(0..=room);
        let then_branch = branch(self, "yes", t_extra);
        let e_extra = self.rng.gen_range(0..=room - t_extra);
        let else_branch = branch(self, "no", e_extra);
        self.budget -= t_extra + e_extra;
        Some(Stmt::new(StmtKind::Cond(Cond { at: d, guard, then_branch, else_branch })))
    }

    fn block(&mut self, max_conditionals: usize) -> Vec<Stmt> {
        let mut out = Vec::new();
        while self.budget > 0 {
            let roll = self.rng.gen_range(0..10);
            if roll == 0 && self.conditionals < max_conditionals {
                if let Some(s) = self.conditional() {
                    out.push(s);
                }
                continue;
            }
            self.budget -= 1;
            out.push(if roll == 1 { self.assign() } else { self.random_comm() });
        }
        out
    }
}

/// The protocol session `k` follows in `stmts`, followed by `cont`.
/// `payloads` maps each received variable to the type of its value.
fn protocol_of(
    stmts: &[Stmt],
    k: &SessionId,
    cont: GlobalType,
    payloads: &BTreeMap<VarName, PayloadType>,
) -> GlobalType {
    let mut g = cont;
    for s in stmts.iter().rev() {
        let (from, to, op, payload) = match &s.kind {
            StmtKind::ValueComm(c) if &c.session == k => {
                let var = c.var.as_ref().expect("generated receivers are processes");
                (&c.from, &c.to, &c.op, payloads[var])
            }
            StmtKind::Selection(sel) if &sel.session == k => (&sel.from, &sel.to, &sel.op, PayloadType::Void),
            StmtKind::Cond(c) => {
                let t = protocol_of(&c.then_branch.stmts, k, g.clone(), payloads);
                let e = protocol_of(&c.else_branch.stmts, k, g.clone(), payloads);
                g = match (t, e) {
                    (
                        GlobalType::Interaction { from, to, branches: mut tb },
                        GlobalType::Interaction { branches: eb, .. },
                    ) if tb.keys().all(|l| !eb.contains_key(l)) => {
                        tb.extend(eb);
                        GlobalType::Interaction { from, to, branches: tb }
                    }
                    (t, _) => t,
                };
                continue;
            }
            _ => continue,
        };
        let role = |p: &Peer| role_of(p.as_process().expect("generated peers are processes"));
        let branches = [(op.clone(), Branch { payload, cont: g })].into();
        g = GlobalType::Interaction { from: role(from), to: role(to), branches };
    }
    g
}

/// A random module that typechecks with the default builtins. The entry
/// procedure is `main`.
pub fn well_typed(rng: &mut impl Rng, cfg: &GenConfig) -> Generated {
    // Concurrency needs four or more processes, so favour the upper end.
    let max_processes = cfg.max_processes.max(2);
    let n = if rng.gen_bool(0.5) { max_processes } else { rng.gen_range(2..=max_processes) };
    let processes: Vec<ProcessId> = (0..n).map(|i| ProcessId::new(format!("p{i}"))).collect();
    let n_sessions = rng.gen_range(1..=cfg.max_sessions.max(1));
    let sessions = (0..n_sessions)
        .map(|i| {
            let size = rng.gen_range(2..=n);
            let mut members: Vec<ProcessId> = processes.choose_multiple(rng, size).cloned().collect();
            members.sort();
            (SessionId::new(format!("k{i}")), members)
        })
        .collect();
    let mut scenario = Scenario::default();
    let mut vars = BTreeMap::new();
    for p in &processes {
        let store = scenario.stores.entry(p.clone()).or_default();
        let mut known = Vec::new();
        for (name, t) in [("n", PayloadType::Int), ("s", PayloadType::String), ("b", PayloadType::Bool)] {
            store.insert(VarName::new(name), literal(rng, t));
            known.push((VarName::new(name), t));
        }
        vars.insert(p.clone(), known);
    }
    let max_statements = cfg.max_statements.max(1);
    let budget = if rng.gen_bool(0.5) { max_statements } else { rng.gen_range(1..=max_statements) };
    let mut body = Body {
        rng,
        processes: processes.clone(),
        sessions,
        vars,
        payloads: BTreeMap::new(),
        fresh: 0,
        budget,
        conditionals: 0,
    };
    let stmts = body.block(cfg.max_conditionals);

    let mut module = Module::default();
    let mut decls = Vec::new();
    for (k, _) in &body.sessions {
        let g = protocol_of(&stmts, k, GlobalType::End, &body.payloads);
        if g == GlobalType::End {
            continue;
        }
        let name = ProtocolName::new(format!("Proto{}", k.as_str().to_uppercase()));
        let roles = g
            .roles()
            .into_iter()
            .map(|r| RoleBinding { participant: Peer::Process(ProcessId::new(r.as_str().to_lowercase())), role: r })
            .collect();
        decls.push(SessionDecl { name: k.clone(), protocol: name.clone(), roles });
        module.protocols.insert(name, g);
    }
    let proc = Procedure { name: ProcName::new("main"), processes, sessions: decls, body: Choreography::new(stmts) };
    module.procedures.insert(proc.name.clone(), proc);
    module.infer_entry();
    Generated { module, entry: "main".into(), scenario }
}

/// A random module of up to `max_statements` statements without
/// conditionals or calls.
pub fn conditional_free(rng: &mut impl Rng, max_statements: usize) -> Generated {
    well_typed(rng, &GenConfig { max_statements, max_conditionals: 0, ..GenConfig::default() })
}

const ALL_TYPES: [PayloadType; 4] = [PayloadType::Int, PayloadType::String, PayloadType::Bool, PayloadType::Void];

fn arbitrary_global(rng: &mut impl Rng, depth: usize) -> GlobalType {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return GlobalType::End;
    }
    let roles: Vec<usize> = (0..4).collect::<Vec<_>>().choose_multiple(rng, 2).copied().collect();
    let labels = ["l0", "l1", "l2", "l3"];
    let n = rng.gen_range(1..=2);
    let branches = labels
        .choose_multiple(rng, n)
        .map(|l| {
            let payload = *ALL_TYPES.choose(rng).unwrap();
            (OpName::new(*l), Branch { payload, cont: arbitrary_global(rng, depth - 1) })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    GlobalType::Interaction {
        from: RoleId::new(format!("R{}", roles[0])),
        to: RoleId::new(format!("R{}", roles[1])),
        branches,
    }
}

fn arbitrary_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    let leaf = depth == 0 || rng.gen_ratio(1, 3);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => Expr::lit(Value::Int(rng.gen_range(-1000..1000))),
            1 => Expr::lit(Value::Str(
                ["", "a b", "q\"t", "back\\slash", "line\nbreak", "tab\t", "ü"].choose(rng).unwrap().to_string(),
            )),
            2 => Expr::lit(Value::Bool(rng.gen())),
            3 => Expr::lit(Value::Unit),
            _ => Expr::var(["x", "y", "data", "v1"].choose(rng).unwrap()),
        };
    }
    match rng.gen_range(0..3) {
        0 => !arbitrary_expr(rng, depth - 1),
        1 => {
            let ops = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Add, BinOp::Concat, BinOp::And, BinOp::Or];
            let op = *ops.choose(rng).unwrap();
            Expr::binary(op, arbitrary_expr(rng, depth - 1), arbitrary_expr(rng, depth - 1))
        }
        _ => {
            let n = rng.gen_range(0..=2);
            let args = (0..n).map(|_| arbitrary_expr(rng, depth - 1)).collect();
            Expr::call(["blocks", "mix"].choose(rng).unwrap(), args)
        }
    }
}

struct Shape {
    name: ProcName,
    processes: Vec<ProcessId>,
    sessions: Vec<SessionId>,
}

fn arbitrary_stmts(
    rng: &mut impl Rng,
    me: &Procedure,
    externals: &[RoleId],
    shapes: &[Shape],
    depth: usize,
) -> Vec<Stmt> {
    let n = rng.gen_range(0..=4);
    let mut out = Vec::new();
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        let stmt = if roll < 5 && !me.sessions.is_empty() {
            let k = me.sessions.choose(rng).unwrap().name.clone();
            let mut peers: Vec<Peer> = me.processes.iter().cloned().map(Peer::Process).collect();
            peers.extend(externals.iter().cloned().map(Peer::Role));
            let pair: Vec<Peer> = peers.choose_multiple(rng, 2).cloned().collect();
            if pair.len() < 2 || (pair[0].is_external() && pair[1].is_external()) {
                continue;
            }
            let (from, to) = (pair[0].clone(), pair[1].clone());
            let op = OpName::new(*["go", "put", "ok"].choose(rng).unwrap());
            let expr = (!from.is_external()).then(|| arbitrary_expr(rng, 2));
            let var = (!to.is_external()).then(|| VarName::new(*["x", "y", "data"].choose(rng).unwrap()));
            if rng.gen_ratio(1, 4) || (expr.is_none() && var.is_none()) {
                StmtKind::Selection(Selection { from, to, op, session: k })
            } else {
                StmtKind::ValueComm(ValueComm { from, expr, to, var, op, session: k })
            }
        } else if roll < 7 && depth > 0 {
            StmtKind::Cond(Cond {
                at: me.processes.choose(rng).unwrap().clone(),
                guard: arbitrary_expr(rng, 2),
                then_branch: Choreography::new(arbitrary_stmts(rng, me, externals, shapes, depth - 1)),
                else_branch: Choreography::new(arbitrary_stmts(rng, me, externals, shapes, depth - 1)),
            })
        } else if roll < 9 {
            StmtKind::Assign(Assign {
                at: me.processes.choose(rng).unwrap().clone(),
                var: VarName::new(*["x", "y", "z"].choose(rng).unwrap()),
                expr: arbitrary_expr(rng, 3),
            })
        } else {
            let mine: BTreeSet<&SessionId> = me.sessions.iter().map(|s| &s.name).collect();
            let callable: Vec<&Shape> = shapes
                .iter()
                .filter(|s| s.processes.len() <= me.processes.len() && s.sessions.iter().all(|k| mine.contains(k)))
                .collect();
            let Some(callee) = callable.choose(rng) else { continue };
            let processes = me.processes.choose_multiple(rng, callee.processes.len()).cloned().collect();
            StmtKind::Call(Call { proc_name: callee.name.clone(), processes, sessions: callee.sessions.clone() })
        };
        out.push(Stmt::new(stmt));
    }
    out
}

/// A random module exercising every syntactic form. It resolves without
/// errors but need not typecheck.
pub fn arbitrary_module(rng: &mut impl Rng) -> Module {
    let mut module = Module::default();
    let n_protocols = rng.gen_range(1..=3);
    let protocol_names: Vec<ProtocolName> = (0..n_protocols).map(|i| ProtocolName::new(format!("Pr{i}"))).collect();
    for name in &protocol_names {
        module.protocols.insert(name.clone(), arbitrary_global(rng, 3));
    }

    let n_procs = rng.gen_range(1..=3);
    let mut procs = Vec::new();
    for i in 0..n_procs {
        let processes: Vec<ProcessId> = (0..rng.gen_range(1..=3)).map(|j| ProcessId::new(format!("q{j}"))).collect();
        let mut externals = Vec::new();
        let sessions = (0..rng.gen_range(0..=2))
            .map(|j| {
                let roles = (0..rng.gen_range(1..=3))
                    .map(|r| {
                        let participant = if rng.gen_ratio(1, 3) {
                            let x = RoleId::new(format!("X{r}"));
                            if !externals.contains(&x) {
                                externals.push(x.clone());
                            }
                            Peer::Role(x)
                        } else {
                            Peer::Process(processes.choose(rng).unwrap().clone())
                        };
                        RoleBinding { participant, role: RoleId::new(format!("R{r}")) }
                    })
                    .collect();
                SessionDecl {
                    name: SessionId::new(format!("k{j}")),
                    protocol: protocol_names.choose(rng).unwrap().clone(),
                    roles,
                }
            })
            .collect();
        let proc =
            Procedure { name: ProcName::new(format!("f{i}")), processes, sessions, body: Choreography::new(vec![]) };
        procs.push((proc, externals));
    }
    let shapes: Vec<Shape> = procs
        .iter()
        .map(|(p, _)| Shape {
            name: p.name.clone(),
            processes: p.processes.clone(),
            sessions: p.sessions.iter().map(|s| s.name.clone()).collect(),
        })
        .collect();
    for (mut proc, externals) in procs {
        proc.body = Choreography::new(arbitrary_stmts(rng, &proc, &externals, &shapes, 2));
        module.procedures.insert(proc.name.clone(), proc);
    }
    module.infer_entry();
    module
}
