use std::collections::{BTreeMap, BTreeSet};

use chor_core::epp::{merge, project_process, Live};
use chor_core::gen::{arbitrary_module, conditional_free, well_typed, GenConfig, Generated};
use chor_core::runtime::{check_async_soundness, check_equivalence, enumerate_network_traces, Equivalence};
use chor_core::typecheck::{infer_local_behaviour, project_global};
use chor_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generated(seed: u64) -> Generated {
    well_typed(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default())
}

fn straight_line(seed: u64) -> Generated {
    conditional_free(&mut ChaCha8Rng::seed_from_u64(seed), 8)
}

fn comms(stmts: &[Stmt], out: &mut Vec<Stmt>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Cond(c) => {
                comms(&c.then_branch.stmts, out);
                comms(&c.else_branch.stmts, out);
            }
            StmtKind::ValueComm(_) | StmtKind::Selection(_) => out.push(s.clone()),
            _ => {}
        }
    }
}

/// Every (label, payload type) each session's protocol allows.
fn protocol_labels(m: &Module, entry: &str) -> BTreeMap<SessionId, BTreeSet<(OpName, PayloadType)>> {
    fn walk(g: &GlobalType, out: &mut BTreeSet<(OpName, PayloadType)>) {
        if let GlobalType::Interaction { branches, .. } = g {
            for (op, b) in branches {
                out.insert((op.clone(), b.payload));
                walk(&b.cont, out);
            }
        }
    }
    let proc = &m.procedures[entry];
    proc.sessions
        .iter()
        .map(|d| {
            let mut labels = BTreeSet::new();
            walk(m.protocol(d.protocol.as_str()).unwrap(), &mut labels);
            (d.name.clone(), labels)
        })
        .collect()
}

/// A short description of each action of a straight-line endpoint program.
fn actions(prog: &EndpointProgram) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = prog;
    loop {
        cur = match cur {
            EndpointProgram::Send { session, to, op, cont, .. } => {
                out.push(format!("send {session} {to} {op}"));
                cont
            }
            EndpointProgram::Recv { session, from, branches } => {
                let (op, b) = branches.iter().next().unwrap();
                out.push(format!("recv {session} {from} {op}"));
                &b.cont
            }
            EndpointProgram::Assign { var, cont, .. } => {
                out.push(format!("assign {var}"));
                cont
            }
            EndpointProgram::End => return out,
            other => panic!("not straight-line: {other:?}"),
        };
    }
}

fn expected_actions(m: &Module, entry: &str, p: &ProcessId) -> Vec<String> {
    let proc = &m.procedures[entry];
    let role = |k: &SessionId, peer: &Peer| proc.session(k.as_str()).unwrap().role_of(peer).unwrap().clone();
    let me = Peer::Process(p.clone());
    proc.body
        .stmts
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::ValueComm(ValueComm { from, to, op, session, .. })
            | StmtKind::Selection(Selection { from, to, op, session }) => {
                if *from == me {
                    Some(format!("send {session} {} {op}", role(session, to)))
                } else if *to == me {
                    Some(format!("recv {session} {} {op}", role(session, from)))
                } else {
                    None
                }
            }
            StmtKind::Assign(a) if &a.at == p => Some(format!("assign {}", a.var)),
            _ => None,
        })
        .collect()
}

fn arb_program() -> impl Strategy<Value = EndpointProgram> {
    let leaf = Just(EndpointProgram::End);
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["a", "b", "c"]), inner.clone()).prop_map(|(op, cont)| EndpointProgram::Send {
                session: SessionId::new("k"),
                to: RoleId::new("Q"),
                op: OpName::new(op),
                expr: None,
                cont: Box::new(cont),
            }),
            prop::collection::btree_map(
                prop::sample::select(vec!["a", "b", "c"]),
                (prop::option::of(prop::sample::select(vec!["x", "y"])), inner),
                1..3,
            )
            .prop_map(|branches| EndpointProgram::Recv {
                session: SessionId::new("k"),
                from: RoleId::new("P"),
                branches: branches
                    .into_iter()
                    .map(|(op, (var, cont))| (OpName::new(op), RecvBranch { var: var.map(VarName::new), cont }))
                    .collect(),
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let m = arbitrary_module(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = pretty_module(&m);
        prop_assert_eq!(parse_str(&text).unwrap(), m);
    }

    #[test]
    fn communications_involve_two_processes(seed in any::<u64>()) {
        let m = arbitrary_module(&mut ChaCha8Rng::seed_from_u64(seed));
        for proc in m.procedures.values() {
            let mut out = Vec::new();
            comms(&proc.body.stmts, &mut out);
            for s in out {
                prop_assert_eq!(s.free_processes().len(), 2);
            }
        }
    }

    #[test]
    fn typechecking_is_deterministic(seed in any::<u64>()) {
        let m = arbitrary_module(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = check_module(&m, &BuiltinSig::defaults());
        prop_assert_eq!(a, check_module(&m, &BuiltinSig::defaults()));
    }

    #[test]
    fn inferred_behaviour_is_the_protocol_projection(seed in any::<u64>()) {
        let g = generated(seed);
        check_module(&g.module, &BuiltinSig::defaults()).unwrap();
        let proc = &g.module.procedures["main"];
        for decl in &proc.sessions {
            let global = g.module.protocol(decl.protocol.as_str()).unwrap();
            for b in &decl.roles {
                let p = b.participant.as_process().unwrap();
                let inferred = infer_local_behaviour(&g.module, proc, p, &decl.name);
                prop_assert_eq!(inferred, project_global(global, &b.role).unwrap());
            }
        }
    }

    #[test]
    fn projection_follows_the_choreography(seed in any::<u64>()) {
        let g = generated(seed);
        for mode in [Mode::Sync, Mode::Async] {
            let eq = check_equivalence(&g.module, "main", &g.scenario, mode, Explore::default()).unwrap();
            prop_assert!(matches!(eq, Equivalence::Equivalent { .. }), "{mode}: {:?}\n{}", eq, pretty_module(&g.module));
        }
    }

    #[test]
    fn delivered_messages_follow_the_protocol(seed in any::<u64>()) {
        let g = generated(seed);
        let allowed = protocol_labels(&g.module, "main");
        let sys = project(&g.module, "main").unwrap();
        for mode in [Mode::Sync, Mode::Async] {
            for t in enumerate_network_traces(&sys, &g.scenario, mode, Explore::default()).unwrap() {
                for e in t {
                    let label = (e.op.clone(), e.value.payload_type());
                    prop_assert!(allowed[&e.session].contains(&label), "{} outside the protocol", e);
                }
            }
        }
    }

    #[test]
    fn asynchronous_runs_look_synchronous_locally(seed in any::<u64>()) {
        let g = generated(seed);
        let sys = project(&g.module, "main").unwrap();
        prop_assert_eq!(check_async_soundness(&sys, &g.scenario, Explore::default()).unwrap(), None);
    }

    #[test]
    fn runs_are_deterministic_and_legal(seed in any::<u64>(), run_seed in any::<u64>()) {
        let g = generated(seed);
        let sys = project(&g.module, "main").unwrap();
        let legal = enumerate_network_traces(&sys, &g.scenario, Mode::Sync, Explore::default()).unwrap();
        let a = run(&sys, &g.scenario, Mode::Sync, run_seed, 10_000).unwrap();
        prop_assert_eq!(&a, &run(&sys, &g.scenario, Mode::Sync, run_seed, 10_000).unwrap());
        prop_assert_eq!(&a.outcome, &Outcome::Terminated);
        prop_assert!(legal.contains(&a.trace));
    }

    #[test]
    fn straight_line_traces_share_one_event_multiset(seed in any::<u64>()) {
        let g = straight_line(seed);
        let cfg = ChorConfig::new(&g.module, "main", &g.scenario.stores, &g.scenario.builtins).unwrap();
        let traces = enumerate_traces(&cfg, Explore::default()).unwrap();
        let sorted: BTreeSet<Vec<Event>> = traces
            .into_iter()
            .map(|mut t| {
                t.sort();
                t
            })
            .collect();
        prop_assert_eq!(sorted.len(), 1);
    }

    #[test]
    fn steps_only_touch_their_own_processes(seed in any::<u64>()) {
        let g = generated(seed);
        let mut cfg = ChorConfig::new(&g.module, "main", &g.scenario.stores, &g.scenario.builtins).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while let Some(&i) = rand::seq::SliceRandom::choose(cfg.enabled().as_slice(), &mut rng) {
            let free = cfg.remaining[i].free_processes();
            let (next, _) = cfg.step(i).unwrap();
            for (p, store) in &cfg.stores {
                if !free.contains(&Peer::Process(p.clone())) {
                    prop_assert_eq!(store, &next.stores[p]);
                }
            }
            cfg = next;
        }
        prop_assert!(cfg.is_done());
    }

    #[test]
    fn projection_keeps_each_processs_statements_in_order(seed in any::<u64>()) {
        let g = straight_line(seed);
        let proc = &g.module.procedures["main"];
        for p in &proc.processes {
            let prog = project_process(&g.module, proc, p, &Live::none()).unwrap();
            prop_assert_eq!(actions(&prog), expected_actions(&g.module, "main", p));
        }
    }

    #[test]
    fn merge_is_idempotent(a in arb_program()) {
        prop_assert_eq!(merge(&a, &a), Ok(a.clone()));
    }

    #[test]
    fn merge_is_commutative(a in arb_program(), b in arb_program()) {
        prop_assert_eq!(merge(&a, &b).ok(), merge(&b, &a).ok());
    }

    #[test]
    fn merge_is_associative_where_defined(a in arb_program(), b in arb_program(), c in arb_program()) {
        let left = merge(&a, &b).and_then(|ab| merge(&ab, &c));
        let right = merge(&b, &c).and_then(|bc| merge(&a, &bc));
        if let (Ok(l), Ok(r)) = (left, right) {
            prop_assert_eq!(l, r);
        }
    }
}
