//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its elapsed time and limit; the process exits non-zero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chor_core::epp::link;
use chor_core::eval::eval;
use chor_core::gen::{arbitrary_module, conditional_free, well_typed, GenConfig};
use chor_core::runtime::{
    check_equivalence, check_system_equivalence, compare_traces, enumerate_network_traces, Equivalence, RuntimeError,
};
use chor_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LISTING: &str = include_str!("../../../corpus/listing.chor");
const JFS: &str = include_str!("../../../corpus/jfs.chor");
const CLI: &str = include_str!("../../../corpus/cli.chor");
const SRV: &str = include_str!("../../../corpus/srv.chor");
const BROKEN: &str = include_str!("../../../corpus/broken.chor");
const JFS_SCN: &str = include_str!("../../../corpus/jfs.scn");
const SYNC_SCN: &str = include_str!("../../../corpus/sync.scn");
const ASYNC_SCN: &str = include_str!("../../../corpus/async.scn");

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parse(src: &str) -> Result<Module, String> {
    parse_str(src).map_err(|d| format!("{d:?}"))
}

fn scenario(src: &str) -> Result<Scenario, String> {
    parse_scenario(src).map_err(|d| format!("{d:?}"))
}

fn opts() -> Explore {
    Explore::default()
}

fn corpus_fidelity() -> Check {
    let mut worst = Duration::ZERO;
    for (src, entry) in [(LISTING, "write"), (JFS, "jfs"), (CLI, "cli"), (SRV, "srv")] {
        let start = Instant::now();
        let m = parse(src)?;
        check_module(&m, &BuiltinSig::defaults()).map_err(|d| format!("{entry}: {d:?}"))?;
        project(&m, entry).map_err(|e| format!("{entry}: {e}"))?;
        let t = start.elapsed();
        ensure(t < Duration::from_secs(1), || format!("{entry} took {t:?}"))?;
        worst = worst.max(t);
    }
    Ok(format!("4 modules, slowest {worst:?}"))
}

/// Every trace of a conditional-free, call-free body, by filtering all
/// permutations against program order on statements that share a process.
fn linear_extensions(body: &[Stmt], sc: &Scenario) -> Result<BTreeSet<Trace>, String> {
    let mut stores = sc.stores.clone();
    let mut events = Vec::new();
    let proc_of = |p: &Peer| p.as_process().cloned().ok_or("external peer".to_string());
    for s in body {
        let event = match &s.kind {
            StmtKind::ValueComm(c) => {
                let (from, to) = (proc_of(&c.from)?, proc_of(&c.to)?);
                let e = c.expr.as_ref().ok_or("missing expression")?;
                let v = eval(e, &stores.entry(from.clone()).or_default().clone(), &sc.builtins)
                    .map_err(|e| e.to_string())?;
                if let Some(x) = &c.var {
                    stores.entry(to.clone()).or_default().insert(x.clone(), v.clone());
                }
                Some(Event { session: c.session.clone(), sender: from, receiver: to, op: c.op.clone(), value: v })
            }
            StmtKind::Selection(sel) => Some(Event {
                session: sel.session.clone(),
                sender: proc_of(&sel.from)?,
                receiver: proc_of(&sel.to)?,
                op: sel.op.clone(),
                value: Value::Unit,
            }),
            StmtKind::Assign(a) => {
                let v = eval(&a.expr, &stores.entry(a.at.clone()).or_default().clone(), &sc.builtins)
                    .map_err(|e| e.to_string())?;
                stores.entry(a.at.clone()).or_default().insert(a.var.clone(), v);
                None
            }
            StmtKind::Cond(_) | StmtKind::Call(_) => return Err("body must be straight-line".into()),
        };
        events.push(event);
    }
    let procs: Vec<BTreeSet<Peer>> = body.iter().map(Stmt::free_processes).collect();
    let n = body.len();
    let before = |i: usize, j: usize| i < j && !procs[i].is_disjoint(&procs[j]);
    let mut out = BTreeSet::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permutations(&mut perm, 0, &mut |order| {
        let respects = (0..n).all(|a| (a + 1..n).all(|b| !before(order[b], order[a])));
        if respects {
            out.insert(order.iter().filter_map(|&i| events[i].clone()).collect());
        }
    });
    Ok(out)
}

fn permutations(v: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

fn epp_correspondence() -> Check {
    let m = parse(JFS)?;
    let sc = scenario(JFS_SCN)?;
    let oracle = linear_extensions(&m.procedures["jfs"].body.stmts, &sc)?;
    ensure(oracle.len() == 5, || format!("brute-force oracle found {} traces, not 5", oracle.len()))?;
    let cfg = ChorConfig::new(&m, "jfs", &sc.stores, &sc.builtins).map_err(|e| e.to_string())?;
    let chor = enumerate_traces(&cfg, opts()).map_err(|e| e.to_string())?;
    ensure(chor == oracle, || "choreography traces differ from the oracle".into())?;
    let eq = check_equivalence(&m, "jfs", &sc, Mode::Sync, opts()).map_err(|e| e.to_string())?;
    ensure(eq == Equivalence::Equivalent { traces: 5 }, || format!("jfs: {eq:?}"))?;
    let listing = parse(LISTING)?;
    let mut counts = Vec::new();
    for scn in [SYNC_SCN, ASYNC_SCN] {
        let eq =
            check_equivalence(&listing, "write", &scenario(scn)?, Mode::Sync, opts()).map_err(|e| e.to_string())?;
        match eq {
            Equivalence::Equivalent { traces } => counts.push(traces),
            other => return Err(format!("listing: {other:?}")),
        }
    }
    Ok(format!("jfs 5 traces (oracle agrees); listing {} and {} traces", counts[0], counts[1]))
}

fn modularity() -> Check {
    let sc = scenario(JFS_SCN)?;
    let whole = project(&parse(JFS)?, "jfs").map_err(|e| e.to_string())?;
    let cli = project(&parse(CLI)?, "cli").map_err(|e| e.to_string())?;
    let srv = project(&parse(SRV)?, "srv").map_err(|e| e.to_string())?;
    let linked = link(&cli, &srv).map_err(|e| e.to_string())?;
    let a = enumerate_network_traces(&whole, &sc, Mode::Sync, opts()).map_err(|e| e.to_string())?;
    let b = enumerate_network_traces(&linked, &sc, Mode::Sync, opts()).map_err(|e| e.to_string())?;
    match compare_traces(&a, &b) {
        Equivalence::Equivalent { traces } => Ok(format!("linked halves equal the whole ({traces} traces)")),
        other => Err(format!("{other:?}")),
    }
}

fn deadlock_freedom() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let cfg = GenConfig::default();
    let (mut deadlocks, mut traces) = (0, 0);
    for i in 0..500 {
        let g = well_typed(&mut rng, &cfg);
        check_module(&g.module, &BuiltinSig::defaults()).map_err(|d| format!("module {i} rejected: {d:?}"))?;
        let sys = project(&g.module, &g.entry).map_err(|e| format!("module {i}: {e}"))?;
        match enumerate_network_traces(&sys, &g.scenario, Mode::Sync, opts()) {
            Ok(t) => traces += t.len(),
            Err(RuntimeError::Deadlock { .. }) => deadlocks += 1,
            Err(e) => return Err(format!("module {i}: {e}")),
        }
    }
    ensure(deadlocks == 0, || format!("{deadlocks} of 500 modules deadlock"))?;
    Ok(format!("500 modules, {traces} traces, 0 deadlocks"))
}

fn swap_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    let mut total = 0;
    for i in 0..500 {
        let g = conditional_free(&mut rng, 8);
        let body = &g.module.procedures[g.entry.as_str()].body.stmts;
        let oracle = linear_extensions(body, &g.scenario)?;
        let cfg = ChorConfig::new(&g.module, &g.entry, &g.scenario.stores, &g.scenario.builtins)
            .map_err(|e| e.to_string())?;
        let traces = enumerate_traces(&cfg, opts()).map_err(|e| e.to_string())?;
        ensure(traces == oracle, || {
            format!("body {i}: {} traces vs {} linear extensions", traces.len(), oracle.len())
        })?;
        total += traces.len();
    }
    Ok(format!("500 bodies, {total} traces, all equal to the oracle"))
}

fn mutate(src: &str, from: &str, to: &str) -> Result<String, String> {
    ensure(src.contains(from), || format!("mutation anchor `{from}` not found"))?;
    Ok(src.replacen(from, to, 1))
}

fn cont_mut(prog: &mut EndpointProgram) -> &mut EndpointProgram {
    match prog {
        EndpointProgram::Send { cont, .. } | EndpointProgram::Assign { cont, .. } => cont,
        EndpointProgram::Recv { branches, .. } => &mut branches.values_mut().next().expect("a branch").cont,
        _ => panic!("not a straight-line program"),
    }
}

/// Action `i` of a straight-line program, as a mutable slot.
fn nth(prog: &mut EndpointProgram, i: usize) -> &mut EndpointProgram {
    (0..i).fold(prog, |cur, _| cont_mut(cur))
}

/// Swaps actions `i` and `i + 1` of a straight-line program.
fn transpose(prog: &EndpointProgram, i: usize) -> EndpointProgram {
    let take = |p: &mut EndpointProgram| std::mem::replace(p, EndpointProgram::End);
    let mut out = prog.clone();
    let slot = nth(&mut out, i);
    let mut a = take(slot);
    let mut b = take(cont_mut(&mut a));
    *cont_mut(&mut a) = take(cont_mut(&mut b));
    *cont_mut(&mut b) = a;
    *slot = b;
    out
}

fn negative_suite() -> Check {
    let koc_protocol = "protocol Store { J1 -> S1: write(string);\n                 J2 -> S2: write(string)  }";
    let koc = mutate(
        &mutate(LISTING, koc_protocol, "protocol Store { J1 -> S1: { write(string); J2 -> S2: write(string), put(string); J2 -> S2: write(string) } }")?,
        "j1.data -> s1.data : write( k2 )",
        "j1.data -> s1.data : put( k2 )",
    )?;
    let typing_mutants: Vec<(&str, String, &str)> = vec![
        ("wrong label", mutate(JFS, "c.data -> j2.data2 : write(k)", "c.data -> j2.data2 : put(k)")?, "E102"),
        ("wrong role", mutate(JFS, "j1.blocks(data1) -> s1.blocks1", "j1.blocks(data1) -> s2.blocks1")?, "E101"),
        ("missing last reply", mutate(LISTING, ";\n\t\tj2 -> c : ok( k )", "")?, "E104"),
        ("missing first reply", mutate(LISTING, "j1 -> c : ok( k );", "")?, "E104"),
        ("knowledge of choice", koc, "E105"),
        ("sender is receiver", BROKEN.to_string(), "E004"),
        ("sender is receiver in jfs", mutate(JFS, "c.data -> j1.data1", "c.data -> c.data1")?, "E004"),
        ("payload type", mutate(JFS, "c.data -> j1.data1", "c.42 -> j1.data1")?, "E103"),
        ("selection for a value", mutate(JFS, "c.data -> j1.data1 : write(k)", "c -> j1 : write(k)")?, "E103"),
        ("guard type", mutate(LISTING, "if (sync)@c", "if (1 + 2)@c")?, "E107"),
        ("unknown builtin", mutate(JFS, "j1.blocks(data1)", "j1.chunks(data1)")?, "E106"),
        ("duplicate role", mutate(JFS, "j2[J2]]", "j2[J1]]")?, "E101"),
        ("unbound session", mutate(JFS, "write(k2)", "write(k3)")?, "E004"),
    ];
    for (name, src, code) in &typing_mutants {
        let codes: Vec<&str> = match parse_str(src) {
            Err(d) => d.iter().map(|d| d.code.as_str()).collect(),
            Ok(m) => match check_module(&m, &BuiltinSig::defaults()) {
                Ok(_) => return Err(format!("`{name}` was accepted")),
                Err(d) => d.iter().map(|d| d.code.as_str()).collect(),
            },
        };
        ensure(codes.contains(code), || format!("`{name}`: expected {code}, got {codes:?}"))?;
    }

    let jfs = parse(JFS)?;
    let sc = scenario(JFS_SCN)?;
    let base = project(&jfs, "jfs").map_err(|e| e.to_string())?;
    let mut stale = sc.clone();
    stale.stores.entry("j1".into()).or_default().insert("data1".into(), Value::Str("stale".into()));
    let with = |p: &str, prog: EndpointProgram| {
        let mut sys = base.clone();
        sys.endpoints.insert(p.into(), prog);
        sys
    };
    let relabel = |prog: &EndpointProgram, i: usize, to: &str| {
        let mut out = prog.clone();
        if let EndpointProgram::Send { op, .. } = nth(&mut out, i) {
            *op = OpName::new(to);
        }
        out
    };
    let truncate = |prog: &EndpointProgram, i: usize| {
        let mut out = prog.clone();
        *nth(&mut out, i) = EndpointProgram::End;
        out
    };
    let mut wrong_role = base.endpoints["s1"].clone();
    if let EndpointProgram::Recv { from, .. } = &mut wrong_role {
        *from = RoleId::new("J2");
    }
    let network_mutants: Vec<(&str, ProjectedSystem, &Scenario)> = vec![
        ("j1 forwards before receiving", with("j1", transpose(&base.endpoints["j1"], 0)), &stale),
        ("c relabels its first write", with("c", relabel(&base.endpoints["c"], 0, "put")), &sc),
        ("j2 never replies", with("j2", truncate(&base.endpoints["j2"], 2)), &sc),
        ("c writes to j2 first", with("c", transpose(&base.endpoints["c"], 0)), &sc),
        ("c awaits j2 first", with("c", transpose(&base.endpoints["c"], 2)), &sc),
        ("s1 listens to the wrong role", with("s1", wrong_role), &sc),
    ];
    for (name, sys, sc) in &network_mutants {
        match check_system_equivalence(&jfs, "jfs", sys, sc, Mode::Sync, opts()) {
            Err(RuntimeError::Deadlock { .. }) | Ok(Equivalence::Counterexample { .. }) => {}
            other => return Err(format!("`{name}` went unnoticed: {other:?}")),
        }
    }
    Ok(format!("{} rejected modules, {} broken systems caught", typing_mutants.len(), network_mutants.len()))
}

fn round_trip() -> Check {
    for src in [LISTING, JFS, CLI, SRV] {
        let m = parse(src)?;
        let back = parse(&pretty_module(&m))?;
        ensure(back == m, || "corpus module changed after printing".into())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    for i in 0..500 {
        let m =
            if i % 2 == 0 { arbitrary_module(&mut rng) } else { well_typed(&mut rng, &GenConfig::default()).module };
        let text = pretty_module(&m);
        let back = parse(&text).map_err(|e| format!("module {i} does not parse: {e}\n{text}"))?;
        ensure(back == m, || format!("module {i} changed after printing:\n{text}"))?;
    }
    Ok("corpus and 500 generated modules".into())
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("corpus fidelity", Duration::from_secs(1), corpus_fidelity),
        ("projection matches choreography", Duration::from_secs(5), epp_correspondence),
        ("linked halves match the whole", Duration::from_secs(5), modularity),
        ("deadlock freedom", Duration::from_secs(120), deadlock_freedom),
        ("swap soundness", Duration::from_secs(60), swap_soundness),
        ("negative suite", Duration::from_secs(10), negative_suite),
        ("round trip", Duration::from_secs(30), round_trip),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result =
            result.and_then(
                |detail| {
                    if took <= *limit {
                        Ok(detail)
                    } else {
                        Err(format!("over the time limit: {detail}"))
                    }
                },
            );
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(e) => {
                failed += 1;
                ("FAIL", e)
            }
        };
        println!("{tag} {} {name} ({:.2}s of {}s): {detail}", i + 1, took.as_secs_f64(), limit.as_secs());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
