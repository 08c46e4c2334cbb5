use super::*;
use crate::parser::parse_str;

const LISTING: &str = include_str!("../../../../corpus/listing.chor");
const JFS: &str = include_str!("../../../../corpus/jfs.chor");
const CLI: &str = include_str!("../../../../corpus/cli.chor");
const SRV: &str = include_str!("../../../../corpus/srv.chor");

fn check(src: &str) -> Result<ModuleTyping, Vec<Diagnostic>> {
    check_module(&parse_str(src).unwrap(), &BuiltinSig::defaults())
}

fn codes(src: &str) -> Vec<&'static str> {
    check(src).expect_err("expected type errors").iter().map(|d| d.code.as_str()).collect()
}

fn mutate(src: &str, from: &str, to: &str) -> String {
    assert!(src.contains(from), "mutation anchor `{from}` not found");
    src.replacen(from, to, 1)
}

fn ty(t: PayloadType) -> Option<PayloadType> {
    Some(t)
}

#[test]
fn corpus_typechecks() {
    for src in [LISTING, JFS, CLI, SRV] {
        check(src).unwrap();
    }
    check("define empty() { }").unwrap();
}

#[test]
fn listing_inputs_come_from_the_initial_store() {
    let typing = check(LISTING).unwrap();
    let inputs = typing.inputs_of("write").unwrap();
    let at = |p: &str| inputs[p].iter().map(|(v, t)| (v.as_str(), *t)).collect::<Vec<_>>();
    assert_eq!(at("c"), [("data", ty(PayloadType::String)), ("sync", ty(PayloadType::Bool))]);
    assert_eq!(at("j1"), [("blocks", ty(PayloadType::String))]);
    assert_eq!(at("j2"), [("blocks", ty(PayloadType::String))]);
    assert!(!inputs.contains_key("s1"));
}

#[test]
fn missing_first_reply_leaves_the_protocol_unfinished() {
    let src = mutate(LISTING, "j1 -> c : ok( k );", "");
    let diags = check(&src).unwrap_err();
    let incomplete: Vec<_> = diags.iter().filter(|d| d.code == Code::ProtocolNotConsumed).collect();
    assert_eq!(incomplete.len(), 1, "{diags:?}");
    assert!(incomplete[0].message.contains("session `k`"));
    assert!(incomplete[0].message.contains("`J1 -> C: ok`"));
    // The second reply now overtakes the first, which shares role C.
    assert!(diags.iter().any(|d| d.code == Code::RoleMismatch));
}

#[test]
fn missing_last_reply() {
    let src = mutate(LISTING, ";\n\t\tj2 -> c : ok( k )", "");
    assert_eq!(codes(&src), ["E104"]);
}

#[test]
fn wrong_label() {
    let src = mutate(JFS, "c.data -> j2.data2 : write(k)", "c.data -> j2.data2 : put(k)");
    assert_eq!(codes(&src), ["E102"]);
}

#[test]
fn wrong_role() {
    let src = mutate(JFS, "j1.blocks(data1) -> s1.blocks1", "j1.blocks(data1) -> s2.blocks1");
    assert!(codes(&src).contains(&"E101"));
}

#[test]
fn payload_mismatches() {
    let src = mutate(JFS, "c.data -> j1.data1", "c.42 -> j1.data1");
    assert_eq!(codes(&src), ["E103"]);
    let src = mutate(JFS, "c.data -> j1.data1 : write(k)", "c -> j1 : write(k)");
    assert_eq!(codes(&src), ["E103"], "a bare `c -> j1` is a selection and sends no value");
    let src = "protocol P { A -> B: go(int) }\n\
               define p(a, b) (k[P: a[A], b[B]]) { a -> b : go(k) }";
    assert_eq!(codes(src), ["E103"]);
}

#[test]
fn guard_must_be_bool() {
    let src = mutate(LISTING, "if (sync)@c", "if (1 + 2)@c");
    assert_eq!(codes(&src), ["E107"]);
}

#[test]
fn unknown_builtin() {
    let src = mutate(JFS, "j1.blocks(data1)", "j1.chunks(data1)");
    assert_eq!(codes(&src), ["E106"]);
}

#[test]
fn operator_types() {
    let src = mutate(JFS, "j1.blocks(data1)", "j1.blocks(data1 + 1)");
    assert_eq!(codes(&src), ["E103"]);
    let src = mutate(JFS, "j1.blocks(data1)", "j1.blocks(1 == \"x\")");
    assert_eq!(codes(&src), ["E103", "E103"]);
}

#[test]
fn decider_must_send_first() {
    let src = "protocol P { A -> B: { l(void); B -> C: x(int), r(void); B -> C: y(int) } }\n\
               define p(a, b, c) (k[P: a[A], b[B], c[C]]) {\n\
                 if (true)@a { a -> b : l(k); b.1 -> c.v : x(k) }\n\
                 else { a -> b : r(k); b.2 -> c.v : y(k) }\n\
               }";
    check(src).expect("c learns the outcome from b");

    let src = "protocol P { B -> A: { l(void), r(void) } }\n\
               define p(a, b) (k[P: a[A], b[B]]) {\n\
                 if (true)@a { b -> a : l(k) } else { b -> a : r(k) }\n\
               }";
    assert_eq!(codes(src), ["E105"]);
}

#[test]
fn uninformed_session_is_a_knowledge_of_choice_breach() {
    let src = "protocol P { A -> B: { l(void), r(void) } }\n\
               protocol Q { C -> D: { x(void), y(void) } }\n\
               define p(a, b, c, d) (k[P: a[A], b[B]], k2[Q: c[C], d[D]]) {\n\
                 if (true)@a { a -> b : l(k); c -> d : x(k2) }\n\
                 else { a -> b : r(k); c -> d : y(k2) }\n\
               }";
    let diags = check(src).unwrap_err();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, Code::KnowledgeOfChoice);
    assert!(diags[0].message.contains("`k2`"));
    assert_eq!(diags[0].span.line, 4);
}

#[test]
fn merge_failure_is_reported_as_knowledge_of_choice() {
    // c behaves alike in both branches but keeps the value under different names.
    let src = "protocol P { A -> B: { l(void); A -> C: m(int), r(void); A -> C: m(int) } }\n\
               define p(a, b, c) (k[P: a[A], b[B], c[C]]) {\n\
                 if (true)@a { a -> b : l(k); a.1 -> c.x : m(k) }\n\
                 else { a -> b : r(k); a.2 -> c.y : m(k) };\n\
                 c.z = x + 1\n\
               }";
    let diags = check(src).unwrap_err();
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0].code, Code::KnowledgeOfChoice);
    assert!(diags[0].message.contains("`c`"));
    check(&mutate(src, "c.z = x + 1", "c.z = 0")).unwrap();
}

#[test]
fn branches_must_agree_on_the_residual() {
    let src = "protocol P { A -> B: x(void); A -> B: y(void) }\n\
               define p(a, b) (k[P: a[A], b[B]]) {\n\
                 if (true)@a { a -> b : x(k) } else { };\n\
                 a -> b : y(k)\n\
               }";
    let c = codes(src);
    assert!(c.contains(&"E104"), "{c:?}");
}

#[test]
fn role_assignments_are_total_and_injective() {
    let src = mutate(JFS, "k[Write: c[C], j1[J1], j2[J2]]", "k[Write: c[C], j1[J1], j2[J1]]");
    assert!(codes(&src).iter().all(|c| *c == "E101" || *c == "E104" || *c == "E102"));
    assert!(codes(&src).contains(&"E101"));
    let src = mutate(JFS, "k[Write: c[C], j1[J1], j2[J2]]", "k[Write: c[C], j1[J1], j2[J3]]");
    assert!(codes(&src).contains(&"E101"));
}

#[test]
fn calls_need_fresh_matching_sessions() {
    let base = "protocol P { A -> B: go(int) }\n\
                define sub(x, y) (k[P: x[A], y[B]]) { x.1 -> y.v : go(k) }\n";
    check(&format!("{base}define main(a, b) (k[P: a[A], b[B]]) {{ sub(a, b) }}")).unwrap();
    let swapped = format!("{base}define main(a, b) (k[P: a[A], b[B]]) {{ sub(b, a) }}");
    assert!(codes(&swapped).iter().all(|c| *c == "E109"));
    let used = format!("{base}define main(a, b) (k[P: a[A], b[B]]) {{ a.1 -> b.v : go(k); sub(a, b) }}");
    assert_eq!(codes(&used), ["E109"]);
}

#[test]
fn callee_reads_flow_into_caller_inputs() {
    let src = "protocol P { A -> B: go(int) }\n\
               define sub(x, y) (k[P: x[A], y[B]]) { x.n + 1 -> y.v : go(k) }\n\
               define main(a, b) (k[P: a[A], b[B]]) { sub(a, b) }";
    let typing = check(src).unwrap();
    let inputs = &typing.inputs_of("main").unwrap()["a"];
    assert_eq!(inputs.get("n"), Some(&ty(PayloadType::Int)));
}

#[test]
fn variables_bound_on_one_path_become_inputs() {
    let src = "protocol P { A -> B: go(string) }\n\
               define p(a, b) (k[P: a[A], b[B]]) {\n\
                 if (flag)@a { a.s = \"x\" };\n\
                 a.s -> b.v : go(k)\n\
               }";
    let typing = check(src).unwrap();
    let a = &typing.inputs_of("p").unwrap()["a"];
    assert_eq!(a.get("s"), Some(&ty(PayloadType::String)));
    assert_eq!(a.get("flag"), Some(&ty(PayloadType::Bool)));

    let conflict = mutate(src, "a.s = \"x\" }", "a.s = \"x\" } else { a.s = 3 }");
    assert_eq!(codes(&conflict), ["E103"]);
}

#[test]
fn recursive_procedures_terminate() {
    check("define ping(a) { if (go)@a { ping(a) } }").unwrap();
    // b would have to learn whether a recurses.
    assert_eq!(codes("define ping(a, b) { if (go)@a { ping(a, b) } }"), ["E105"]);
}

#[test]
fn diagnostics_are_deterministic_and_ordered() {
    let src = mutate(JFS, "c.data -> j2.data2 : write(k)", "c.data -> j2.data2 : put(k)");
    let src = mutate(&src, "j1.blocks(data1)", "j1.chunks(data1)");
    let a = check(&src).unwrap_err();
    let b = check(&src).unwrap_err();
    assert_eq!(a, b);
    let positions: Vec<_> = a.iter().map(|d| (d.span.line, d.span.col)).collect();
    let mut sorted = positions.clone();
    sorted.sort();
    assert_eq!(positions, sorted);
}

#[test]
fn inferred_behaviour_matches_protocol_projection() {
    for (src, entry) in [(LISTING, "write"), (JFS, "jfs"), (CLI, "cli"), (SRV, "srv")] {
        let m = parse_str(src).unwrap();
        let proc = m.procedure(entry).unwrap();
        for decl in &proc.sessions {
            let g = m.protocol(decl.protocol.as_str()).unwrap();
            for b in &decl.roles {
                let Peer::Process(p) = &b.participant else { continue };
                let inferred = infer_local_behaviour(&m, proc, p, &decl.name);
                assert_eq!(inferred, project_global(g, &b.role).unwrap(), "{entry}: {p} on {}", decl.name);
            }
        }
    }
    let m = parse_str(LISTING).unwrap();
    let write = m.procedure("write").unwrap();
    let s1 = infer_local_behaviour(&m, write, &"s1".into(), &"k2".into());
    assert_eq!(s1.to_string(), "J1?write(string)");
    assert_eq!(infer_local_behaviour(&m, write, &"s1".into(), &"k".into()), LocalType::End);
}
