use super::*;
use crate::parser::parse_str;

const LISTING: &str = include_str!("../../../../corpus/listing.chor");
const JFS: &str = include_str!("../../../../corpus/jfs.chor");
const CLI: &str = include_str!("../../../../corpus/cli.chor");
const SRV: &str = include_str!("../../../../corpus/srv.chor");

fn projected(src: &str, entry: &str) -> ProjectedSystem {
    project(&parse_str(src).unwrap(), entry).unwrap()
}

fn text(sys: &ProjectedSystem, p: &str) -> String {
    emit_program(&sys.endpoints[p])
}

#[test]
fn jfs_client_is_a_straight_line() {
    let sys = projected(JFS, "jfs");
    assert_eq!(
        text(&sys, "c"),
        "send k -> J1 : write(data);\n\
         send k -> J2 : write(data);\n\
         recv k <- J1 : ok();\n\
         recv k <- J2 : ok();\n"
    );
    assert_eq!(
        text(&sys, "j1"),
        "recv k <- C : write(data1);\n\
         send k2 -> S1 : write(blocks(data1));\n\
         send k -> C : ok();\n"
    );
    assert_eq!(text(&sys, "s2"), "recv k2 <- J2 : write(blocks2);\n");
    assert!(sys.is_closed());
    assert_eq!(sys.resolve(&"k2".into(), &"S1".into()).unwrap().as_str(), "s1");
}

#[test]
fn listing_merges_offers_at_non_deciders() {
    let sys = projected(LISTING, "write");
    let EndpointProgram::Recv { from, branches, .. } = &sys.endpoints["j2"] else {
        panic!("j2 should start with an offer")
    };
    assert_eq!(from.as_str(), "C");
    let labels: Vec<_> = branches.keys().map(|k| k.as_str()).collect();
    assert_eq!(labels, ["write", "writeAsync"]);

    let EndpointProgram::Cond { .. } = &sys.endpoints["c"] else { panic!("c decides") };

    // s1 binds `blocks` in one branch and `data` in the other; neither is read.
    assert_eq!(text(&sys, "s1"), "recv k2 <- J1 : write(blocks);\n");
    assert!(sys.procedures.contains_key(&("computeBlocks".into(), "j1".into())));
    assert!(sys.procedures[&("computeBlocks".into(), "j2".into())].is_end());
}

#[test]
fn empty_body_projects_to_end() {
    let sys = projected("define p(a, b) { }", "p");
    assert!(sys.endpoints.values().all(EndpointProgram::is_end));
    assert_eq!(sys.endpoints.len(), 2);
}

#[test]
fn one_sided_branch_is_a_merge_failure() {
    let src = "protocol P { A -> B: go(int) }\n\
               define p(a, b, c) (k[P: a[A], b[B]]) {\n\
                 if (true)@c { a.1 -> b.x : go(k) }\n\
               }";
    let err = project(&parse_str(src).unwrap(), "p").unwrap_err();
    let EppError::Merge { process, span, .. } = err else { panic!("{err:?}") };
    assert_eq!(process.as_str(), "a");
    assert_eq!(span.line, 3);
}

#[test]
fn cli_and_srv_link_into_jfs() {
    let cli = projected(CLI, "cli");
    let srv = projected(SRV, "srv");
    assert_eq!(cli.externals.iter().map(|(k, r)| format!("{k}.{r}")).collect::<Vec<_>>(), ["k.J1", "k.J2"]);
    assert_eq!(srv.externals.len(), 1);
    let linked = link(&cli, &srv).unwrap();
    assert!(linked.is_closed());
    assert_eq!(linked, projected(JFS, "jfs"));
    assert_eq!(link(&srv, &cli).unwrap(), linked);
}

#[test]
fn link_unit_and_errors() {
    let jfs = projected(JFS, "jfs");
    assert_eq!(link(&jfs, &ProjectedSystem::default()).unwrap(), jfs);
    assert_eq!(link(&ProjectedSystem::default(), &jfs).unwrap(), jfs);
    assert!(matches!(link(&jfs, &jfs), Err(LinkError::DuplicateProcess(_))));

    let cli = projected(CLI, "cli");
    let mut twin = projected(CLI, "cli");
    let prog = twin.endpoints.remove("c").unwrap();
    twin.endpoints.insert("c2".into(), prog);
    twin.sessions.get_mut("k").unwrap().roles.insert("C".into(), Peer::Process("c2".into()));
    assert!(matches!(link(&cli, &twin), Err(LinkError::DoubleBound { .. })));

    let mut lonely = ProjectedSystem::default();
    let mut info = cli.sessions["k"].clone();
    info.roles.insert("C".into(), Peer::Role("C".into()));
    lonely.sessions.insert("k".into(), info);
    assert!(matches!(link(&cli, &lonely), Err(LinkError::Unresolved { .. })));

    let mut other = projected(SRV, "srv");
    other.sessions.get_mut("k").unwrap().protocol = "Other".into();
    assert!(matches!(link(&cli, &other), Err(LinkError::ProtocolMismatch { .. })));

    let mut redefined = projected(SRV, "srv");
    redefined.sessions.get_mut("k").unwrap().global = GlobalType::End;
    assert!(matches!(link(&cli, &redefined), Err(LinkError::ProtocolRedefined { .. })));
}

#[test]
fn emitted_system_lists_called_procedures() {
    let sys = projected(LISTING, "write");
    let files = emit_system(&sys);
    let names: Vec<_> = files.iter().map(|(p, _)| p.as_str()).collect();
    assert_eq!(names, ["c", "j1", "j2", "s1", "s2"]);
    let (_, j1) = &files[1];
    assert!(j1.contains("call computeBlocks@j1();"));
    assert!(j1.contains("proc computeBlocks@j1 {\n}"));
    let (_, c) = &files[0];
    assert!(c.starts_with("if (sync) {\n  send k -> J1 : write(data);"));
    assert!(!c.contains("proc "));
}
