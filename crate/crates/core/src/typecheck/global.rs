use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::{Branch, GlobalType, LocalType, OpName, PayloadType, RoleId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("role `{role}` cannot be projected: {reason}")]
pub struct ProjectionError {
    pub role: RoleId,
    pub reason: String,
}

/// Projects a protocol onto one role. A role that takes no part in a
/// branching interaction must behave the same in every branch, up to merging
/// of receive offers.
pub fn project_global(g: &GlobalType, r: &RoleId) -> Result<LocalType, ProjectionError> {
    match g {
        GlobalType::End => Ok(LocalType::End),
        GlobalType::Interaction { from, to, branches } => {
            let projected = || -> Result<BTreeMap<OpName, Branch<LocalType>>, ProjectionError> {
                branches
                    .iter()
                    .map(|(op, b)| Ok((op.clone(), Branch { payload: b.payload, cont: project_global(&b.cont, r)? })))
                    .collect()
            };
            if from == r {
                Ok(LocalType::Send { to: to.clone(), branches: projected()? })
            } else if to == r {
                Ok(LocalType::Recv { from: from.clone(), branches: projected()? })
            } else {
                let mut conts = branches.values().map(|b| project_global(&b.cont, r));
                let first = conts.next().expect("interactions have at least one branch")?;
                conts.try_fold(first, |acc, next| {
                    merge_local(&acc, &next?).map_err(|reason| ProjectionError { role: r.clone(), reason })
                })
            }
        }
    }
}

/// Merges two local types: receive offers from the same role are unioned,
/// everything else must coincide.
pub fn merge_local(a: &LocalType, b: &LocalType) -> Result<LocalType, String> {
    match (a, b) {
        (LocalType::End, LocalType::End) => Ok(LocalType::End),
        (LocalType::Send { to, branches }, LocalType::Send { to: t2, branches: b2 })
            if to == t2 && branches.keys().eq(b2.keys()) =>
        {
            let mut out = BTreeMap::new();
            for (op, x) in branches {
                let y = &b2[op];
                if x.payload != y.payload {
                    return Err(format!("`{op}` carries {} in one branch and {} in another", x.payload, y.payload));
                }
                out.insert(op.clone(), Branch { payload: x.payload, cont: merge_local(&x.cont, &y.cont)? });
            }
            Ok(LocalType::Send { to: to.clone(), branches: out })
        }
        (LocalType::Recv { from, branches }, LocalType::Recv { from: f2, branches: b2 }) if from == f2 => {
            let mut out = branches.clone();
            for (op, y) in b2 {
                let merged = match branches.get(op) {
                    None => y.clone(),
                    Some(x) if x.payload == y.payload => {
                        Branch { payload: x.payload, cont: merge_local(&x.cont, &y.cont)? }
                    }
                    Some(x) => {
                        return Err(format!("`{op}` carries {} in one branch and {} in another", x.payload, y.payload))
                    }
                };
                out.insert(op.clone(), merged);
            }
            Ok(LocalType::Recv { from: from.clone(), branches: out })
        }
        _ => Err(format!("behaves as `{a}` in one branch and as `{b}` in another")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ConsumeError {
    /// The protocol has no further interactions on this path.
    Exhausted,
    /// An earlier interaction sharing a role must happen first.
    Blocked { from: RoleId, to: RoleId, labels: Vec<OpName> },
    /// The matching interaction does not offer this label. If it has a
    /// single branch, `recovered` holds what consuming it would have left.
    UnknownLabel { labels: Vec<OpName>, recovered: Option<Box<GlobalType>> },
    /// Branches of a skipped choice disagree on the payload.
    Ambiguous,
}

/// Removes the interaction `from -> to : op` from `g`, returning the residual
/// protocol and the payload type. The interaction may be taken from behind
/// earlier interactions as long as none of them involves `from` or `to`; if
/// such an earlier interaction branches, the removal happens in every branch.
pub(crate) fn consume(
    g: &GlobalType,
    from: &RoleId,
    to: &RoleId,
    op: &OpName,
) -> Result<(GlobalType, PayloadType), ConsumeError> {
    let GlobalType::Interaction { from: f, to: t, branches } = g else {
        return Err(ConsumeError::Exhausted);
    };
    let labels = || branches.keys().cloned().collect::<Vec<_>>();
    if f == from && t == to {
        let Some(b) = branches.get(op) else {
            let recovered = (branches.len() == 1).then(|| Box::new(branches.values().next().unwrap().cont.clone()));
            return Err(ConsumeError::UnknownLabel { labels: labels(), recovered });
        };
        return Ok((b.cont.clone(), b.payload));
    }
    if [f, t].iter().any(|x| *x == from || *x == to) {
        return Err(ConsumeError::Blocked { from: f.clone(), to: t.clone(), labels: labels() });
    }
    let mut payload = None;
    let mut out = BTreeMap::new();
    for (label, b) in branches {
        let (cont, ty) = consume(&b.cont, from, to, op)?;
        if payload.is_some_and(|p| p != ty) {
            return Err(ConsumeError::Ambiguous);
        }
        payload = Some(ty);
        out.insert(label.clone(), Branch { payload: b.payload, cont });
    }
    let g = GlobalType::Interaction { from: f.clone(), to: t.clone(), branches: out };
    Ok((g, payload.expect("interactions have at least one branch")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_str;

    const LISTING: &str = include_str!("../../../../corpus/listing.chor");

    fn protocol(src: &str, name: &str) -> GlobalType {
        parse_str(src).unwrap().protocols[name].clone()
    }

    #[test]
    fn store_at_s1_is_a_single_receive() {
        let store = protocol(LISTING, "Store");
        assert_eq!(project_global(&store, &"S1".into()).unwrap().to_string(), "J1?write(string)");
        assert_eq!(project_global(&GlobalType::End, &"S1".into()).unwrap(), LocalType::End);
    }

    #[test]
    fn write_at_j2_offers_both_labels() {
        let write = protocol(LISTING, "Write");
        let j2 = project_global(&write, &"J2".into()).unwrap();
        assert_eq!(j2.to_string(), "C?{write(string).C!ok(void), writeAsync(string)}");
    }

    #[test]
    fn unprojectable_protocol() {
        let src = "protocol Bad { A -> B: { l(void); C -> B: x(int), r(void); B -> C: y(int) } }";
        let g = protocol(src, "Bad");
        let err = project_global(&g, &"C".into()).unwrap_err();
        assert_eq!(err.role.as_str(), "C");
        assert!(project_global(&g, &"A".into()).is_ok());
    }

    #[test]
    fn consume_skips_independent_prefix() {
        let store = protocol(LISTING, "Store");
        let (rest, ty) = consume(&store, &"J2".into(), &"S2".into(), &"write".into()).unwrap();
        assert_eq!(ty, PayloadType::String);
        let (rest, _) = consume(&rest, &"J1".into(), &"S1".into(), &"write".into()).unwrap();
        assert_eq!(rest, GlobalType::End);
    }

    #[test]
    fn consume_respects_shared_roles() {
        let write = protocol(LISTING, "Write");
        let err = consume(&write, &"C".into(), &"J2".into(), &"write".into()).unwrap_err();
        assert!(matches!(err, ConsumeError::Blocked { .. }));
        let err = consume(&write, &"C".into(), &"J1".into(), &"read".into()).unwrap_err();
        assert!(matches!(err, ConsumeError::UnknownLabel { .. }));
        assert_eq!(consume(&GlobalType::End, &"C".into(), &"J1".into(), &"write".into()), Err(ConsumeError::Exhausted));
    }

    #[test]
    fn consume_behind_a_choice_rewrites_every_branch() {
        let src = "protocol P { A -> B: { l(void); C -> D: x(int), r(void); C -> D: x(int); B -> A: y(void) } }";
        let g = protocol(src, "P");
        let (rest, ty) = consume(&g, &"C".into(), &"D".into(), &"x".into()).unwrap();
        assert_eq!(ty, PayloadType::Int);
        let expected = protocol("protocol P { A -> B: { l(void), r(void); B -> A: y(void) } }", "P");
        assert_eq!(rest, expected);
    }
}
