use std::collections::btree_map::Entry;

use thiserror::Error;

use super::ProjectedSystem;
use crate::ast::Peer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("process `{0}` is defined by both systems")]
    DuplicateProcess(String),
    #[error("session `{session}` follows protocol `{left}` on one side and `{right}` on the other")]
    ProtocolMismatch { session: String, left: String, right: String },
    #[error("session `{session}` follows two different definitions of protocol `{protocol}`")]
    ProtocolRedefined { session: String, protocol: String },
    #[error("role `{role}` of session `{session}` is played by `{left}` and by `{right}`")]
    DoubleBound { session: String, role: String, left: String, right: String },
    #[error("role `{role}` of session `{session}` is external on both sides")]
    Unresolved { session: String, role: String },
    #[error("the role sets of session `{0}` differ")]
    RoleSetMismatch(String),
    #[error("both systems define a different projection of `{0}` for `{1}`")]
    ProcedureClash(String, String),
}

/// Joins two systems. Shared sessions must follow the same protocol, and
/// every role of a shared session must be played by a process on exactly one
/// side. Programs address roles, so resolved references need no rewriting.
pub fn link(a: &ProjectedSystem, b: &ProjectedSystem) -> Result<ProjectedSystem, LinkError> {
    let mut out = a.clone();
    for (p, prog) in &b.endpoints {
        if out.endpoints.insert(p.clone(), prog.clone()).is_some() {
            return Err(LinkError::DuplicateProcess(p.to_string()));
        }
    }
    for (key, prog) in &b.procedures {
        match out.procedures.entry(key.clone()) {
            Entry::Vacant(e) => {
                e.insert(prog.clone());
            }
            Entry::Occupied(e) if e.get() == prog => {}
            Entry::Occupied(_) => return Err(LinkError::ProcedureClash(key.0.to_string(), key.1.to_string())),
        }
    }
    for (k, right) in &b.sessions {
        let Some(left) = out.sessions.get_mut(k) else {
            out.sessions.insert(k.clone(), right.clone());
            continue;
        };
        if left.protocol == right.protocol && left.global != right.global {
            return Err(LinkError::ProtocolRedefined { session: k.to_string(), protocol: left.protocol.to_string() });
        }
        if left.protocol != right.protocol {
            return Err(LinkError::ProtocolMismatch {
                session: k.to_string(),
                left: left.protocol.to_string(),
                right: right.protocol.to_string(),
            });
        }
        if left.roles.keys().ne(right.roles.keys()) {
            return Err(LinkError::RoleSetMismatch(k.to_string()));
        }
        for (role, rp) in &right.roles {
            let lp = left.roles.get_mut(role).expect("role sets are equal");
            match (&*lp, rp) {
                (Peer::Process(x), Peer::Process(y)) => {
                    return Err(LinkError::DoubleBound {
                        session: k.to_string(),
                        role: role.to_string(),
                        left: x.to_string(),
                        right: y.to_string(),
                    })
                }
                (Peer::Role(_), Peer::Role(_)) => {
                    return Err(LinkError::Unresolved { session: k.to_string(), role: role.to_string() })
                }
                (Peer::Role(_), Peer::Process(_)) => *lp = rp.clone(),
                (Peer::Process(_), Peer::Role(_)) => {}
            }
        }
    }
    out.recompute_externals();
    Ok(out)
}
