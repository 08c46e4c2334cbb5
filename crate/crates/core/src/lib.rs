//! A toolchain for choreographic programs.
//!
//! A module of global choreographies is parsed ([`parser`]), checked against
//! its multiparty protocols ([`typecheck`]), and compiled by endpoint
//! projection into one program per process ([`epp`]). The projected programs
//! run on a simulated network ([`runtime`]) whose trace set can be compared
//! with the choreography's own interleaving semantics ([`semantics`]).

pub mod ast;
pub mod diagnostics;
pub mod epp;
pub mod eval;
pub mod gen;
pub mod parser;
pub mod runtime;
pub mod semantics;
pub mod typecheck;

pub use ast::*;
pub use diagnostics::{Code, Diagnostic, Severity};
pub use epp::{link, project, ProjectedSystem};
pub use eval::{Builtins, Store};
pub use parser::{parse_module, parse_str, pretty_module, SourceFile};
pub use runtime::{check_equivalence, parse_scenario, run, Mode, Outcome, RunResult, RuntimeError, Scenario};
pub use semantics::{enumerate_traces, ChorConfig, Event, Explore, Trace};
pub use typecheck::{check_module, BuiltinSig, ModuleTyping};
