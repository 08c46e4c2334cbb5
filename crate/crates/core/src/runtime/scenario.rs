use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::*;
use crate::diagnostics::{sort_diagnostics, Code, Diagnostic};
use crate::eval::{eval, BuiltinDef, Builtins, Store};
use crate::parser::{tokenize, PResult, Parser, Tok};
use crate::typecheck::Inputs;

/// Initial stores and builtin implementations for a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub stores: BTreeMap<ProcessId, Store>,
    pub builtins: Builtins,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("no initial value for `{var}` at `{process}`")]
    MissingVariable { process: ProcessId, var: VarName },
    #[error("`{var}` at `{process}` should be {expected}, but the scenario gives {found}")]
    WrongType { process: ProcessId, var: VarName, expected: PayloadType, found: Value },
    #[error("builtin `{0}` is not defined")]
    MissingBuiltin(String),
}

impl Scenario {
    /// Checks that every input of a procedure has an initial value of the
    /// right type.
    pub fn check_inputs(&self, inputs: &Inputs) -> Result<(), ScenarioError> {
        for (p, vars) in inputs {
            for (v, ty) in vars {
                let found = self.stores.get(p).and_then(|s| s.get(v));
                match (found, ty) {
                    (None, _) => return Err(ScenarioError::MissingVariable { process: p.clone(), var: v.clone() }),
                    (Some(val), Some(t)) if val.payload_type() != *t => {
                        return Err(ScenarioError::WrongType {
                            process: p.clone(),
                            var: v.clone(),
                            expected: *t,
                            found: val.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Parses a scenario file:
///
/// ```text
/// process c { data = "d"; sync = true; }
/// builtin blocks(d: string): string = d ++ "#"
/// ```
///
/// Untyped builtin parameters and results default to `string`. Builtins not
/// mentioned keep their default definitions.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(text);
    let mut p = Parser::new(tokens);
    let mut sc = Scenario::default();
    let mut defined = BTreeSet::new();
    while !p.at_eof() {
        let result = if p.is_keyword("process") {
            process_block(&mut p, &mut sc)
        } else if p.is_keyword("builtin") {
            builtin_decl(&mut p, &mut sc, &mut defined)
        } else {
            let found = p.peek().clone();
            let span = p.span();
            p.error(Code::Syntax, span, format!("expected `process` or `builtin`, found {found}"))
        };
        if result.is_err() {
            p.bump();
            while !p.at_eof() && !p.is_keyword("process") && !p.is_keyword("builtin") {
                p.bump();
            }
        }
    }
    diags.append(&mut p.diags);
    if diags.iter().any(Diagnostic::is_error) {
        sort_diagnostics(&mut diags);
        Err(diags)
    } else {
        Ok(sc)
    }
}

fn process_block(p: &mut Parser, sc: &mut Scenario) -> PResult<()> {
    p.bump();
    let (name, _) = p.ident("process name")?;
    p.expect(Tok::LBrace, "`{`")?;
    let store = sc.stores.entry(ProcessId::new(name)).or_default();
    while *p.peek() != Tok::RBrace && !p.at_eof() {
        let (var, _) = p.ident("variable")?;
        p.expect(Tok::Assign, "`=`")?;
        let span = p.span();
        let e = p.expr()?;
        let value = match eval(&e, &Store::new(), &Builtins::empty()) {
            Ok(v) => v,
            Err(_) => return p.error(Code::Syntax, span, "initial values must be literals"),
        };
        store.insert(VarName::new(var), value);
        if !p.eat(&Tok::Semi) {
            break;
        }
    }
    p.expect(Tok::RBrace, "`}`")?;
    Ok(())
}

fn optional_type(p: &mut Parser) -> PResult<PayloadType> {
    if p.eat(&Tok::Colon) {
        p.payload_type()
    } else {
        Ok(PayloadType::String)
    }
}

fn builtin_decl(p: &mut Parser, sc: &mut Scenario, defined: &mut BTreeSet<String>) -> PResult<()> {
    p.bump();
    let (name, name_span) = p.ident("builtin name")?;
    if !defined.insert(name.clone()) {
        return p.error(Code::DuplicateName, name_span, format!("builtin `{name}` is defined twice"));
    }
    p.expect(Tok::LParen, "`(`")?;
    let mut params = Vec::new();
    if *p.peek() != Tok::RParen {
        loop {
            let (x, span) = p.ident("parameter")?;
            if params.iter().any(|(y, _): &(VarName, PayloadType)| y.as_str() == x) {
                return p.error(Code::DuplicateName, span, format!("parameter `{x}` is declared twice"));
            }
            let t = optional_type(p)?;
            params.push((VarName::new(x), t));
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "`)`")?;
    let ret = optional_type(p)?;
    p.expect(Tok::Assign, "`=`")?;
    let body = p.expr()?;
    let mut used = BTreeSet::new();
    body.vars(&mut used);
    if let Some(v) = used.iter().find(|v| !params.iter().any(|(x, _)| x == *v)) {
        return p.error(Code::Unbound, v.span(), format!("`{v}` is not a parameter of `{name}`"));
    }
    p.eat(&Tok::Semi);
    sc.builtins.insert(BuiltinDef { name: BuiltinName::new(name), params, ret, body });
    Ok(())
}
