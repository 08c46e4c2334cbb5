//! Expression evaluation over process stores, and builtin function tables.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::{BinOp, BuiltinName, Expr, ExprKind, PayloadType, UnOp, Value, VarName};

pub type Store = BTreeMap<VarName, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is unbound")]
    UnboundVariable(String),
    #[error("builtin `{0}` is not defined")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` expects {expected} argument(s), got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("builtin `{0}` recurses too deeply")]
    Recursion(String),
}

/// A pure builtin: its parameters, declared types and an expression body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinDef {
    pub name: BuiltinName,
    pub params: Vec<(VarName, PayloadType)>,
    pub ret: PayloadType,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Builtins {
    defs: BTreeMap<BuiltinName, BuiltinDef>,
}

impl Default for Builtins {
    /// `blocks: (string) -> string`, the identity.
    fn default() -> Self {
        let mut b = Builtins::empty();
        b.insert(BuiltinDef {
            name: BuiltinName::new("blocks"),
            params: vec![(VarName::new("data"), PayloadType::String)],
            ret: PayloadType::String,
            body: Expr::var("data"),
        });
        b
    }
}

impl Builtins {
    pub fn empty() -> Self {
        Builtins { defs: BTreeMap::new() }
    }

    /// Adds or replaces a definition.
    pub fn insert(&mut self, def: BuiltinDef) {
        self.defs.insert(def.name.clone(), def);
    }

    pub fn get(&self, name: &str) -> Option<&BuiltinDef> {
        self.defs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BuiltinDef> {
        self.defs.values()
    }
}

const MAX_BUILTIN_DEPTH: usize = 64;

pub fn eval(e: &Expr, store: &Store, builtins: &Builtins) -> Result<Value, EvalError> {
    eval_at(e, store, builtins, 0)
}

fn eval_at(e: &Expr, store: &Store, builtins: &Builtins, depth: usize) -> Result<Value, EvalError> {
    match &e.kind {
        ExprKind::Lit(v) => Ok(v.clone()),
        ExprKind::Var(x) => store.get(x.as_str()).cloned().ok_or_else(|| EvalError::UnboundVariable(x.to_string())),
        ExprKind::Unary(UnOp::Not, inner) => match eval_at(inner, store, builtins, depth)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalError::Type(format!("`!` applied to {other}"))),
        },
        ExprKind::Binary(op, l, r) => {
            let lv = eval_at(l, store, builtins, depth)?;
            let rv = eval_at(r, store, builtins, depth)?;
            binary(*op, lv, rv)
        }
        ExprKind::Call(name, args) => {
            let def = builtins.get(name.as_str()).ok_or_else(|| EvalError::UnknownBuiltin(name.to_string()))?;
            if def.params.len() != args.len() {
                return Err(EvalError::Arity { name: name.to_string(), expected: def.params.len(), found: args.len() });
            }
            if depth >= MAX_BUILTIN_DEPTH {
                return Err(EvalError::Recursion(name.to_string()));
            }
            let mut frame = Store::new();
            for ((param, ty), arg) in def.params.iter().zip(args) {
                let v = eval_at(arg, store, builtins, depth)?;
                if v.payload_type() != *ty {
                    return Err(EvalError::Type(format!("argument `{param}` of `{name}` expects {ty}, got {v}")));
                }
                frame.insert(param.clone(), v);
            }
            eval_at(&def.body, &frame, builtins, depth + 1)
        }
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use Value::*;
    Ok(match (op, l, r) {
        (BinOp::Eq, a, b) => Bool(a == b),
        (BinOp::Ne, a, b) => Bool(a != b),
        (BinOp::Lt, Int(a), Int(b)) => Bool(a < b),
        (BinOp::Le, Int(a), Int(b)) => Bool(a <= b),
        (BinOp::Add, Int(a), Int(b)) => Int(a.wrapping_add(b)),
        (BinOp::Concat, Str(a), Str(b)) => Str(a + &b),
        (BinOp::And, Bool(a), Bool(b)) => Bool(a && b),
        (BinOp::Or, Bool(a), Bool(b)) => Bool(a || b),
        (op, a, b) => return Err(EvalError::Type(format!("`{}` applied to {a} and {b}", op.symbol()))),
    })
}
