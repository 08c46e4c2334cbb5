//! Syntax shared by every stage of the toolchain: identifiers, expressions,
//! choreographies, protocols (global and local types), endpoint programs and
//! modules.
//!
//! Equality on every node ignores source spans. Two trees that print to the
//! same text compare equal regardless of where they were parsed from.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

/// A location in a source file. Lines and columns are 1-based; `len` is the
/// length in bytes of the token the span covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub offset: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, offset: u32, len: u32) -> Self {
        Span { line, col, offset, len }
    }

    /// True for spans produced by [`Span::default`], i.e. synthesized nodes.
    pub fn is_synthetic(&self) -> bool {
        self.line == 0
    }
}

/// Checks the identifier lexical rule `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

macro_rules! ident_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone)]
        pub struct $name {
            name: String,
            span: Span,
        }

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                Self::with_span(name, Span::default())
            }

            pub fn with_span(name: impl Into<String>, span: Span) -> Self {
                let name = name.into();
                debug_assert!(is_identifier(&name), "invalid identifier {name:?}");
                $name { name, span }
            }

            pub fn as_str(&self) -> &str {
                &self.name
            }

            pub fn span(&self) -> Span {
                self.span
            }
        }

        impl PartialEq for $name {
            fn eq(&self, other: &Self) -> bool {
                self.name == other.name
            }
        }

        impl Eq for $name {}

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.name.cmp(&other.name)
            }
        }

        impl Hash for $name {
            fn hash<H: Hasher>(&self, state: &mut H) {
                self.name.hash(state)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.name
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.name)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }
    };
}

ident_type!(
    /// A concrete process (endpoint) bound as a procedure parameter.
    ProcessId
);
ident_type!(
    /// A protocol role, or a reference to a process living in another module.
    RoleId
);
ident_type!(SessionId);
ident_type!(OpName);
ident_type!(VarName);
ident_type!(ProcName);
ident_type!(ProtocolName);
ident_type!(BuiltinName);

/// One side of a communication: a local process or an external role.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Peer {
    Process(ProcessId),
    Role(RoleId),
}

impl Peer {
    pub fn name(&self) -> &str {
        match self {
            Peer::Process(p) => p.as_str(),
            Peer::Role(r) => r.as_str(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Peer::Process(p) => p.span(),
            Peer::Role(r) => r.span(),
        }
    }

    pub fn as_process(&self) -> Option<&ProcessId> {
        match self {
            Peer::Process(p) => Some(p),
            Peer::Role(_) => None,
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Peer::Role(_))
    }
}

impl fmt::Display for Peer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runtime values; also the literal domain of expressions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    Unit,
}

impl Value {
    pub fn payload_type(&self) -> PayloadType {
        match self {
            Value::Str(_) => PayloadType::String,
            Value::Int(_) => PayloadType::Int,
            Value::Bool(_) => PayloadType::Bool,
            Value::Unit => PayloadType::Void,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write_quoted(f, s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => f.write_str("unit"),
        }
    }
}

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PayloadType {
    String,
    Int,
    Bool,
    Void,
}

impl PayloadType {
    pub fn keyword(self) -> &'static str {
        match self {
            PayloadType::String => "string",
            PayloadType::Int => "int",
            PayloadType::Bool => "bool",
            PayloadType::Void => "void",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "string" => PayloadType::String,
            "int" => PayloadType::Int,
            "bool" => PayloadType::Bool,
            "void" => PayloadType::Void,
            _ => return None,
        })
    }
}

impl fmt::Display for PayloadType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Add,
    Concat,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Add => "+",
            BinOp::Concat => "++",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le => 4,
            BinOp::Add | BinOp::Concat => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Lit(Value),
    Var(VarName),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(BuiltinName, Vec<Expr>),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state)
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn lit(v: Value) -> Self {
        Expr::new(ExprKind::Lit(v))
    }

    pub fn var(name: &str) -> Self {
        Expr::new(ExprKind::Var(VarName::new(name)))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call(BuiltinName::new(name), args))
    }

    /// Variables read by this expression.
    pub fn vars(&self, out: &mut BTreeSet<VarName>) {
        match &self.kind {
            ExprKind::Lit(_) => {}
            ExprKind::Var(v) => {
                out.insert(v.clone());
            }
            ExprKind::Unary(_, e) => e.vars(out),
            ExprKind::Binary(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }
}

impl std::ops::Not for Expr {
    type Output = Expr;

    fn not(self) -> Expr {
        Expr::new(ExprKind::Unary(UnOp::Not, Box::new(self)))
    }
}

/// `from.expr -> to.var : op(session)`. The expression is present exactly
/// when the sender is a local process; likewise the variable for the
/// receiver.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueComm {
    pub from: Peer,
    pub expr: Option<Expr>,
    pub to: Peer,
    pub var: Option<VarName>,
    pub op: OpName,
    pub session: SessionId,
}

/// A payload-free labelled message, `from -> to : op(session)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selection {
    pub from: Peer,
    pub to: Peer,
    pub op: OpName,
    pub session: SessionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cond {
    pub at: ProcessId,
    pub guard: Expr,
    pub then_branch: Choreography,
    pub else_branch: Choreography,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assign {
    pub at: ProcessId,
    pub var: VarName,
    pub expr: Expr,
}

/// Procedure call. Only processes are written at the call site; `sessions`
/// lists the callee's session parameters, which are bound by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Call {
    pub proc_name: ProcName,
    pub processes: Vec<ProcessId>,
    pub sessions: Vec<SessionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    ValueComm(ValueComm),
    Selection(Selection),
    Cond(Cond),
    Assign(Assign),
    Call(Call),
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Stmt {}

impl Hash for Stmt {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state)
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }

    /// The identifiers in the statement head. For a conditional this is the
    /// deciding process only; for a call it is the argument list.
    pub fn free_processes(&self) -> BTreeSet<Peer> {
        let mut out = BTreeSet::new();
        match &self.kind {
            StmtKind::ValueComm(c) => {
                out.insert(c.from.clone());
                out.insert(c.to.clone());
            }
            StmtKind::Selection(s) => {
                out.insert(s.from.clone());
                out.insert(s.to.clone());
            }
            StmtKind::Cond(c) => {
                out.insert(Peer::Process(c.at.clone()));
            }
            StmtKind::Assign(a) => {
                out.insert(Peer::Process(a.at.clone()));
            }
            StmtKind::Call(c) => {
                out.extend(c.processes.iter().cloned().map(Peer::Process));
            }
        }
        out
    }

    /// Every process or role occurring anywhere in the statement, including
    /// inside conditional branches.
    pub fn all_processes(&self) -> BTreeSet<Peer> {
        let mut out = self.free_processes();
        if let StmtKind::Cond(c) = &self.kind {
            for s in c.then_branch.stmts.iter().chain(&c.else_branch.stmts) {
                out.extend(s.all_processes());
            }
        }
        out
    }

    /// The session a communication runs on.
    pub fn session(&self) -> Option<&SessionId> {
        match &self.kind {
            StmtKind::ValueComm(c) => Some(&c.session),
            StmtKind::Selection(s) => Some(&s.session),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Choreography {
    pub stmts: Vec<Stmt>,
}

impl Choreography {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Choreography { stmts }
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    /// Total number of statements including those nested in conditionals.
    pub fn size(&self) -> usize {
        self.stmts
            .iter()
            .map(|s| match &s.kind {
                StmtKind::Cond(c) => 1 + c.then_branch.size() + c.else_branch.size(),
                _ => 1,
            })
            .sum()
    }
}

/// Structural equality ignoring source spans.
pub fn equal_modulo_spans(a: &Choreography, b: &Choreography) -> bool {
    a == b
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch<T> {
    pub payload: PayloadType,
    pub cont: T,
}

/// A multiparty protocol seen from the global viewpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GlobalType {
    Interaction { from: RoleId, to: RoleId, branches: BTreeMap<OpName, Branch<GlobalType>> },
    End,
}

impl GlobalType {
    pub fn interaction(
        from: &str,
        to: &str,
        branches: impl IntoIterator<Item = (&'static str, PayloadType, GlobalType)>,
    ) -> Self {
        GlobalType::Interaction {
            from: RoleId::new(from),
            to: RoleId::new(to),
            branches: branches
                .into_iter()
                .map(|(l, payload, cont)| (OpName::new(l), Branch { payload, cont }))
                .collect(),
        }
    }

    /// Every role mentioned by the protocol.
    pub fn roles(&self) -> BTreeSet<RoleId> {
        let mut out = BTreeSet::new();
        self.collect_roles(&mut out);
        out
    }

    fn collect_roles(&self, out: &mut BTreeSet<RoleId>) {
        if let GlobalType::Interaction { from, to, branches } = self {
            out.insert(from.clone());
            out.insert(to.clone());
            for b in branches.values() {
                b.cont.collect_roles(out);
            }
        }
    }
}

/// The behaviour of a single role in a protocol.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalType {
    Send { to: RoleId, branches: BTreeMap<OpName, Branch<LocalType>> },
    Recv { from: RoleId, branches: BTreeMap<OpName, Branch<LocalType>> },
    End,
}

impl fmt::Display for LocalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (sigil, peer, branches) = match self {
            LocalType::End => return f.write_str("end"),
            LocalType::Send { to, branches } => ('!', to, branches),
            LocalType::Recv { from, branches } => ('?', from, branches),
        };
        write!(f, "{peer}{sigil}")?;
        if branches.len() > 1 {
            f.write_str("{")?;
        }
        for (i, (op, b)) in branches.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{op}({})", b.payload)?;
            if b.cont != LocalType::End {
                write!(f, ".{}", b.cont)?;
            }
        }
        if branches.len() > 1 {
            f.write_str("}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecvBranch {
    pub var: Option<VarName>,
    pub cont: EndpointProgram,
}

/// The per-process target language produced by endpoint projection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EndpointProgram {
    Send {
        session: SessionId,
        to: RoleId,
        op: OpName,
        expr: Option<Expr>,
        cont: Box<EndpointProgram>,
    },
    Recv {
        session: SessionId,
        from: RoleId,
        branches: BTreeMap<OpName, RecvBranch>,
    },
    Cond {
        guard: Expr,
        then_branch: Box<EndpointProgram>,
        else_branch: Box<EndpointProgram>,
    },
    Assign {
        var: VarName,
        expr: Expr,
        cont: Box<EndpointProgram>,
    },
    /// Runs the projection of `proc_name` for its parameter `formal`, then
    /// continues.
    Call {
        proc_name: ProcName,
        formal: ProcessId,
        sessions: Vec<SessionId>,
        cont: Box<EndpointProgram>,
    },
    End,
}

impl EndpointProgram {
    pub fn is_end(&self) -> bool {
        matches!(self, EndpointProgram::End)
    }

    /// Sequential composition: replaces every `End` leaf with `next`.
    pub fn then(self, next: &EndpointProgram) -> EndpointProgram {
        use EndpointProgram::*;
        match self {
            End => next.clone(),
            Send { session, to, op, expr, cont } => Send { session, to, op, expr, cont: Box::new(cont.then(next)) },
            Recv { session, from, branches } => Recv {
                session,
                from,
                branches: branches
                    .into_iter()
                    .map(|(op, b)| (op, RecvBranch { var: b.var, cont: b.cont.then(next) }))
                    .collect(),
            },
            Cond { guard, then_branch, else_branch } => Cond {
                guard,
                then_branch: Box::new(then_branch.then(next)),
                else_branch: Box::new(else_branch.then(next)),
            },
            Assign { var, expr, cont } => Assign { var, expr, cont: Box::new(cont.then(next)) },
            Call { proc_name, formal, sessions, cont } => {
                Call { proc_name, formal, sessions, cont: Box::new(cont.then(next)) }
            }
        }
    }

    /// Number of action nodes in the program tree.
    pub fn size(&self) -> usize {
        use EndpointProgram::*;
        match self {
            End => 0,
            Send { cont, .. } | Assign { cont, .. } | Call { cont, .. } => 1 + cont.size(),
            Recv { branches, .. } => 1 + branches.values().map(|b| b.cont.size()).sum::<usize>(),
            Cond { then_branch, else_branch, .. } => 1 + then_branch.size() + else_branch.size(),
        }
    }
}

/// `participant[Role]` inside a session declaration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoleBinding {
    pub participant: Peer,
    pub role: RoleId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SessionDecl {
    pub name: SessionId,
    pub protocol: ProtocolName,
    pub roles: Vec<RoleBinding>,
}

impl SessionDecl {
    /// The protocol role played by a participant in this session.
    pub fn role_of(&self, participant: &Peer) -> Option<&RoleId> {
        self.roles.iter().find(|b| &b.participant == participant).map(|b| &b.role)
    }

    pub fn participant_of(&self, role: &RoleId) -> Option<&Peer> {
        self.roles.iter().find(|b| &b.role == role).map(|b| &b.participant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Procedure {
    pub name: ProcName,
    pub processes: Vec<ProcessId>,
    pub sessions: Vec<SessionDecl>,
    pub body: Choreography,
}

impl Procedure {
    pub fn session(&self, name: &str) -> Option<&SessionDecl> {
        self.sessions.iter().find(|s| s.name.as_str() == name)
    }

    pub fn has_process(&self, name: &str) -> bool {
        self.processes.iter().any(|p| p.as_str() == name)
    }

    /// External roles referenced by the session declarations.
    pub fn externals(&self) -> BTreeSet<RoleId> {
        self.sessions
            .iter()
            .flat_map(|s| &s.roles)
            .filter_map(|b| match &b.participant {
                Peer::Role(r) => Some(r.clone()),
                Peer::Process(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Module {
    pub protocols: BTreeMap<ProtocolName, GlobalType>,
    pub procedures: BTreeMap<ProcName, Procedure>,
    pub entry: Option<ProcName>,
}

impl Module {
    /// Picks the default entry procedure: one named `main`, otherwise the only
    /// procedure of the module.
    pub fn infer_entry(&mut self) {
        self.entry = if let Some((name, _)) = self.procedures.get_key_value("main") {
            Some(name.clone())
        } else if self.procedures.len() == 1 {
            self.procedures.keys().next().cloned()
        } else {
            None
        };
    }

    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.get(name)
    }

    pub fn protocol(&self, name: &str) -> Option<&GlobalType> {
        self.protocols.get(name)
    }
}
