//! Concrete syntax: lexing, recursive-descent parsing with statement-level
//! error recovery, name resolution, and pretty-printing.

mod lexer;
mod pretty;
mod resolve;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use lexer::{tokenize, Tok, Token, KEYWORDS};
pub use pretty::{pretty_expr, pretty_global, pretty_module};

use crate::ast::*;
use crate::diagnostics::{sort_diagnostics, Code, Diagnostic};

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        SourceFile { path: path.into(), text: text.into() }
    }

    /// Reads a file, rejecting contents that are not valid UTF-8.
    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(SourceFile { path: path.to_path_buf(), text })
    }
}

/// Parses and resolves a module. Errors from every recoverable statement are
/// collected; the result is `Err` iff at least one error was reported.
pub fn parse_module(src: &SourceFile) -> Result<Module, Vec<Diagnostic>> {
    parse_str(&src.text)
}

pub fn parse_str(text: &str) -> Result<Module, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(text);
    let mut p = Parser::new(tokens);
    let raw = p.program();
    diags.append(&mut p.diags);
    let module = resolve::resolve(raw, &mut diags);
    if diags.iter().any(Diagnostic::is_error) {
        sort_diagnostics(&mut diags);
        Err(diags)
    } else {
        Ok(module)
    }
}

/// Marker for a reported syntax error; the caller recovers.
#[derive(Debug)]
pub(crate) struct Bail;

pub(crate) type PResult<T> = Result<T, Bail>;

/// Declarations as parsed, before peers are classified as processes or
/// external roles.
pub(crate) struct RawModule {
    pub protocols: Vec<(ProtocolName, GlobalType)>,
    pub procedures: Vec<Procedure>,
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    pub diags: Vec<Diagnostic>,
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0, diags: Vec::new() }
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    pub fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error<T>(&mut self, code: Code, span: Span, msg: impl Into<String>) -> PResult<T> {
        self.diags.push(Diagnostic::error(code, span, msg));
        Err(Bail)
    }

    pub fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            let found = self.peek().clone();
            let span = self.span();
            self.error(Code::Syntax, span, format!("expected {what}, found {found}"))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.bump().span)
        } else {
            let found = self.peek().clone();
            let span = self.span();
            self.error(Code::Syntax, span, format!("expected `{kw}`, found {found}"))
        }
    }

    /// A non-keyword identifier.
    pub fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            found => {
                let span = self.span();
                self.error(Code::Syntax, span, format!("expected {what}, found {found}"))
            }
        }
    }

    fn program(&mut self) -> RawModule {
        let mut raw = RawModule { protocols: Vec::new(), procedures: Vec::new() };
        while !self.at_eof() {
            let result = if self.is_keyword("protocol") {
                self.protocol_decl().map(|p| raw.protocols.push(p))
            } else if self.is_keyword("define") {
                self.procedure_decl().map(|p| raw.procedures.push(p))
            } else {
                let found = self.peek().clone();
                let span = self.span();
                self.error(Code::Syntax, span, format!("expected `protocol` or `define`, found {found}"))
            };
            if result.is_err() {
                self.recover_top_level();
            }
        }
        raw
    }

    fn recover_top_level(&mut self) {
        self.bump();
        while !self.at_eof() && !self.is_keyword("protocol") && !self.is_keyword("define") {
            self.bump();
        }
    }

    fn protocol_decl(&mut self) -> PResult<(ProtocolName, GlobalType)> {
        self.expect_keyword("protocol")?;
        let (name, span) = self.ident("protocol name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let g = self.global_type()?;
        self.expect(Tok::RBrace, "`}` closing the protocol")?;
        Ok((ProtocolName::with_span(name, span), g))
    }

    fn global_type(&mut self) -> PResult<GlobalType> {
        if self.is_keyword("end") {
            self.bump();
            return Ok(GlobalType::End);
        }
        let (from, from_span) = self.ident("role")?;
        self.expect(Tok::Arrow, "`->`")?;
        let (to, to_span) = self.ident("role")?;
        self.expect(Tok::Colon, "`:`")?;
        if from == to {
            return self.error(Code::Syntax, to_span, format!("interaction from `{from}` to itself"));
        }
        let mut branches = BTreeMap::new();
        if self.eat(&Tok::LBrace) {
            loop {
                self.global_branch(&mut branches)?;
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrace, "`,` or `}`")?;
        } else {
            self.global_branch(&mut branches)?;
        }
        Ok(GlobalType::Interaction {
            from: RoleId::with_span(from, from_span),
            to: RoleId::with_span(to, to_span),
            branches,
        })
    }

    fn global_branch(&mut self, branches: &mut BTreeMap<OpName, Branch<GlobalType>>) -> PResult<()> {
        let (label, span) = self.ident("operation label")?;
        self.expect(Tok::LParen, "`(`")?;
        let payload = self.payload_type()?;
        self.expect(Tok::RParen, "`)`")?;
        let cont = if self.eat(&Tok::Semi) {
            if matches!(self.peek(), Tok::RBrace | Tok::Comma) {
                GlobalType::End
            } else {
                self.global_type()?
            }
        } else {
            GlobalType::End
        };
        let op = OpName::with_span(label, span);
        if branches.contains_key(&op) {
            return self.error(Code::Syntax, span, format!("duplicate branch label `{op}`"));
        }
        branches.insert(op, Branch { payload, cont });
        Ok(())
    }

    pub fn payload_type(&mut self) -> PResult<PayloadType> {
        match self.peek().clone() {
            Tok::Ident(s) => match PayloadType::from_keyword(&s) {
                Some(t) => {
                    self.bump();
                    Ok(t)
                }
                None => {
                    let span = self.span();
                    self.error(
                        Code::Syntax,
                        span,
                        format!("unknown payload type `{s}` (expected string, int, bool or void)"),
                    )
                }
            },
            found => {
                let span = self.span();
                self.error(Code::Syntax, span, format!("expected payload type, found {found}"))
            }
        }
    }

    fn procedure_decl(&mut self) -> PResult<Procedure> {
        self.expect_keyword("define")?;
        let (name, span) = self.ident("procedure name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut processes = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (p, s) = self.ident("process parameter")?;
                processes.push(ProcessId::with_span(p, s));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let mut sessions = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                sessions.push(self.session_decl()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)` closing the session list")?;
        }
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.block_body();
        self.expect(Tok::RBrace, "`}` closing the procedure body")?;
        Ok(Procedure { name: ProcName::with_span(name, span), processes, sessions, body })
    }

    fn session_decl(&mut self) -> PResult<SessionDecl> {
        let (name, span) = self.ident("session name")?;
        self.expect(Tok::LBracket, "`[`")?;
        let (proto, proto_span) = self.ident("protocol name")?;
        self.expect(Tok::Colon, "`:`")?;
        let mut roles = Vec::new();
        loop {
            let (who, who_span) = self.ident("process or external role")?;
            self.expect(Tok::LBracket, "`[`")?;
            let (role, role_span) = self.ident("role")?;
            self.expect(Tok::RBracket, "`]`")?;
            roles.push(RoleBinding {
                participant: Peer::Process(ProcessId::with_span(who, who_span)),
                role: RoleId::with_span(role, role_span),
            });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBracket, "`]`")?;
        Ok(SessionDecl {
            name: SessionId::with_span(name, span),
            protocol: ProtocolName::with_span(proto, proto_span),
            roles,
        })
    }

    /// Statements up to (not including) the closing `}`. A statement that
    /// fails to parse is skipped up to the next `;` or `}` at its own nesting
    /// depth.
    fn block_body(&mut self) -> Choreography {
        let mut stmts = Vec::new();
        loop {
            if matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                break;
            }
            match self.statement() {
                Ok(s) => {
                    let is_cond = matches!(s.kind, StmtKind::Cond(_));
                    stmts.push(s);
                    if self.eat(&Tok::Semi) || is_cond {
                        continue;
                    }
                    if !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                        let found = self.peek().clone();
                        let span = self.span();
                        let _ = self.error::<()>(Code::Syntax, span, format!("expected `;` or `}}`, found {found}"));
                        self.recover_statement();
                    }
                }
                Err(Bail) => self.recover_statement(),
            }
        }
        Choreography::new(stmts)
    }

    fn recover_statement(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace if depth == 0 => return,
                Tok::RBrace => depth -= 1,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.is_keyword("if") {
            return self.conditional();
        }
        let kind = match (self.peek_at(1), self.peek_at(3)) {
            (Tok::LParen, _) => StmtKind::Call(self.call()?),
            (Tok::Dot, Tok::Assign) if matches!(self.peek_at(2), Tok::Ident(_)) => StmtKind::Assign(self.assign()?),
            _ => self.communication()?,
        };
        Ok(Stmt { kind, span })
    }

    fn conditional(&mut self) -> PResult<Stmt> {
        let span = self.expect_keyword("if")?;
        self.expect(Tok::LParen, "`(`")?;
        let guard = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::At, "`@`")?;
        let (at, at_span) = self.ident("deciding process")?;
        self.expect(Tok::LBrace, "`{`")?;
        let then_branch = self.block_body();
        self.expect(Tok::RBrace, "`}`")?;
        let else_branch = if self.is_keyword("else") {
            self.bump();
            self.expect(Tok::LBrace, "`{`")?;
            let b = self.block_body();
            self.expect(Tok::RBrace, "`}`")?;
            b
        } else {
            Choreography::default()
        };
        Ok(Stmt {
            kind: StmtKind::Cond(Cond { at: ProcessId::with_span(at, at_span), guard, then_branch, else_branch }),
            span,
        })
    }

    fn call(&mut self) -> PResult<Call> {
        let (name, span) = self.ident("procedure name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut processes = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (p, s) = self.ident("process argument")?;
                processes.push(ProcessId::with_span(p, s));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Call { proc_name: ProcName::with_span(name, span), processes, sessions: Vec::new() })
    }

    fn assign(&mut self) -> PResult<Assign> {
        let (at, at_span) = self.ident("process")?;
        self.expect(Tok::Dot, "`.`")?;
        let (var, var_span) = self.ident("variable")?;
        self.expect(Tok::Assign, "`=`")?;
        let expr = self.expr()?;
        Ok(Assign { at: ProcessId::with_span(at, at_span), var: VarName::with_span(var, var_span), expr })
    }

    fn communication(&mut self) -> PResult<StmtKind> {
        let (from, from_span) = self.ident("sender")?;
        let expr = if self.eat(&Tok::Dot) { Some(self.expr()?) } else { None };
        self.expect(Tok::Arrow, "`->`")?;
        let (to, to_span) = self.ident("receiver")?;
        let var = if self.eat(&Tok::Dot) {
            let (v, s) = self.ident("variable")?;
            Some(VarName::with_span(v, s))
        } else {
            None
        };
        self.expect(Tok::Colon, "`:`")?;
        let (op, op_span) = self.ident("operation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let (session, session_span) = self.ident("session")?;
        self.expect(Tok::RParen, "`)`")?;
        let from = Peer::Process(ProcessId::with_span(from, from_span));
        let to = Peer::Process(ProcessId::with_span(to, to_span));
        let op = OpName::with_span(op, op_span);
        let session = SessionId::with_span(session, session_span);
        Ok(if expr.is_none() && var.is_none() {
            StmtKind::Selection(Selection { from, to, op, session })
        } else {
            StmtKind::ValueComm(ValueComm { from, expr, to, var, op, session })
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.expr_bp(0)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Plus => BinOp::Add,
            Tok::PlusPlus => BinOp::Concat,
            Tok::AndAnd => BinOp::And,
            Tok::OrOr => BinOp::Or,
            _ => return None,
        })
    }

    fn expr_bp(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() <= min_prec {
                break;
            }
            let span = self.bump().span;
            let rhs = self.expr_bp(op.precedence())?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Bang {
            let span = self.bump().span;
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(e)), span });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                ExprKind::Lit(Value::Int(i))
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Lit(Value::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                ExprKind::Lit(Value::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "unit" => {
                self.bump();
                ExprKind::Lit(Value::Unit)
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => {
                let (name, name_span) = self.ident("builtin name")?;
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                ExprKind::Call(BuiltinName::with_span(name, name_span), args)
            }
            Tok::Ident(_) => {
                let (name, s) = self.ident("expression")?;
                ExprKind::Var(VarName::with_span(name, s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(e);
            }
            found => {
                return self.error(Code::Syntax, span, format!("expected expression, found {found}"));
            }
        };
        Ok(Expr { kind, span })
    }
}

/// Parses a standalone expression (used by scenario files and tests).
pub fn parse_expr(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(text);
    let mut p = Parser::new(tokens);
    let e = p.expr();
    if e.is_ok() && !p.at_eof() {
        let found = p.peek().clone();
        let span = p.span();
        let _ = p.error::<()>(Code::Syntax, span, format!("unexpected {found} after expression"));
    }
    diags.append(&mut p.diags);
    match e {
        Ok(e) if diags.is_empty() => Ok(e),
        _ => Err(diags),
    }
}
