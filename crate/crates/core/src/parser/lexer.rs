use std::fmt;

use crate::ast::Span;
use crate::diagnostics::{Code, Diagnostic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    At,
    Assign,
    EqEq,
    Ne,
    Lt,
    Le,
    Plus,
    PlusPlus,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(i) => return write!(f, "`{i}`"),
            Tok::Str(_) => "string literal",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Dot => "`.`",
            Tok::Arrow => "`->`",
            Tok::At => "`@`",
            Tok::Assign => "`=`",
            Tok::EqEq => "`==`",
            Tok::Ne => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Plus => "`+`",
            Tok::PlusPlus => "`++`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Bang => "`!`",
            Tok::Eof => "end of file",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub const KEYWORDS: &[&str] = &["protocol", "define", "if", "else", "end", "true", "false", "unit"];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
}

/// Splits source text into tokens. Lexical errors are reported and the
/// offending character skipped, so the token stream is always usable.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lx = Lexer { src, pos: 0, line: 1, col: 1, tokens: Vec::new(), diags: Vec::new() };
    lx.run();
    (lx.tokens, lx.diags)
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: (usize, u32, u32)) -> Span {
        Span::new(start.1, start.2, start.0 as u32, (self.pos - start.0) as u32)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn push(&mut self, tok: Tok, start: (usize, u32, u32)) {
        let span = self.span_from(start);
        self.tokens.push(Token { tok, span });
    }

    fn error(&mut self, start: (usize, u32, u32), msg: impl Into<String>) {
        let span = self.span_from(start);
        self.diags.push(Diagnostic::error(Code::Lexical, span, msg));
    }

    fn run(&mut self) {
        while let Some(c) = self.peek() {
            let start = self.mark();
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '/' if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '/' if self.peek2() == Some('*') => self.block_comment(start),
                c if c.is_ascii_alphabetic() || c == '_' => {
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                        self.bump();
                    }
                    let text = self.src[start.0..self.pos].to_string();
                    self.push(Tok::Ident(text), start);
                }
                c if c.is_ascii_digit() => self.number(start),
                '-' if matches!(self.peek2(), Some(d) if d.is_ascii_digit()) => {
                    self.bump();
                    self.number(start);
                }
                '"' => self.string(start),
                _ => self.symbol(c, start),
            }
        }
        let start = self.mark();
        self.push(Tok::Eof, start);
    }

    fn block_comment(&mut self, start: (usize, u32, u32)) {
        self.bump();
        self.bump();
        loop {
            match self.bump() {
                None => {
                    self.error(start, "unterminated block comment");
                    return;
                }
                Some('*') if self.peek() == Some('/') => {
                    self.bump();
                    return;
                }
                Some(_) => {}
            }
        }
    }

    fn number(&mut self, start: (usize, u32, u32)) {
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        match self.src[start.0..self.pos].parse::<i64>() {
            Ok(n) => self.push(Tok::Int(n), start),
            Err(_) => self.error(start, "integer literal out of range"),
        }
    }

    fn string(&mut self, start: (usize, u32, u32)) {
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    self.error(start, "unterminated string literal");
                    return;
                }
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    other => {
                        let shown = other.map(String::from).unwrap_or_default();
                        self.error(start, format!("unknown escape sequence `\\{shown}`"));
                    }
                },
                Some(c) => text.push(c),
            }
        }
        self.push(Tok::Str(text), start);
    }

    fn symbol(&mut self, c: char, start: (usize, u32, u32)) {
        let two = |lx: &Self, next: char| lx.peek2() == Some(next);
        let (tok, width) = match c {
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            ':' => (Tok::Colon, 1),
            '.' => (Tok::Dot, 1),
            '@' => (Tok::At, 1),
            '-' if two(self, '>') => (Tok::Arrow, 2),
            '=' if two(self, '=') => (Tok::EqEq, 2),
            '=' => (Tok::Assign, 1),
            '!' if two(self, '=') => (Tok::Ne, 2),
            '!' => (Tok::Bang, 1),
            '<' if two(self, '=') => (Tok::Le, 2),
            '<' => (Tok::Lt, 1),
            '+' if two(self, '+') => (Tok::PlusPlus, 2),
            '+' => (Tok::Plus, 1),
            '&' if two(self, '&') => (Tok::AndAnd, 2),
            '|' if two(self, '|') => (Tok::OrOr, 2),
            _ => {
                self.bump();
                self.error(start, format!("unexpected character `{c}`"));
                return;
            }
        };
        for _ in 0..width {
            self.bump();
        }
        self.push(tok, start);
    }
}
