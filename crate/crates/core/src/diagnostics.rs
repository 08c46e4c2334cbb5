//! Source-located error reports shared by the parser and the typechecker.

use std::fmt;

use crate::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Stable diagnostic codes. `E0xx` come from parsing and name resolution,
/// `E1xx` from typechecking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    /// E001
    Lexical,
    /// E002
    Syntax,
    /// E003
    DuplicateName,
    /// E004
    Unbound,
    /// E101
    RoleMismatch,
    /// E102
    UnknownLabel,
    /// E103
    PayloadMismatch,
    /// E104
    ProtocolNotConsumed,
    /// E105
    KnowledgeOfChoice,
    /// E106
    UnboundVariable,
    /// E107
    GuardNotBool,
    /// E108
    UnprojectableProtocol,
    /// E109
    CallMismatch,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Lexical => "E001",
            Code::Syntax => "E002",
            Code::DuplicateName => "E003",
            Code::Unbound => "E004",
            Code::RoleMismatch => "E101",
            Code::UnknownLabel => "E102",
            Code::PayloadMismatch => "E103",
            Code::ProtocolNotConsumed => "E104",
            Code::KnowledgeOfChoice => "E105",
            Code::UnboundVariable => "E106",
            Code::GuardNotBool => "E107",
            Code::UnprojectableProtocol => "E108",
            Code::CallMismatch => "E109",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code, message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: error[CODE]: message`
    pub fn render(&self, path: &str) -> String {
        format!("{path}:{}:{}: {}[{}]: {}", self.span.line, self.span.col, self.severity, self.code, self.message)
    }

    /// Same layout as [`Diagnostic::render`] with ANSI colouring of the
    /// severity tag.
    pub fn render_colored(&self, path: &str) -> String {
        let color = match self.severity {
            Severity::Error => "\x1b[1;31m",
            Severity::Warning => "\x1b[1;33m",
        };
        format!(
            "\x1b[1m{path}:{}:{}:\x1b[0m {color}{}[{}]\x1b[0m: {}",
            self.span.line, self.span.col, self.severity, self.code, self.message
        )
    }
}

/// Orders diagnostics by source position, then code.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| (a.span.line, a.span.col, a.code).cmp(&(b.span.line, b.span.col, b.code)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_layout() {
        let d = Diagnostic::error(Code::Unbound, Span::new(4, 3, 0, 1), "sender and receiver are both `c`");
        assert_eq!(d.render("broken.chor"), "broken.chor:4:3: error[E004]: sender and receiver are both `c`");
    }
}
