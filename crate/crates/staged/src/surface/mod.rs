//! Concrete syntax: reading `.sl` and `.core` files and printing terms.

use std::fmt;

use crate::kernel_syntax::Span;

mod core_syntax;
mod lexer;
mod parser;
mod print;
mod tree;

pub use core_syntax::{parse_core_program, parse_core_term, CoreProgram};
pub use parser::{parse_program, parse_type, Mode};
pub use print::{
    print_compile_type, print_core, print_core_with, print_expr, print_nf, print_nf_with, print_pretype,
    print_run_type, print_source, print_type, CoreStyle,
};
pub use tree::{core_tree, nf_tree, source_tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A positioned message about a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub column: u32,
    /// Variables involved in the problem, when there are any.
    pub offending: Vec<String>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), line: span.line, column: span.column, offending: vec![] }
    }

    pub fn with_offending(mut self, vars: Vec<String>) -> Self {
        self.offending = vars;
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "severity": match self.severity { Severity::Error => "error", Severity::Warning => "warning" },
            "message": self.message,
            "line": self.line,
            "column": self.column,
            "offending": self.offending,
        })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)?;
        if !self.offending.is_empty() {
            write!(f, " [{}]", self.offending.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostic {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handler_round_trip_prints_one_clause_per_line() {
        let src = "effect a : Nat -> Nat\neffect b : Nat -> Nat\n\
                   handle handle perform a(1) with { return(x) -> return x ; b(v, k) -> continue k v } \
                   with { return(y) -> return y ; a(v, k) -> continue k v }";
        let p = parse_program(src).unwrap();
        let text = print_source(&p);
        assert!(text.lines().any(|l| l.trim_start().starts_with("a(v, k) ->")), "{text}");
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn shadowed_names_print_as_written() {
        let src = "do x <- return 1 in do x <- return x in return x";
        let p = parse_program(src).unwrap();
        let text = print_source(&p);
        assert_eq!(text.matches("do x").count(), 2);
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn splice_identity_round_trip() {
        let p = parse_program("$(do x <- <<return 0>> in (fun z -> return z) x)").unwrap();
        assert_eq!(parse_program(&print_source(&p)).unwrap(), p);
    }
}
