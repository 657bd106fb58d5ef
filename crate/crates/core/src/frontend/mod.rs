//! Textual form of the source language (`.cpl` files): parser and printer.
//!
//! ```text
//! extern fn mix(i64, i64) -> i64;
//! fn fib(n: i32) -> i32 {
//!     if (n <= 2) { return 1; }
//!     return fib(n - 1) + fib(n - 2);
//! }
//! ```
//!
//! Array elements are read and written as `ty[base, index]`.

mod lexer;
mod parser;
mod printer;

use std::fmt;

pub use parser::parse;
pub use printer::print;

/// Byte range plus the 1-based line and column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}:{}: ", self.span.line, self.span.column)?;
        match self.expected.as_slice() {
            [] => write!(f, "unexpected {}", self.found),
            [one] => write!(f, "expected {one}, found {}", self.found),
            many => write!(f, "expected one of {}, found {}", many.join(", "), self.found),
        }
    }
}
