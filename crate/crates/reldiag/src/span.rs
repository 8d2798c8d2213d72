//! Source locations attached to parsed syntax nodes.

use serde::{Deserialize, Serialize};

/// A half-open byte range into a source text, with the line/column of its start.
///
/// Lines and columns are 1-based. Synthesized nodes (produced by translators
/// rather than a parser) carry the default span.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, column: u32) -> Self {
        Span {
            start,
            end,
            line,
            column,
        }
    }

    /// True for spans created outside a parser.
    pub fn is_synthetic(&self) -> bool {
        *self == Span::default()
    }

    /// Smallest span covering both operands.
    pub fn merge(self, other: Span) -> Span {
        if self.is_synthetic() {
            return other;
        }
        if other.is_synthetic() {
            return self;
        }
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: self.line.min(other.line),
            column: if other.start < self.start {
                other.column
            } else {
                self.column
            },
        }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}
