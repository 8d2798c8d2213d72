//! Concrete-syntax parsers and pretty-printers for the four dialects.
//!
//! All parsers share one lexer and produce ASTs with source spans. The
//! printers are deterministic and satisfy `parse(print(x)) == x` up to
//! spans. Grammars are documented in `docs/grammars.md`.

mod datalog;
mod lexer;
mod ra;
mod sql;
mod trc;

pub use datalog::{normalize_anon_vars, parse_datalog, print_datalog};
pub use ra::{parse_ra, print_ra};
pub use sql::{parse_sql, print_sql};
pub use trc::{parse_trc, print_trc};

/// Span-zeroing helpers so parsed and synthesized trees compare equal.
pub mod strip {
    pub use super::datalog::strip_spans as datalog;
    pub use super::ra::strip_spans as ra;
    pub use super::sql::strip_spans as sql;
    pub use super::trc::strip_spans as trc;
}

use crate::catalog::Schema;
use crate::span::Span;
use crate::{Dialect, Error, Query, Result};

pub(crate) use lexer::{Cursor, Token, TokenKind};

/// Parse a query in the given dialect. The diagram "dialect" decodes the
/// JSON document format.
pub fn parse(dialect: Dialect, text: &str) -> Result<Query> {
    match dialect {
        Dialect::Trc => Ok(Query::Trc(parse_trc(text)?)),
        Dialect::Sql => Ok(Query::Sql(parse_sql(text)?)),
        Dialect::Datalog => Ok(Query::Datalog(parse_datalog(text)?)),
        Dialect::Ra => Ok(Query::Ra(parse_ra(text)?)),
        Dialect::Diagram => Ok(Query::Diagram(crate::diagram::from_json(text)?)),
    }
}

/// Render a query in its own dialect.
pub fn print(q: &Query) -> String {
    match q {
        Query::Trc(t) => print_trc(t),
        Query::Sql(s) => print_sql(s),
        Query::Datalog(p) => print_datalog(p),
        Query::Ra(e) => print_ra(e),
        Query::Diagram(d) => crate::diagram::to_json(d),
    }
}

/// A query source file: optional `relation ...` header lines followed by the
/// query text. Returns the declared schema (possibly empty) and the body.
pub fn split_schema_header(text: &str) -> Result<(Schema, String)> {
    let mut schema_lines = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("relation ") && body.trim().is_empty() {
            schema_lines.push(trimmed.to_string());
        } else if trimmed.starts_with('#') && body.trim().is_empty() {
            // comment in the header section
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut schema = Schema::new();
    if !schema_lines.is_empty() {
        let header = schema_lines.join("\n");
        let db = crate::catalog::load_database(&header)?;
        schema = db.schema;
    }
    Ok((schema, body))
}

pub(crate) fn err_at(span: Span, message: impl Into<String>) -> Error {
    Error::Parse {
        message: message.into(),
        span,
    }
}
