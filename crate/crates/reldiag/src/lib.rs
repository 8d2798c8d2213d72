//! A toolkit for the non-disjunctive fragment of relational query languages.
//!
//! The crate parses four query dialects (tuple relational calculus, SQL,
//! non-recursive Datalog with negation, and relational algebra, each without
//! disjunction), translates among them and to/from a diagrammatic
//! representation of nested negation scopes, decides pattern isomorphism via
//! query dissociation backed by a bounded logical-equivalence oracle, and
//! renders validated diagrams as SVG or DOT.
//!
//! Everything is an immutable value and every operation is a pure function,
//! so all types can be shared freely across threads.

pub mod ast;
pub mod catalog;
pub mod diagram;
pub mod eval;
pub mod parse;
pub mod pattern;
pub mod render;
pub mod span;
pub mod translate;

use catalog::Sort;
use span::Span;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {span}: {message}")]
    Parse { message: String, span: Span },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("null value on line {line}: input databases must not contain nulls")]
    NullValue { line: usize },

    #[error("cannot compare {left} with {right}")]
    CrossSortComparison { left: Sort, right: Sort },

    #[error("fragment violation: {0}")]
    Fragment(String),

    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("translation error: {0}")]
    Translate(String),

    #[error("{0}")]
    Pattern(String),

    #[error("bound exceeded: {0}")]
    BoundExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// The four textual dialects plus the diagram representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Trc,
    Sql,
    Datalog,
    Ra,
    Diagram,
}

impl std::fmt::Display for Dialect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dialect::Trc => write!(f, "trc"),
            Dialect::Sql => write!(f, "sql"),
            Dialect::Datalog => write!(f, "datalog"),
            Dialect::Ra => write!(f, "ra"),
            Dialect::Diagram => write!(f, "diagram"),
        }
    }
}

impl std::str::FromStr for Dialect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trc" => Ok(Dialect::Trc),
            "sql" => Ok(Dialect::Sql),
            "datalog" => Ok(Dialect::Datalog),
            "ra" => Ok(Dialect::Ra),
            "diagram" => Ok(Dialect::Diagram),
            other => Err(Error::Parse {
                message: format!("unknown dialect {other}"),
                span: Span::default(),
            }),
        }
    }
}

/// A query in any supported representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Trc(ast::trc::TrcQuery),
    Sql(ast::sql::SqlQuery),
    Datalog(ast::datalog::DatalogProgram),
    Ra(ast::ra::RaExpr),
    Diagram(diagram::Diagram),
}

impl Query {
    pub fn dialect(&self) -> Dialect {
        match self {
            Query::Trc(_) => Dialect::Trc,
            Query::Sql(_) => Dialect::Sql,
            Query::Datalog(_) => Dialect::Datalog,
            Query::Ra(_) => Dialect::Ra,
            Query::Diagram(_) => Dialect::Diagram,
        }
    }
}
