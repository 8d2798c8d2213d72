//! SQL abstract syntax for the guarded, set-semantics fragment.
//!
//! The shape follows the fragment grammar: a non-Boolean query is a
//! `SELECT DISTINCT` block, Boolean queries are `SELECT NOT (P)` or
//! `SELECT [NOT] EXISTS (Q)` heads. `OR` in predicates and top-level
//! `UNION` are accepted by the parser as the disjunctive extension and are
//! flagged by classification; the disjunction-elimination rewrites remove
//! them.

use crate::ast::CompOp;
use crate::catalog::Value;
use crate::span::Span;

/// `[table.]column`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColRef {
    pub table: Option<String>,
    pub column: String,
    pub span: Span,
}

impl std::fmt::Display for ColRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.table {
            Some(t) => write!(f, "{}.{}", t, self.column),
            None => write!(f, "{}", self.column),
        }
    }
}

/// Right-hand side of a comparison: column or constant.
#[derive(Clone, Debug, PartialEq)]
pub enum SqlOperand {
    Col(ColRef),
    Const(Value),
}

/// `FROM` list entry, `R [AS alias]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
    pub span: Span,
}

impl FromItem {
    /// The name this table is referenced by in column qualifiers.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quant {
    All,
    Any,
}

/// A predicate of the `WHERE` clause.
#[derive(Clone, Debug, PartialEq)]
pub enum SqlPred {
    And(Vec<SqlPred>),
    /// Disjunctive extension only.
    Or(Vec<SqlPred>),
    Cmp {
        left: ColRef,
        op: CompOp,
        right: SqlOperand,
        span: Span,
    },
    /// `NOT ( P )`
    Not(Box<SqlPred>, Span),
    /// `[NOT] EXISTS ( Q )`
    Exists {
        negated: bool,
        query: Box<SelectQuery>,
        span: Span,
    },
    /// `C [NOT] IN ( Q )`
    In {
        negated: bool,
        col: ColRef,
        query: Box<SelectQuery>,
        span: Span,
    },
    /// `C O ALL|ANY ( Q )`
    Quantified {
        col: ColRef,
        op: CompOp,
        quant: Quant,
        query: Box<SelectQuery>,
        span: Span,
    },
}

impl SqlPred {
    pub fn and(mut preds: Vec<SqlPred>) -> SqlPred {
        if preds.len() == 1 {
            preds.pop().unwrap()
        } else {
            SqlPred::And(preds)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectCols {
    Star,
    List(Vec<ColRef>),
}

/// A `SELECT ... FROM ... [WHERE ...]` block.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectQuery {
    pub distinct: bool,
    pub columns: SelectCols,
    pub from: Vec<FromItem>,
    pub where_clause: Option<SqlPred>,
    pub span: Span,
}

/// A complete SQL query.
#[derive(Clone, Debug, PartialEq)]
pub enum SqlQuery {
    /// Non-Boolean query.
    Select(SelectQuery),
    /// Boolean head `SELECT NOT (P)`.
    SelectNot(SqlPred, Span),
    /// Boolean head `SELECT [NOT] EXISTS (Q)`.
    SelectExists {
        negated: bool,
        query: Box<SelectQuery>,
        span: Span,
    },
    /// `UNION` of non-Boolean queries (disjunctive extension).
    Union(Vec<SqlQuery>),
}

impl SqlQuery {
    pub fn is_boolean(&self) -> bool {
        matches!(self, SqlQuery::SelectNot(..) | SqlQuery::SelectExists { .. })
    }
}
