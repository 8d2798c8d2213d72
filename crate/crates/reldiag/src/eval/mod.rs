//! Set-semantics evaluation of all dialects over finite databases, plus the
//! bounded logical-equivalence oracle.
//!
//! Boolean queries return a zero-attribute relation that is nonempty iff
//! the sentence holds. Evaluation is correctness-first: the oracle only
//! ever sees tiny databases.

mod datalog;
mod oracle;
mod ra;
mod sql;
mod trc;

pub use oracle::{equivalent_bounded, Bound, EquivalenceVerdict};

use std::collections::BTreeSet;

use crate::catalog::{Database, Schema, Sort, Value};
use crate::{Error, Query, Result};

/// A query answer: an ordered attribute list and a set of tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultRelation {
    pub attrs: Vec<(String, Sort)>,
    pub tuples: BTreeSet<Vec<Value>>,
}

impl ResultRelation {
    pub fn boolean(truth: bool) -> ResultRelation {
        let mut tuples = BTreeSet::new();
        if truth {
            tuples.insert(Vec::new());
        }
        ResultRelation {
            attrs: Vec::new(),
            tuples,
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn truth(&self) -> bool {
        !self.tuples.is_empty()
    }
}

/// Evaluate a query of any dialect. Diagrams evaluate through their
/// calculus reading, one union cell at a time.
pub fn evaluate(q: &Query, db: &Database) -> Result<ResultRelation> {
    match q {
        Query::Trc(t) => trc::eval_trc(t, db),
        Query::Sql(s) => sql::eval_sql(s, db),
        Query::Datalog(p) => datalog::eval_datalog(p, db),
        Query::Ra(e) => ra::eval_ra(e, db),
        Query::Diagram(d) => {
            let queries = crate::translate::union_to_trc(d, &db.schema)?;
            let mut result: Option<ResultRelation> = None;
            for q in queries {
                let part = trc::eval_trc(&q, db)?;
                match &mut result {
                    None => result = Some(part),
                    Some(acc) => {
                        if acc.attrs.len() != part.attrs.len() {
                            return Err(Error::Eval(
                                "union cells produced different arities".into(),
                            ));
                        }
                        acc.tuples.extend(part.tuples);
                    }
                }
            }
            result.ok_or_else(|| Error::Eval("diagram has no cells".into()))
        }
    }
}

/// The output attributes (names and sorts) a query produces. Boolean
/// queries have an empty list.
pub fn output_schema_of(q: &Query, schema: &Schema) -> Result<Vec<(String, Sort)>> {
    match q {
        Query::Trc(t) => trc::trc_output_schema(t, schema),
        Query::Sql(s) => sql::sql_output_schema(s, schema),
        Query::Datalog(p) => datalog::datalog_output_schema(p, schema),
        Query::Ra(e) => {
            let cols = crate::ast::ra::output_schema(e, schema)?;
            Ok(cols.into_iter().map(|c| (c.attr, c.sort)).collect())
        }
        Query::Diagram(d) => {
            let cell = d
                .cells
                .first()
                .ok_or_else(|| Error::Eval("diagram has no cells".into()))?;
            match &cell.output {
                None => Ok(Vec::new()),
                Some(out) => out
                    .attrs
                    .iter()
                    .map(|a| {
                        let table = cell
                            .table(&a.link.0)
                            .ok_or_else(|| Error::Eval("dangling output link".into()))?;
                        let cellref = table.cells.get(a.link.1).ok_or_else(|| {
                            Error::Eval("output link cell out of range".into())
                        })?;
                        let sort = schema.attr_sort(&table.rel, &cellref.attr)?;
                        Ok((a.name.clone(), sort))
                    })
                    .collect(),
            }
        }
    }
}

/// Constants appearing anywhere in a query, split by sort.
pub fn query_constants(q: &Query) -> (BTreeSet<i64>, BTreeSet<String>) {
    let mut ints = BTreeSet::new();
    let mut strs = BTreeSet::new();
    let mut add = |v: &Value| match v {
        Value::Int(n) => {
            ints.insert(*n);
        }
        Value::Str(s) => {
            strs.insert(s.clone());
        }
    };
    match q {
        Query::Trc(t) => trc::collect_constants(&t.body, &mut add),
        Query::Sql(s) => sql::collect_constants(s, &mut add),
        Query::Datalog(p) => datalog::collect_constants(p, &mut add),
        Query::Ra(e) => ra::collect_constants(e, &mut add),
        Query::Diagram(d) => {
            for cell in &d.cells {
                for t in &cell.tables {
                    for c in &t.cells {
                        if let Some(sel) = &c.sel {
                            add(&sel.value);
                        }
                    }
                }
            }
        }
    }
    (ints, strs)
}
