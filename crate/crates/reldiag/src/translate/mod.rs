//! Constructive translations among the dialects and the diagram form, with
//! per-step traces and table-reference correspondences.
//!
//! A translation is *pattern-preserving* when it induces a bijection
//! between the table references of source and target; the trace records
//! that bijection whenever it exists. Translations without a direct
//! procedure compose along the spine trc <-> sql, trc <-> datalog,
//! trc <-> diagram, datalog <-> ra.

mod datalog_trc;
mod disjunction;
mod ra_datalog;
mod sql_trc;
mod trc_diagram;

pub use datalog_trc::{datalog_to_trc, trc_to_datalog};
pub use disjunction::eliminate_disjunction;
pub use ra_datalog::{datalog_to_ra, ra_to_datalog};
pub use sql_trc::{sql_to_trc, trc_to_sql};
pub use trc_diagram::{diagram_to_trc, trc_to_diagram, union_to_trc};

use serde::Serialize;

use crate::catalog::Schema;
use crate::{Dialect, Error, Query, Result};

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub description: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<String>,
}

/// A log of one translation run. `correspondence[i]` gives, for the i-th
/// table reference of the source signature, the index of the matching
/// reference in the target signature; it is present exactly when the
/// translation preserved the pattern.
#[derive(Clone, Debug, Serialize)]
pub struct TranslationTrace {
    pub source: Dialect,
    pub target: Dialect,
    pub steps: Vec<TraceStep>,
    pub correspondence: Option<Vec<usize>>,
}

impl TranslationTrace {
    pub fn new(source: Dialect, target: Dialect) -> Self {
        TranslationTrace {
            source,
            target,
            steps: Vec::new(),
            correspondence: None,
        }
    }

    pub fn push(&mut self, description: impl Into<String>, elements: Vec<String>) {
        self.steps.push(TraceStep {
            step: self.steps.len() + 1,
            description: description.into(),
            elements,
        });
    }

    /// Sequential composition of two traces.
    pub fn then(mut self, next: TranslationTrace) -> TranslationTrace {
        let offset = self.steps.len();
        for (i, mut s) in next.steps.into_iter().enumerate() {
            s.step = offset + i + 1;
            self.steps.push(s);
        }
        self.correspondence = match (self.correspondence, next.correspondence) {
            (Some(a), Some(b)) => Some(a.into_iter().map(|i| b[i]).collect()),
            _ => None,
        };
        self.target = next.target;
        self
    }
}

/// Translate a query into a target dialect, composing the direct
/// procedures where necessary. `use_antijoin` selects the antijoin form of
/// the algebra translation.
pub fn translate(
    q: &Query,
    to: Dialect,
    schema: &Schema,
    use_antijoin: bool,
) -> Result<(Query, TranslationTrace)> {
    if q.dialect() == to {
        let mut trace = TranslationTrace::new(q.dialect(), to);
        trace.push("source already in the target dialect", vec![]);
        trace.correspondence = Some((0..crate::pattern::signature(q).len()).collect());
        return Ok((q.clone(), trace));
    }
    let step = next_hop(q.dialect(), to)?;
    let (intermediate, trace) = translate_step(q, step, schema, use_antijoin)?;
    if step == to {
        return Ok((intermediate, trace));
    }
    let (result, rest) = translate(&intermediate, to, schema, use_antijoin)?;
    Ok((result, trace.then(rest)))
}

/// The spine: every dialect reaches every other through trc, except the
/// algebra which attaches through datalog.
fn next_hop(from: Dialect, to: Dialect) -> Result<Dialect> {
    use Dialect::*;
    Ok(match (from, to) {
        (Trc, Sql) | (Trc, Diagram) | (Trc, Datalog) => to,
        (Trc, Ra) => Datalog,
        (Sql, _) => Trc,
        (Diagram, _) => Trc,
        (Datalog, Trc) | (Datalog, Ra) => to,
        (Datalog, Sql) | (Datalog, Diagram) => Trc,
        (Ra, _) => Datalog,
        _ => {
            return Err(Error::Translate(format!(
                "no translation route from {from} to {to}"
            )))
        }
    })
}

fn translate_step(
    q: &Query,
    to: Dialect,
    schema: &Schema,
    use_antijoin: bool,
) -> Result<(Query, TranslationTrace)> {
    match (q, to) {
        (Query::Trc(t), Dialect::Diagram) => {
            let (d, trace) = trc_to_diagram(t, schema)?;
            Ok((Query::Diagram(d), trace))
        }
        (Query::Trc(t), Dialect::Sql) => {
            let (s, trace) = trc_to_sql(t, schema)?;
            Ok((Query::Sql(s), trace))
        }
        (Query::Trc(t), Dialect::Datalog) => {
            let (p, trace) = trc_to_datalog(t, schema)?;
            Ok((Query::Datalog(p), trace))
        }
        (Query::Sql(s), Dialect::Trc) => {
            let (t, trace) = sql_to_trc(s, schema)?;
            Ok((Query::Trc(t), trace))
        }
        (Query::Datalog(p), Dialect::Trc) => {
            let (t, trace) = datalog_to_trc(p, schema)?;
            Ok((Query::Trc(t), trace))
        }
        (Query::Datalog(p), Dialect::Ra) => {
            let (e, trace) = datalog_to_ra(p, schema, use_antijoin)?;
            Ok((Query::Ra(e), trace))
        }
        (Query::Ra(e), Dialect::Datalog) => {
            let (p, trace) = ra_to_datalog(e, schema)?;
            Ok((Query::Datalog(p), trace))
        }
        (Query::Diagram(d), Dialect::Trc) => {
            let report = crate::diagram::validate(d, schema);
            if !report.ok() {
                return Err(Error::InvalidDiagram(report.violations[0].message.clone()));
            }
            if d.cells.len() == 1 {
                let (t, trace) = diagram_to_trc(d, schema)?;
                Ok((Query::Trc(t), trace))
            } else {
                // A union diagram reads as a disjunction of its cells.
                let queries = union_to_trc(d, schema)?;
                let mut trace = TranslationTrace::new(Dialect::Diagram, Dialect::Trc);
                trace.push(
                    format!("translated {} union cells and joined them by disjunction", queries.len()),
                    vec![],
                );
                let output = queries[0].output.as_ref().map(|o| {
                    crate::ast::trc::TrcOutput {
                        name: o.name.clone(),
                        attrs: o
                            .attrs
                            .iter()
                            .map(|a| crate::ast::trc::OutputAttr {
                                name: a.name.clone(),
                                source: None,
                            })
                            .collect(),
                    }
                });
                let branches = queries
                    .into_iter()
                    .map(|q| splice_output_into_body(q))
                    .collect();
                Ok((
                    Query::Trc(crate::ast::trc::TrcQuery {
                        output,
                        body: crate::ast::trc::TrcFormula::Or(branches),
                    }),
                    trace,
                ))
            }
        }
        _ => Err(Error::Translate(format!(
            "no direct translation from {} to {to}",
            q.dialect()
        ))),
    }
}

/// Inline the resolved output linkage back into the body (used when several
/// cell queries are joined into one disjunctive query).
pub(crate) fn splice_output_into_body(q: crate::ast::trc::TrcQuery) -> crate::ast::trc::TrcFormula {
    use crate::ast::trc::{AttrRef, Operand, Predicate, TrcFormula};
    let Some(out) = &q.output else { return q.body };
    let mut linkage: Vec<TrcFormula> = Vec::new();
    for a in &out.attrs {
        if let Some(source) = &a.source {
            linkage.push(TrcFormula::Pred(Predicate {
                left: Operand::Attr(AttrRef {
                    var: out.name.clone(),
                    attr: a.name.clone(),
                    span: Default::default(),
                }),
                op: crate::ast::CompOp::Eq,
                right: Operand::Attr(source.clone()),
                span: Default::default(),
            }));
        }
    }
    match q.body {
        TrcFormula::Exists(vars, inner) => {
            let mut conjuncts = linkage;
            match *inner {
                TrcFormula::And(cs) => conjuncts.extend(cs),
                other => conjuncts.push(other),
            }
            TrcFormula::Exists(vars, Box::new(TrcFormula::and(conjuncts)))
        }
        other => {
            let mut conjuncts = linkage;
            conjuncts.push(other);
            TrcFormula::and(conjuncts)
        }
    }
}
