//! Translations between the SQL fragment and the calculus.
//!
//! SQL to calculus rewrites membership and quantified subqueries into
//! existential subqueries (pushing the linkage predicate into the nested
//! scope, complementing the operator for ALL), unnests non-negated
//! existentials, and then maps clauses one to one. The reverse direction
//! prints canonical scopes as nested `NOT EXISTS` blocks; a negation scope
//! without tables becomes a `NOT (...)` predicate group.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::sql::{
    ColRef, FromItem, Quant, SelectCols, SelectQuery, SqlOperand, SqlPred, SqlQuery,
};
use crate::ast::trc::{
    AttrRef, Operand, OutputAttr, Predicate, Quantifier, ScopeTree, TrcFormula, TrcOutput,
    TrcQuery,
};
use crate::ast::CompOp;
use crate::catalog::Schema;
use crate::translate::TranslationTrace;
use crate::{Dialect, Error, Query, Result};

pub fn sql_to_trc(q: &SqlQuery, schema: &Schema) -> Result<(TrcQuery, TranslationTrace)> {
    let mut trace = TranslationTrace::new(Dialect::Sql, Dialect::Trc);
    let guard_report = crate::ast::fragment::check_guarded(&Query::Sql(q.clone()), schema);
    if !guard_report.guarded {
        return Err(Error::Fragment(guard_report.violations[0].message.clone()));
    }
    let mut ctx = SqlCtx {
        schema,
        used_vars: BTreeSet::new(),
        subquery_rewrites: 0,
        provenance: Vec::new(),
    };
    let query = match q {
        SqlQuery::Select(sq) => {
            let (vars, formula, env) = ctx.translate_block(sq, &Env::new())?;
            let out_name = ctx.fresh_var("q");
            let output = ctx.output_from_select(sq, &env, &out_name)?;
            TrcQuery {
                output: Some(output),
                body: TrcFormula::Exists(vars, Box::new(formula)),
            }
        }
        SqlQuery::SelectNot(p, _) => {
            let (preds, _) = ctx.translate_preds(p, &Env::new())?;
            TrcQuery {
                output: None,
                body: TrcFormula::Not(Box::new(TrcFormula::and(preds))),
            }
        }
        SqlQuery::SelectExists { negated, query, .. } => {
            let (vars, formula, _) = ctx.translate_block(query, &Env::new())?;
            let body = TrcFormula::Exists(vars, Box::new(formula));
            TrcQuery {
                output: None,
                body: if *negated {
                    TrcFormula::Not(Box::new(body))
                } else {
                    body
                },
            }
        }
        SqlQuery::Union(parts) => {
            let translated = parts
                .iter()
                .map(|p| sql_to_trc(p, schema).map(|(q, _)| q))
                .collect::<Result<Vec<_>>>()?;
            let first = translated
                .first()
                .ok_or_else(|| Error::Translate("empty UNION".into()))?;
            let output = first.output.as_ref().map(|o| TrcOutput {
                name: o.name.clone(),
                attrs: o
                    .attrs
                    .iter()
                    .map(|a| OutputAttr {
                        name: a.name.clone(),
                        source: None,
                    })
                    .collect(),
            });
            let branches = translated
                .into_iter()
                .map(crate::translate::splice_output_into_body)
                .collect();
            let q = TrcQuery {
                output,
                body: TrcFormula::Or(branches),
            };
            trace.push("joined UNION members into a disjunction", vec![]);
            return Ok((q, trace));
        }
    };
    if ctx.subquery_rewrites > 0 {
        trace.push(
            format!(
                "replaced {} membership/quantified subqueries with existential subqueries",
                ctx.subquery_rewrites
            ),
            vec![],
        );
    }
    trace.push("unnested existential quantifiers into scope heads", vec![]);
    let (query, correspondence) = if query.body.contains_or() {
        (query, None)
    } else {
        let canonical = crate::ast::fragment::canonicalize_trc(&query)?;
        // FROM items were turned into quantifiers in signature order, so the
        // canonical form keeps the identity correspondence.
        let n = canonical.quantifiers().len();
        (canonical, Some((0..n).collect()))
    };
    trace.push("mapped clauses onto the calculus syntax", vec![]);
    trace.correspondence = correspondence;
    Ok((query, trace))
}

/// Alias bindings visible while translating: binding name -> (tuple
/// variable, relation).
type Env = BTreeMap<String, (String, String)>;

struct SqlCtx<'a> {
    schema: &'a Schema,
    used_vars: BTreeSet<String>,
    subquery_rewrites: usize,
    provenance: Vec<usize>,
}

impl<'a> SqlCtx<'a> {
    fn fresh_var(&mut self, base: &str) -> String {
        let base = if base.is_empty() { "v" } else { base };
        let mut candidate = base.to_string();
        let mut i = 1;
        while self.used_vars.contains(&candidate) {
            i += 1;
            candidate = format!("{base}{i}");
        }
        self.used_vars.insert(candidate.clone());
        candidate
    }

    /// Translate one SELECT block: quantifiers for the FROM list plus the
    /// translated WHERE conjunction. Returns the block's own bindings.
    fn translate_block(
        &mut self,
        sq: &SelectQuery,
        outer: &Env,
    ) -> Result<(Vec<Quantifier>, TrcFormula, Env)> {
        let mut env = outer.clone();
        let mut vars = Vec::new();
        let mut unaliased: BTreeMap<&str, usize> = BTreeMap::new();
        for item in &sq.from {
            if item.alias.is_none() {
                *unaliased.entry(item.table.as_str()).or_insert(0) += 1;
            }
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for item in &sq.from {
            if self.schema.relation(&item.table).is_none() {
                return Err(Error::Schema(format!("unknown relation {}", item.table)));
            }
            let base = match &item.alias {
                Some(a) => a.to_lowercase(),
                None => {
                    // Auto-alias repeated unaliased relations r1, r2, ...
                    let n = seen.entry(item.table.as_str()).or_insert(0);
                    *n += 1;
                    if unaliased.get(item.table.as_str()).copied().unwrap_or(0) > 1 {
                        format!("{}{}", item.table.to_lowercase(), n)
                    } else {
                        item.table.to_lowercase()
                    }
                }
            };
            let var = self.fresh_var(&base);
            self.provenance.push(self.provenance.len());
            env.insert(item.binding().to_string(), (var.clone(), item.table.clone()));
            vars.push(Quantifier::new(&var, &item.table));
        }
        let formula = match &sq.where_clause {
            Some(p) => {
                let (preds, _) = self.translate_preds(p, &env)?;
                TrcFormula::and(preds)
            }
            None => TrcFormula::And(Vec::new()),
        };
        Ok((vars, formula, env))
    }

    /// Translate a predicate tree into a conjunct list.
    fn translate_preds(&mut self, p: &SqlPred, env: &Env) -> Result<(Vec<TrcFormula>, ())> {
        Ok(match p {
            SqlPred::And(ps) => {
                let mut all = Vec::new();
                for q in ps {
                    all.extend(self.translate_preds(q, env)?.0);
                }
                (all, ())
            }
            SqlPred::Or(ps) => {
                let branches = ps
                    .iter()
                    .map(|q| Ok(TrcFormula::and(self.translate_preds(q, env)?.0)))
                    .collect::<Result<Vec<_>>>()?;
                (vec![TrcFormula::Or(branches)], ())
            }
            SqlPred::Not(inner, _) => {
                let (preds, _) = self.translate_preds(inner, env)?;
                (vec![TrcFormula::Not(Box::new(TrcFormula::and(preds)))], ())
            }
            SqlPred::Cmp { left, op, right, .. } => {
                let l = Operand::Attr(self.resolve(left, env)?);
                let r = match right {
                    SqlOperand::Col(c) => Operand::Attr(self.resolve(c, env)?),
                    SqlOperand::Const(v) => Operand::Const(v.clone()),
                };
                (
                    vec![TrcFormula::Pred(Predicate {
                        left: l,
                        op: *op,
                        right: r,
                        span: Default::default(),
                    })],
                    (),
                )
            }
            SqlPred::Exists { negated, query, .. } => {
                let (vars, body, _) = self.translate_block(query, env)?;
                let exists = TrcFormula::Exists(vars, Box::new(body));
                (
                    vec![if *negated {
                        TrcFormula::Not(Box::new(exists))
                    } else {
                        exists
                    }],
                    (),
                )
            }
            SqlPred::In { negated, col, query, .. } => {
                // C [NOT] IN (SELECT C2 ...) becomes [not] exists with the
                // linkage C = C2 pushed into the nested scope.
                self.subquery_rewrites += 1;
                let outer_ref = self.resolve(col, env)?;
                let (vars, body, inner_env) = self.translate_block(query, env)?;
                let inner_ref = self.selected_column(query, &inner_env)?;
                let linkage = TrcFormula::Pred(Predicate {
                    left: Operand::Attr(outer_ref),
                    op: CompOp::Eq,
                    right: Operand::Attr(inner_ref),
                    span: Default::default(),
                });
                let exists =
                    TrcFormula::Exists(vars, Box::new(TrcFormula::and(vec![body, linkage])));
                (
                    vec![if *negated {
                        TrcFormula::Not(Box::new(exists))
                    } else {
                        exists
                    }],
                    (),
                )
            }
            SqlPred::Quantified { col, op, quant, query, .. } => {
                // C op ANY becomes exists with C op C2; C op ALL becomes
                // not exists with the complement operator.
                self.subquery_rewrites += 1;
                let outer_ref = self.resolve(col, env)?;
                let (vars, body, inner_env) = self.translate_block(query, env)?;
                let inner_ref = self.selected_column(query, &inner_env)?;
                let (negate, cmp) = match quant {
                    Quant::Any => (false, *op),
                    Quant::All => (true, op.complement()),
                };
                let linkage = TrcFormula::Pred(Predicate {
                    left: Operand::Attr(outer_ref),
                    op: cmp,
                    right: Operand::Attr(inner_ref),
                    span: Default::default(),
                });
                let exists =
                    TrcFormula::Exists(vars, Box::new(TrcFormula::and(vec![body, linkage])));
                (
                    vec![if negate {
                        TrcFormula::Not(Box::new(exists))
                    } else {
                        exists
                    }],
                    (),
                )
            }
        })
    }

    /// Resolve a column reference to a tuple-variable attribute.
    fn resolve(&self, c: &ColRef, env: &Env) -> Result<AttrRef> {
        match &c.table {
            Some(t) => {
                let (var, rel) = env
                    .get(t)
                    .ok_or_else(|| Error::Translate(format!("unknown table binding {t}")))?;
                self.schema.attr_sort(rel, &c.column)?;
                Ok(AttrRef::new(var, &c.column))
            }
            None => {
                let mut matches = env
                    .values()
                    .filter(|(_, rel)| self.schema.attr_sort(rel, &c.column).is_ok());
                match (matches.next(), matches.next()) {
                    (Some((var, _)), None) => Ok(AttrRef::new(var, &c.column)),
                    (Some(_), Some(_)) => Err(Error::Translate(format!(
                        "ambiguous column {}",
                        c.column
                    ))),
                    (None, _) => Err(Error::Translate(format!(
                        "cannot resolve column {}",
                        c.column
                    ))),
                }
            }
        }
    }

    /// The single column a membership/quantified subquery selects.
    fn selected_column(&self, sq: &SelectQuery, env: &Env) -> Result<AttrRef> {
        match &sq.columns {
            SelectCols::List(cols) if cols.len() == 1 => self.resolve(&cols[0], env),
            _ => Err(Error::Translate(
                "membership and quantified subqueries must select exactly one column".into(),
            )),
        }
    }

    fn output_from_select(
        &mut self,
        sq: &SelectQuery,
        env: &Env,
        out_name: &str,
    ) -> Result<TrcOutput> {
        let cols: Vec<ColRef> = match &sq.columns {
            SelectCols::List(cols) => cols.clone(),
            SelectCols::Star => {
                let mut all = Vec::new();
                for item in &sq.from {
                    let decl = self
                        .schema
                        .relation(&item.table)
                        .ok_or_else(|| Error::Schema(format!("unknown relation {}", item.table)))?;
                    for a in &decl.attrs {
                        all.push(ColRef {
                            table: Some(item.binding().to_string()),
                            column: a.name.clone(),
                            span: Default::default(),
                        });
                    }
                }
                all
            }
        };
        let mut used = BTreeSet::new();
        let attrs = cols
            .iter()
            .map(|c| {
                let source = self.resolve(c, env)?;
                let mut name = c.column.clone();
                let mut i = 1;
                while used.contains(&name) {
                    i += 1;
                    name = format!("{}{}", c.column, i);
                }
                used.insert(name.clone());
                Ok(OutputAttr {
                    name,
                    source: Some(source),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrcOutput {
            name: out_name.to_string(),
            attrs,
        })
    }
}

// ---------------------------------------------------------------------------
// Calculus to SQL

pub fn trc_to_sql(q: &TrcQuery, schema: &Schema) -> Result<(SqlQuery, TranslationTrace)> {
    let mut trace = TranslationTrace::new(Dialect::Trc, Dialect::Sql);
    let canonical = crate::ast::fragment::canonicalize_trc(q)?;
    let report = crate::ast::fragment::classify(&Query::Trc(canonical.clone()), schema);
    if !report.ok() {
        return Err(Error::Fragment(report.violations[0].message.clone()));
    }
    let scope = ScopeTree::from_query(&canonical)?;

    // Tables referenced exactly once go unaliased; repeated relations use
    // their tuple-variable names as aliases.
    let mut rel_counts: BTreeMap<&str, usize> = BTreeMap::new();
    count_rels(&scope, &mut rel_counts);
    let ctx = SqlOut {
        schema,
        rel_counts,
    };

    let sql = match &canonical.output {
        Some(out) => {
            let select = ctx.scope_to_select(&scope, Some(out))?;
            SqlQuery::Select(select)
        }
        None => ctx.sentence_to_sql(&scope)?,
    };
    trace.push("printed canonical scopes as nested NOT EXISTS blocks", vec![]);
    trace.correspondence = Some((0..canonical.quantifiers().len()).collect());
    Ok((sql, trace))
}

fn count_rels<'a>(scope: &'a ScopeTree, counts: &mut BTreeMap<&'a str, usize>) {
    for q in &scope.quantifiers {
        *counts.entry(q.rel.as_str()).or_insert(0) += 1;
    }
    for c in &scope.children {
        count_rels(c, counts);
    }
}

struct SqlOut<'a> {
    schema: &'a Schema,
    rel_counts: BTreeMap<&'a str, usize>,
}

impl<'a> SqlOut<'a> {
    fn binding_of(&self, q: &Quantifier) -> (Option<String>, String) {
        if self.rel_counts.get(q.rel.as_str()).copied().unwrap_or(0) > 1 {
            (Some(q.var.clone()), q.var.clone())
        } else {
            (None, q.rel.clone())
        }
    }

    fn scope_to_select(&self, scope: &ScopeTree, out: Option<&TrcOutput>) -> Result<SelectQuery> {
        if scope.quantifiers.is_empty() {
            return Err(Error::Translate(
                "a SELECT block needs at least one table".into(),
            ));
        }
        let mut bindings: BTreeMap<&str, String> = BTreeMap::new();
        let from = scope
            .quantifiers
            .iter()
            .map(|q| {
                let (alias, binding) = self.binding_of(q);
                bindings.insert(q.var.as_str(), binding);
                FromItem {
                    table: q.rel.clone(),
                    alias,
                    span: Default::default(),
                }
            })
            .collect();
        let columns = match out {
            Some(out) => SelectCols::List(
                out.attrs
                    .iter()
                    .map(|a| {
                        let source = a.source.as_ref().ok_or_else(|| {
                            Error::Translate("unresolved output linkage".into())
                        })?;
                        Ok(self.colref(source, &bindings))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => SelectCols::Star,
        };
        let where_clause = self.conjuncts_to_pred(scope, &bindings)?;
        Ok(SelectQuery {
            distinct: out.is_some(),
            columns,
            from,
            where_clause,
            span: Default::default(),
        })
    }

    fn conjuncts_to_pred(
        &self,
        scope: &ScopeTree,
        outer: &BTreeMap<&str, String>,
    ) -> Result<Option<SqlPred>> {
        let mut parts = Vec::new();
        for p in &scope.predicates {
            parts.push(self.pred_to_sql(p, outer)?);
        }
        for child in &scope.children {
            parts.push(self.negated_scope_to_pred(child, outer)?);
        }
        Ok(if parts.is_empty() {
            None
        } else {
            Some(SqlPred::and(parts))
        })
    }

    fn negated_scope_to_pred(
        &self,
        scope: &ScopeTree,
        outer: &BTreeMap<&str, String>,
    ) -> Result<SqlPred> {
        if scope.quantifiers.is_empty() {
            // A scope without tables renders as a NOT (...) group.
            let inner = self
                .conjuncts_to_pred(scope, outer)?
                .ok_or_else(|| Error::Translate("empty negation scope".into()))?;
            return Ok(SqlPred::Not(Box::new(inner), Default::default()));
        }
        let mut bindings = outer.clone();
        let from = scope
            .quantifiers
            .iter()
            .map(|q| {
                let (alias, binding) = self.binding_of(q);
                bindings.insert(q.var.as_str(), binding);
                FromItem {
                    table: q.rel.clone(),
                    alias,
                    span: Default::default(),
                }
            })
            .collect();
        let where_clause = self.conjuncts_to_pred(scope, &bindings)?;
        Ok(SqlPred::Exists {
            negated: true,
            query: Box::new(SelectQuery {
                distinct: false,
                columns: SelectCols::Star,
                from,
                where_clause,
                span: Default::default(),
            }),
            span: Default::default(),
        })
    }

    fn sentence_to_sql(&self, scope: &ScopeTree) -> Result<SqlQuery> {
        if !scope.quantifiers.is_empty() {
            // exists r in R [...]  =>  SELECT EXISTS (SELECT * FROM R ...)
            let select = self.scope_to_select(scope, None)?;
            return Ok(SqlQuery::SelectExists {
                negated: false,
                query: Box::new(select),
                span: Default::default(),
            });
        }
        // No root tables: the sentence is a conjunction of negated scopes.
        if scope.children.len() == 1 && scope.predicates.is_empty() {
            let child = &scope.children[0];
            if child.quantifiers.is_empty() {
                // not(not(...)-shaped: keep the group structure.
                let inner = self
                    .conjuncts_to_pred(child, &BTreeMap::new())?
                    .ok_or_else(|| Error::Translate("empty negation scope".into()))?;
                return Ok(SqlQuery::SelectNot(
                    SqlPred::Not(Box::new(inner), Default::default()),
                    Default::default(),
                ));
            }
            let bindings = BTreeMap::new();
            let mut inner_bindings = bindings.clone();
            let from = child
                .quantifiers
                .iter()
                .map(|q| {
                    let (alias, binding) = self.binding_of(q);
                    inner_bindings.insert(q.var.as_str(), binding);
                    FromItem {
                        table: q.rel.clone(),
                        alias,
                        span: Default::default(),
                    }
                })
                .collect();
            let where_clause = self.conjuncts_to_pred(child, &inner_bindings)?;
            return Ok(SqlQuery::SelectExists {
                negated: true,
                query: Box::new(SelectQuery {
                    distinct: false,
                    columns: SelectCols::Star,
                    from,
                    where_clause,
                    span: Default::default(),
                }),
                span: Default::default(),
            });
        }
        // Several root conjuncts: wrap them in a double NOT group so the
        // Boolean head stays a single predicate.
        let conj = self
            .conjuncts_to_pred(scope, &BTreeMap::new())?
            .ok_or_else(|| Error::Translate("empty sentence".into()))?;
        Ok(SqlQuery::SelectNot(
            SqlPred::Not(Box::new(conj), Default::default()),
            Default::default(),
        ))
    }

    fn pred_to_sql(&self, p: &Predicate, bindings: &BTreeMap<&str, String>) -> Result<SqlPred> {
        let left = match &p.left {
            Operand::Attr(a) => self.colref(a, bindings),
            Operand::Const(_) => {
                return Err(Error::Translate(
                    "constant-left predicates are unguarded".into(),
                ))
            }
        };
        let right = match &p.right {
            Operand::Attr(a) => SqlOperand::Col(self.colref(a, bindings)),
            Operand::Const(v) => SqlOperand::Const(v.clone()),
        };
        let _ = self.schema;
        Ok(SqlPred::Cmp {
            left,
            op: p.op,
            right,
            span: Default::default(),
        })
    }

    fn colref(&self, a: &AttrRef, bindings: &BTreeMap<&str, String>) -> ColRef {
        let table = bindings
            .get(a.var.as_str())
            .cloned()
            .unwrap_or_else(|| a.var.clone());
        ColRef {
            table: Some(table),
            column: a.attr.clone(),
            span: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Sort;
    use crate::eval::{equivalent_bounded, Bound};
    use crate::parse::{parse_sql, parse_trc, print_sql, print_trc};

    fn schema_rs() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    fn assert_equivalent(sql: &str, trc: &str) {
        let schema = schema_rs();
        let sq = parse_sql(sql).unwrap();
        let (translated, trace) = sql_to_trc(&sq, &schema).unwrap();
        let expected = parse_trc(trc).unwrap();
        let v = equivalent_bounded(
            &Query::Trc(translated.clone()),
            &Query::Trc(expected),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(
            v.is_equivalent(),
            "translated {} !=\n{}",
            print_trc(&translated),
            trc
        );
        assert!(trace.correspondence.is_some());
    }

    #[test]
    fn membership_subquery_becomes_existential() {
        assert_equivalent(
            "SELECT DISTINCT R.A FROM R WHERE R.B IN (SELECT S.B FROM S)",
            "{ q(A) | exists r in R, s in S [q.A = r.A and s.B = r.B] }",
        );
    }

    #[test]
    fn all_quantifier_becomes_negated_existential_with_complement() {
        assert_equivalent(
            "SELECT DISTINCT R.A FROM R WHERE R.B >= ALL (SELECT S.B FROM S)",
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [r.B < s.B])] }",
        );
    }

    #[test]
    fn division_translates_and_round_trips() {
        let schema = schema_rs();
        let sql_text = "SELECT DISTINCT R.A FROM R WHERE not exists (SELECT * FROM S WHERE not exists (SELECT * FROM R AS R2 WHERE R2.B = S.B AND R2.A = R.A))";
        let sq = parse_sql(sql_text).unwrap();
        let (trc, trace) = sql_to_trc(&sq, &schema).unwrap();
        assert_eq!(trace.correspondence, Some(vec![0, 1, 2]));
        // Back to SQL and check bounded equivalence of the round trip.
        let (sql2, trace2) = trc_to_sql(&trc, &schema).unwrap();
        assert!(trace2.correspondence.is_some());
        let v = equivalent_bounded(
            &Query::Sql(sq),
            &Query::Sql(sql2.clone()),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent(), "{}", print_sql(&sql2));
    }

    #[test]
    fn boolean_sentence_to_sql() {
        let mut schema = Schema::new();
        schema.add_relation("Sailor", vec![("sid", Sort::Int), ("sname", Sort::Str)]).unwrap();
        schema.add_relation("Reserves", vec![("sid", Sort::Int), ("bid", Sort::Int)]).unwrap();
        schema
            .add_relation("Boat", vec![("bid", Sort::Int), ("color", Sort::Str)])
            .unwrap();
        let q = parse_trc(
            "not (exists s in Sailor [not (exists b in Boat, r in Reserves [b.color = 'red' and r.bid = b.bid and r.sid = s.sid])])",
        )
        .unwrap();
        let (sql, _) = trc_to_sql(&q, &schema).unwrap();
        match &sql {
            SqlQuery::SelectExists { negated: true, .. } => {}
            other => panic!("expected SELECT NOT EXISTS, got {other:?}"),
        }
        let v = equivalent_bounded(
            &Query::Trc(q),
            &Query::Sql(sql),
            &schema,
            &Bound { random_trials: 10, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent());
    }

    #[test]
    fn union_translates_to_disjunction() {
        let mut schema = Schema::new();
        schema.add_relation("R", vec![("A", Sort::Int)]).unwrap();
        schema.add_relation("S", vec![("A", Sort::Int)]).unwrap();
        let sq = parse_sql("(SELECT DISTINCT R.A FROM R) UNION (SELECT DISTINCT S.A FROM S)")
            .unwrap();
        let (trc, trace) = sql_to_trc(&sq, &schema).unwrap();
        assert!(trc.body.contains_or());
        assert!(trace.correspondence.is_none());
        let v = equivalent_bounded(
            &Query::Sql(sq),
            &Query::Trc(trc),
            &schema,
            &Bound { random_trials: 10, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent());
    }

    #[test]
    fn not_group_round_trips() {
        // Double negation without tables in the middle scope.
        let schema = schema_rs();
        let sq = parse_sql(
            "SELECT DISTINCT R.A FROM R WHERE not (not exists (SELECT * FROM S WHERE S.B = R.B) AND not exists (SELECT * FROM S AS S2 WHERE S2.B = R.A))",
        )
        .unwrap();
        let (trc, _) = sql_to_trc(&sq, &schema).unwrap();
        let (sql2, _) = trc_to_sql(&trc, &schema).unwrap();
        let v = equivalent_bounded(
            &Query::Sql(sq),
            &Query::Sql(sql2),
            &schema,
            &Bound { random_trials: 10, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent());
    }
}
