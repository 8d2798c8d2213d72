//! Fragment membership, guardedness, and the canonical form of calculus
//! queries.
//!
//! A predicate is *guarded* when it contains at least one attribute of a
//! table quantified inside the same negation scope as the predicate itself.
//! Negation scopes are delimited by negation operators only: hoisting an
//! existential quantifier past conjunctions never changes guardedness.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::datalog::{DatalogProgram, Literal, Term};
use crate::ast::sql::{SelectQuery, SqlPred, SqlQuery};
use crate::ast::trc::{
    Operand, OutputAttr, Predicate, Quantifier, TrcFormula, TrcOutput, TrcQuery,
};
use crate::ast::{ra, CompOp};
use crate::catalog::Schema;
use crate::span::Span;
use crate::{Dialect, Error, Query, Result};

/// Which fragment condition a violation falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Disjunction,
    Unguarded,
    Unsafe,
    NonCanonical,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
    pub span: Span,
}

/// The result of classifying a query against the non-disjunctive fragment.
/// The violation list is empty exactly when all flags hold.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FragmentReport {
    pub dialect: Dialect,
    pub non_disjunctive: bool,
    pub guarded: bool,
    pub safe: bool,
    pub canonical: bool,
    pub violations: Vec<Violation>,
}

impl FragmentReport {
    fn from_violations(dialect: Dialect, violations: Vec<Violation>) -> FragmentReport {
        let has = |k: ViolationKind| violations.iter().any(|v| v.kind == k);
        FragmentReport {
            dialect,
            non_disjunctive: !has(ViolationKind::Disjunction),
            guarded: !has(ViolationKind::Unguarded),
            safe: !has(ViolationKind::Unsafe),
            canonical: !has(ViolationKind::NonCanonical),
            violations,
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Determine fragment membership for a query in any dialect.
pub fn classify(q: &Query, schema: &Schema) -> FragmentReport {
    match q {
        Query::Trc(t) => classify_trc(t, schema),
        Query::Sql(s) => classify_sql(s, schema),
        Query::Datalog(p) => classify_datalog(p, schema),
        Query::Ra(e) => classify_ra(e, schema),
        Query::Diagram(d) => {
            // Diagrams are non-disjunctive by construction; validity is
            // checked separately.
            let violations = match crate::diagram::validate(d, schema) {
                report if report.ok() => Vec::new(),
                report => report
                    .violations
                    .iter()
                    .map(|v| Violation {
                        kind: ViolationKind::Unsafe,
                        message: v.message.clone(),
                        span: Span::default(),
                    })
                    .collect(),
            };
            FragmentReport::from_violations(Dialect::Diagram, violations)
        }
    }
}

/// Report every predicate lacking a guard in its innermost negation scope.
pub fn check_guarded(q: &Query, schema: &Schema) -> FragmentReport {
    let (dialect, violations) = match q {
        Query::Trc(t) => (Dialect::Trc, trc_guard_violations(t)),
        Query::Sql(s) => (Dialect::Sql, sql_guard_violations(s, schema)),
        _ => (q.dialect(), Vec::new()),
    };
    FragmentReport::from_violations(dialect, violations)
}

// ---------------------------------------------------------------------------
// TRC

fn classify_trc(q: &TrcQuery, schema: &Schema) -> FragmentReport {
    let mut violations = Vec::new();
    collect_or_violations(&q.body, &mut violations);
    violations.extend(trc_guard_violations(q));
    // Safety: output attributes must link to tuple variables quantified
    // outside all negations.
    if let Some(out) = &q.output {
        let root = root_scope_vars(&q.body);
        for attr in &out.attrs {
            if let Some(source) = &attr.source {
                if !root.contains(&source.var) {
                    violations.push(Violation {
                        kind: ViolationKind::Unsafe,
                        message: format!(
                            "output attribute {} links to {}, which is not quantified at the root scope",
                            attr.name, source
                        ),
                        span: source.span,
                    });
                }
            }
        }
    }
    if let Err(e) = validate_trc(q, schema) {
        violations.push(Violation {
            kind: ViolationKind::Unsafe,
            message: e.to_string(),
            span: Span::default(),
        });
    }
    if crate::ast::trc::ScopeTree::from_query(q).is_err() {
        violations.push(Violation {
            kind: ViolationKind::NonCanonical,
            message: "quantifiers are not hoisted to scope heads".into(),
            span: Span::default(),
        });
    }
    FragmentReport::from_violations(Dialect::Trc, violations)
}

fn collect_or_violations(f: &TrcFormula, out: &mut Vec<Violation>) {
    match f {
        TrcFormula::Or(fs) => {
            out.push(Violation {
                kind: ViolationKind::Disjunction,
                message: "disjunction is outside the non-disjunctive fragment".into(),
                span: Span::default(),
            });
            for g in fs {
                collect_or_violations(g, out);
            }
        }
        TrcFormula::And(fs) => fs.iter().for_each(|g| collect_or_violations(g, out)),
        TrcFormula::Not(g) | TrcFormula::Exists(_, g) => collect_or_violations(g, out),
        TrcFormula::Pred(_) => {}
    }
}

fn trc_guard_violations(q: &TrcQuery) -> Vec<Violation> {
    let mut violations = Vec::new();
    guard_walk(&q.body, &scope_local_vars(&q.body), &mut violations);
    violations
}

/// Variables quantified in the scope that starts at `f` (not crossing a
/// negation).
fn scope_local_vars(f: &TrcFormula) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    fn go(f: &TrcFormula, vars: &mut BTreeSet<String>) {
        match f {
            TrcFormula::And(fs) | TrcFormula::Or(fs) => fs.iter().for_each(|g| go(g, vars)),
            TrcFormula::Exists(qs, g) => {
                vars.extend(qs.iter().map(|q| q.var.clone()));
                go(g, vars);
            }
            TrcFormula::Not(_) | TrcFormula::Pred(_) => {}
        }
    }
    go(f, &mut vars);
    vars
}

fn guard_walk(f: &TrcFormula, local: &BTreeSet<String>, out: &mut Vec<Violation>) {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            fs.iter().for_each(|g| guard_walk(g, local, out))
        }
        TrcFormula::Exists(_, g) => guard_walk(g, local, out),
        TrcFormula::Not(g) => {
            let inner = scope_local_vars(g);
            guard_walk(g, &inner, out);
        }
        TrcFormula::Pred(p) => {
            let guards = [&p.left, &p.right]
                .iter()
                .filter_map(|o| o.as_attr())
                .any(|a| local.contains(&a.var));
            if !guards {
                out.push(Violation {
                    kind: ViolationKind::Unguarded,
                    message: format!(
                        "predicate {} has no attribute of a table quantified in its negation scope",
                        print_pred(p)
                    ),
                    span: p.span,
                });
            }
        }
    }
}

fn print_pred(p: &Predicate) -> String {
    let side = |o: &Operand| match o {
        Operand::Attr(a) => a.to_string(),
        Operand::Const(v) => v.to_string(),
    };
    format!("{} {} {}", side(&p.left), p.op, side(&p.right))
}

/// Tuple variables quantified outside every negation.
pub fn root_scope_vars(f: &TrcFormula) -> BTreeSet<String> {
    scope_local_vars(f)
}

/// Schema conformance: every attribute reference exists and operand sorts
/// agree. Returns the mapping from variable to relation as a side product.
pub fn validate_trc(q: &TrcQuery, schema: &Schema) -> Result<BTreeMap<String, String>> {
    let mut binding = BTreeMap::new();
    collect_bindings(&q.body, &mut binding)?;
    check_formula_sorts(&q.body, &binding, schema)?;
    if let Some(out) = &q.output {
        for attr in &out.attrs {
            let Some(source) = &attr.source else { continue };
            let rel = binding
                .get(&source.var)
                .ok_or_else(|| Error::Fragment(format!("unscoped variable {}", source.var)))?;
            schema.attr_sort(rel, &source.attr)?;
        }
    }
    Ok(binding)
}

/// Scoping check without a schema: every variable is bound exactly once and
/// every attribute reference resolves to a quantifier that is in scope at
/// the reference site.
pub fn validate_scoping_only(
    f: &TrcFormula,
    bound: &mut BTreeMap<String, String>,
    free: Option<&str>,
) -> Result<()> {
    collect_bindings(f, bound)?;
    fn refs_ok(f: &TrcFormula, in_scope: &mut Vec<String>, free: Option<&str>) -> Result<()> {
        match f {
            TrcFormula::And(fs) | TrcFormula::Or(fs) => {
                // Within one negation scope, quantifiers hoist: collect all
                // sibling binders first.
                let mark = in_scope.len();
                let mut local = BTreeSet::new();
                collect_scope_binders(f, &mut local);
                in_scope.extend(local.iter().cloned());
                for g in fs {
                    refs_only(g, in_scope, free)?;
                }
                in_scope.truncate(mark);
                Ok(())
            }
            other => {
                let mark = in_scope.len();
                let mut local = BTreeSet::new();
                collect_scope_binders(other, &mut local);
                in_scope.extend(local.iter().cloned());
                refs_only(other, in_scope, free)?;
                in_scope.truncate(mark);
                Ok(())
            }
        }
    }
    fn refs_only(f: &TrcFormula, in_scope: &mut Vec<String>, free: Option<&str>) -> Result<()> {
        match f {
            TrcFormula::And(fs) | TrcFormula::Or(fs) => {
                fs.iter().try_for_each(|g| refs_only(g, in_scope, free))
            }
            TrcFormula::Exists(_, g) => refs_only(g, in_scope, free),
            TrcFormula::Not(g) => refs_ok(g, in_scope, free),
            TrcFormula::Pred(p) => {
                for o in [&p.left, &p.right] {
                    if let Operand::Attr(a) = o {
                        if !in_scope.contains(&a.var) && Some(a.var.as_str()) != free {
                            return Err(Error::Parse {
                                message: format!("unscoped variable {}", a.var),
                                span: a.span,
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }
    fn collect_scope_binders(f: &TrcFormula, out: &mut BTreeSet<String>) {
        match f {
            TrcFormula::And(fs) | TrcFormula::Or(fs) => {
                fs.iter().for_each(|g| collect_scope_binders(g, out))
            }
            TrcFormula::Exists(qs, g) => {
                out.extend(qs.iter().map(|q| q.var.clone()));
                collect_scope_binders(g, out);
            }
            TrcFormula::Not(_) | TrcFormula::Pred(_) => {}
        }
    }
    refs_ok(f, &mut Vec::new(), free)
}

fn collect_bindings(f: &TrcFormula, out: &mut BTreeMap<String, String>) -> Result<()> {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            fs.iter().try_for_each(|g| collect_bindings(g, out))
        }
        TrcFormula::Not(g) => collect_bindings(g, out),
        TrcFormula::Exists(qs, g) => {
            for q in qs {
                if out.insert(q.var.clone(), q.rel.clone()).is_some() {
                    return Err(Error::Fragment(format!(
                        "variable {} is quantified more than once",
                        q.var
                    )));
                }
            }
            collect_bindings(g, out)
        }
        TrcFormula::Pred(_) => Ok(()),
    }
}

fn check_formula_sorts(
    f: &TrcFormula,
    binding: &BTreeMap<String, String>,
    schema: &Schema,
) -> Result<()> {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => fs
            .iter()
            .try_for_each(|g| check_formula_sorts(g, binding, schema)),
        TrcFormula::Not(g) | TrcFormula::Exists(_, g) => check_formula_sorts(g, binding, schema),
        TrcFormula::Pred(p) => {
            let sort_of = |o: &Operand| -> Result<crate::catalog::Sort> {
                match o {
                    Operand::Attr(a) => {
                        let rel = binding
                            .get(&a.var)
                            .ok_or_else(|| Error::Fragment(format!("unscoped variable {}", a.var)))?;
                        schema.attr_sort(rel, &a.attr)
                    }
                    Operand::Const(v) => Ok(v.sort()),
                }
            };
            let l = sort_of(&p.left)?;
            let r = sort_of(&p.right)?;
            if l != r {
                return Err(Error::CrossSortComparison { left: l, right: r });
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Canonicalization

/// Bring a query into canonical form: every existential quantifier is pulled
/// up to the start of the query or to directly after a negation. Logically
/// equivalent to the input and idempotent. Variable names that collide when
/// scopes merge get numeric suffixes.
pub fn canonicalize_trc(q: &TrcQuery) -> Result<TrcQuery> {
    if q.body.contains_or() {
        return Err(Error::Fragment(
            "cannot canonicalize a disjunctive query".into(),
        ));
    }
    let mut avoid: BTreeSet<String> = BTreeSet::new();
    collect_var_names(&q.body, &mut avoid);
    if let Some(out) = &q.output {
        avoid.insert(out.name.clone());
    }
    let mut renames: Vec<(String, String)> = Vec::new();
    let mut claimed = BTreeSet::new();
    let body = uniquify(
        q.body.clone(),
        &mut BTreeMap::new(),
        &mut claimed,
        &avoid,
        &mut renames,
    )?;

    // Splice output linkages in as root conjuncts so hoisting sees one
    // formula, then take them back out of the canonical form.
    let out_var = q.output.as_ref().map(|o| o.name.clone());
    let mut body = body;
    if let Some(out) = &q.output {
        let mut conjuncts = vec![body];
        for attr in &out.attrs {
            let mut source = attr.source.clone().ok_or_else(|| {
                Error::Fragment("cannot canonicalize a disjunctive query".into())
            })?;
            if let Some((_, new)) = renames.iter().find(|(old, _)| *old == source.var) {
                source.var = new.clone();
            }
            conjuncts.push(TrcFormula::Pred(Predicate {
                left: Operand::Attr(crate::ast::trc::AttrRef {
                    var: out.name.clone(),
                    attr: attr.name.clone(),
                    span: Span::default(),
                }),
                op: CompOp::Eq,
                right: Operand::Attr(source),
                span: Span::default(),
            }));
        }
        body = TrcFormula::And(conjuncts);
    }

    let pinned = out_var.clone().into_iter().collect::<BTreeSet<_>>();
    let hoisted = hoist(body, &pinned)?;

    // Re-extract output linkages from the canonical root conjuncts.
    let (body, output) = match (&q.output, hoisted) {
        (None, h) => (h, None),
        (Some(out), h) => {
            let (qs, mut conjuncts) = split_scope(h);
            let mut attrs: Vec<OutputAttr> = Vec::new();
            let mut rest = Vec::new();
            for c in conjuncts.drain(..) {
                match linkage_of(&c, &out.name) {
                    Some((name, source)) => {
                        if attrs.iter().any(|a| a.name == name) {
                            rest.push(c);
                        } else {
                            attrs.push(OutputAttr {
                                name,
                                source: Some(source),
                            });
                        }
                    }
                    None => rest.push(c),
                }
            }
            attrs.sort_by_key(|a| {
                out.attrs
                    .iter()
                    .position(|o| o.name == a.name)
                    .unwrap_or(usize::MAX)
            });
            let matrix = TrcFormula::and(rest);
            let body = if qs.is_empty() {
                matrix
            } else {
                TrcFormula::Exists(qs, Box::new(matrix))
            };
            (
                body,
                Some(TrcOutput {
                    name: out.name.clone(),
                    attrs,
                }),
            )
        }
    };
    Ok(TrcQuery { output, body })
}

fn linkage_of(f: &TrcFormula, out_name: &str) -> Option<(String, crate::ast::trc::AttrRef)> {
    if let TrcFormula::Pred(p) = f {
        if p.op == CompOp::Eq {
            if let (Some(l), Some(r)) = (p.left.as_attr(), p.right.as_attr()) {
                if l.var == out_name {
                    return Some((l.attr.clone(), r.clone()));
                }
                if r.var == out_name {
                    return Some((r.attr.clone(), l.clone()));
                }
            }
        }
    }
    None
}

fn collect_var_names(f: &TrcFormula, out: &mut BTreeSet<String>) {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            fs.iter().for_each(|g| collect_var_names(g, out))
        }
        TrcFormula::Not(g) => collect_var_names(g, out),
        TrcFormula::Exists(qs, g) => {
            out.extend(qs.iter().map(|q| q.var.clone()));
            collect_var_names(g, out);
        }
        TrcFormula::Pred(_) => {}
    }
}

/// Rename binders so that no variable name is bound twice anywhere in the
/// formula. The first binder of a name keeps it; later ones get suffixes.
fn uniquify(
    f: TrcFormula,
    env: &mut BTreeMap<String, String>,
    claimed: &mut BTreeSet<String>,
    avoid: &BTreeSet<String>,
    renames: &mut Vec<(String, String)>,
) -> Result<TrcFormula> {
    match f {
        TrcFormula::And(fs) => Ok(TrcFormula::And(
            fs.into_iter()
                .map(|g| uniquify(g, env, claimed, avoid, renames))
                .collect::<Result<_>>()?,
        )),
        TrcFormula::Or(fs) => Ok(TrcFormula::Or(
            fs.into_iter()
                .map(|g| uniquify(g, env, claimed, avoid, renames))
                .collect::<Result<_>>()?,
        )),
        TrcFormula::Not(g) => Ok(TrcFormula::Not(Box::new(uniquify(
            *g, env, claimed, avoid, renames,
        )?))),
        TrcFormula::Exists(qs, g) => {
            let mut shadowed = Vec::new();
            let mut renamed = Vec::new();
            for mut q in qs {
                let fresh = if claimed.contains(&q.var) {
                    fresh_name(&q.var, claimed, avoid)
                } else {
                    q.var.clone()
                };
                claimed.insert(fresh.clone());
                shadowed.push((q.var.clone(), env.insert(q.var.clone(), fresh.clone())));
                if fresh != q.var {
                    renames.push((q.var.clone(), fresh.clone()));
                }
                q.var = fresh;
                renamed.push(q);
            }
            let body = uniquify(*g, env, claimed, avoid, renames)?;
            for (name, prev) in shadowed.into_iter().rev() {
                match prev {
                    Some(p) => {
                        env.insert(name, p);
                    }
                    None => {
                        env.remove(&name);
                    }
                }
            }
            Ok(TrcFormula::Exists(renamed, Box::new(body)))
        }
        TrcFormula::Pred(mut p) => {
            rewrite_operand(&mut p.left, env)?;
            rewrite_operand(&mut p.right, env)?;
            Ok(TrcFormula::Pred(p))
        }
    }
}

fn fresh_name(base: &str, claimed: &BTreeSet<String>, avoid: &BTreeSet<String>) -> String {
    for i in 2.. {
        let candidate = format!("{base}{i}");
        if !claimed.contains(&candidate) && !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

fn rewrite_operand(o: &mut Operand, env: &BTreeMap<String, String>) -> Result<()> {
    if let Operand::Attr(a) = o {
        if let Some(new) = env.get(&a.var) {
            a.var = new.clone();
        }
        // References to the output table stay as written; anything else
        // unbound is caught by validation.
    }
    Ok(())
}

/// Pull quantifiers to scope heads, recursing under negations. `pinned`
/// names (the output table) are never treated as quantifiers.
fn hoist(f: TrcFormula, pinned: &BTreeSet<String>) -> Result<TrcFormula> {
    let (qs, conjuncts) = hoist_scope(f, pinned)?;
    let matrix = TrcFormula::and(conjuncts);
    Ok(if qs.is_empty() {
        matrix
    } else {
        TrcFormula::Exists(qs, Box::new(matrix))
    })
}

fn hoist_scope(
    f: TrcFormula,
    pinned: &BTreeSet<String>,
) -> Result<(Vec<Quantifier>, Vec<TrcFormula>)> {
    match f {
        TrcFormula::And(fs) => {
            let mut qs = Vec::new();
            let mut conjuncts = Vec::new();
            for g in fs {
                let (q2, c2) = hoist_scope(g, pinned)?;
                qs.extend(q2);
                conjuncts.extend(c2);
            }
            Ok((qs, conjuncts))
        }
        TrcFormula::Exists(vars, g) => {
            let (mut qs, conjuncts) = hoist_scope(*g, pinned)?;
            let mut all = vars;
            all.append(&mut qs);
            Ok((all, conjuncts))
        }
        TrcFormula::Not(g) => {
            let inner = hoist(*g, pinned)?;
            Ok((Vec::new(), vec![TrcFormula::Not(Box::new(inner))]))
        }
        TrcFormula::Pred(p) => Ok((Vec::new(), vec![TrcFormula::Pred(p)])),
        TrcFormula::Or(_) => Err(Error::Fragment(
            "cannot canonicalize a disjunctive query".into(),
        )),
    }
}

fn split_scope(f: TrcFormula) -> (Vec<Quantifier>, Vec<TrcFormula>) {
    match f {
        TrcFormula::Exists(qs, body) => match *body {
            TrcFormula::And(cs) => (qs, cs),
            other => (qs, vec![other]),
        },
        TrcFormula::And(cs) => (Vec::new(), cs),
        other => (Vec::new(), vec![other]),
    }
}

// ---------------------------------------------------------------------------
// SQL

fn classify_sql(q: &SqlQuery, schema: &Schema) -> FragmentReport {
    let mut violations = Vec::new();
    sql_or_violations(q, &mut violations);
    violations.extend(sql_guard_violations(q, schema));
    sql_canonical_violations(q, &mut violations);
    FragmentReport::from_violations(Dialect::Sql, violations)
}

fn sql_or_violations(q: &SqlQuery, out: &mut Vec<Violation>) {
    match q {
        SqlQuery::Union(parts) => {
            out.push(Violation {
                kind: ViolationKind::Disjunction,
                message: "UNION is outside the non-disjunctive fragment".into(),
                span: Span::default(),
            });
            parts.iter().for_each(|p| sql_or_violations(p, out));
        }
        SqlQuery::Select(sq) => sql_or_violations_block(sq, out),
        SqlQuery::SelectNot(p, _) => sql_or_violations_pred(p, out),
        SqlQuery::SelectExists { query, .. } => sql_or_violations_block(query, out),
    }
}

fn sql_or_violations_block(sq: &SelectQuery, out: &mut Vec<Violation>) {
    if let Some(w) = &sq.where_clause {
        sql_or_violations_pred(w, out);
    }
}

fn sql_or_violations_pred(p: &SqlPred, out: &mut Vec<Violation>) {
    match p {
        SqlPred::Or(ps) => {
            out.push(Violation {
                kind: ViolationKind::Disjunction,
                message: "OR is outside the non-disjunctive fragment".into(),
                span: Span::default(),
            });
            ps.iter().for_each(|q| sql_or_violations_pred(q, out));
        }
        SqlPred::And(ps) => ps.iter().for_each(|q| sql_or_violations_pred(q, out)),
        SqlPred::Not(inner, _) => sql_or_violations_pred(inner, out),
        SqlPred::Exists { query, .. }
        | SqlPred::In { query, .. }
        | SqlPred::Quantified { query, .. } => sql_or_violations_block(query, out),
        SqlPred::Cmp { .. } => {}
    }
}

fn sql_canonical_violations(q: &SqlQuery, out: &mut Vec<Violation>) {
    fn pred(p: &SqlPred, out: &mut Vec<Violation>) {
        match p {
            SqlPred::And(ps) | SqlPred::Or(ps) => ps.iter().for_each(|q| pred(q, out)),
            SqlPred::Not(inner, _) => pred(inner, out),
            SqlPred::Exists { negated, query, span } => {
                if !negated {
                    out.push(Violation {
                        kind: ViolationKind::NonCanonical,
                        message: "non-negated EXISTS subquery is not canonical".into(),
                        span: *span,
                    });
                }
                block(query, out);
            }
            SqlPred::In { span, query, .. } => {
                out.push(Violation {
                    kind: ViolationKind::NonCanonical,
                    message: "membership subquery is not canonical".into(),
                    span: *span,
                });
                block(query, out);
            }
            SqlPred::Quantified { span, query, .. } => {
                out.push(Violation {
                    kind: ViolationKind::NonCanonical,
                    message: "quantified subquery is not canonical".into(),
                    span: *span,
                });
                block(query, out);
            }
            SqlPred::Cmp { .. } => {}
        }
    }
    fn block(sq: &SelectQuery, out: &mut Vec<Violation>) {
        if let Some(w) = &sq.where_clause {
            pred(w, out);
        }
    }
    match q {
        SqlQuery::Union(parts) => parts.iter().for_each(|p| sql_canonical_violations(p, out)),
        SqlQuery::Select(sq) => block(sq, out),
        SqlQuery::SelectNot(p, _) => pred(p, out),
        SqlQuery::SelectExists { query, .. } => block(query, out),
    }
}

/// Bindings visible for guardedness: the tables introduced since the last
/// negation boundary, mapped to their relation names.
type Bindings = BTreeMap<String, String>;

fn sql_guard_violations(q: &SqlQuery, schema: &Schema) -> Vec<Violation> {
    let mut out = Vec::new();
    match q {
        SqlQuery::Union(parts) => {
            for p in parts {
                out.extend(sql_guard_violations(p, schema));
            }
        }
        SqlQuery::Select(sq) => {
            sql_guard_block(sq, &Bindings::new(), &Bindings::new(), schema, &mut out)
        }
        SqlQuery::SelectNot(p, _) => {
            sql_guard_pred(p, &Bindings::new(), &Bindings::new(), schema, &mut out)
        }
        SqlQuery::SelectExists { query, .. } => {
            sql_guard_block(query, &Bindings::new(), &Bindings::new(), schema, &mut out)
        }
    }
    out
}

fn sql_guard_block(
    sq: &SelectQuery,
    local: &Bindings,
    env: &Bindings,
    schema: &Schema,
    out: &mut Vec<Violation>,
) {
    let mut local = local.clone();
    let mut env = env.clone();
    for item in &sq.from {
        local.insert(item.binding().to_string(), item.table.clone());
        env.insert(item.binding().to_string(), item.table.clone());
    }
    if let Some(w) = &sq.where_clause {
        sql_guard_pred(w, &local, &env, schema, out);
    }
}

fn sql_guard_pred(
    p: &SqlPred,
    local: &Bindings,
    env: &Bindings,
    schema: &Schema,
    out: &mut Vec<Violation>,
) {
    match p {
        SqlPred::And(ps) | SqlPred::Or(ps) => {
            ps.iter().for_each(|q| sql_guard_pred(q, local, env, schema, out))
        }
        SqlPred::Cmp { left, right, span, .. } => {
            let mut guarded = col_in(left, local, env, schema);
            if let crate::ast::sql::SqlOperand::Col(c) = right {
                guarded = guarded || col_in(c, local, env, schema);
            }
            if !guarded {
                out.push(Violation {
                    kind: ViolationKind::Unguarded,
                    message: format!(
                        "predicate does not reference a table within the scope of the last NOT"
                    ),
                    span: *span,
                });
            }
        }
        SqlPred::Not(inner, _) => {
            // A NOT group opens a negation scope with no tables of its own.
            sql_guard_pred(inner, &Bindings::new(), env, schema, out)
        }
        SqlPred::Exists { negated, query, .. } => {
            if *negated {
                sql_guard_block(query, &Bindings::new(), env, schema, out);
            } else {
                sql_guard_block(query, local, env, schema, out);
            }
        }
        SqlPred::In { negated, query, .. } => {
            // The implicit linkage C1 = C2 is guarded by the subquery's own
            // tables; only the subquery body needs checking.
            if *negated {
                sql_guard_block(query, &Bindings::new(), env, schema, out);
            } else {
                sql_guard_block(query, local, env, schema, out);
            }
        }
        SqlPred::Quantified { quant, query, .. } => {
            let negated = matches!(quant, crate::ast::sql::Quant::All);
            if negated {
                sql_guard_block(query, &Bindings::new(), env, schema, out);
            } else {
                sql_guard_block(query, local, env, schema, out);
            }
        }
    }
}

/// Does this column reference resolve to a binding in `local`?
fn col_in(c: &crate::ast::sql::ColRef, local: &Bindings, env: &Bindings, schema: &Schema) -> bool {
    match &c.table {
        Some(t) => local.contains_key(t),
        None => {
            // Unqualified: resolve by attribute name, innermost-first.
            let matches_local = local
                .iter()
                .any(|(_, rel)| schema.attr_sort(rel, &c.column).is_ok());
            if matches_local {
                return true;
            }
            let _ = env;
            false
        }
    }
}

// ---------------------------------------------------------------------------
// Datalog

fn classify_datalog(p: &DatalogProgram, schema: &Schema) -> FragmentReport {
    let mut violations = Vec::new();
    let idbs = p.idb_names();

    // Every IDB appears in the head of exactly one rule.
    let mut head_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &p.rules {
        *head_counts.entry(r.head.pred.as_str()).or_insert(0) += 1;
    }
    for (idb, count) in &head_counts {
        if *count > 1 {
            violations.push(Violation {
                kind: ViolationKind::Disjunction,
                message: format!("IDB {idb} heads {count} rules"),
                span: Span::default(),
            });
        }
    }
    // ... and is used at most once over all bodies.
    let mut use_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &p.rules {
        for lit in &r.body {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if idbs.contains(&a.pred) {
                    *use_counts.entry(a.pred.as_str()).or_insert(0) += 1;
                }
            }
        }
    }
    for (idb, count) in &use_counts {
        if *count > 1 {
            violations.push(Violation {
                kind: ViolationKind::Disjunction,
                message: format!("IDB {idb} is used {count} times"),
                span: Span::default(),
            });
        }
    }

    // Non-recursive: a rule may only reference IDBs defined by earlier rules.
    let mut defined: BTreeSet<&str> = BTreeSet::new();
    for r in &p.rules {
        for lit in &r.body {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if idbs.contains(&a.pred) && !defined.contains(a.pred.as_str()) {
                    violations.push(Violation {
                        kind: ViolationKind::Unsafe,
                        message: format!(
                            "IDB {} is used before (or within) its own definition",
                            a.pred
                        ),
                        span: a.span,
                    });
                }
            }
        }
        defined.insert(r.head.pred.as_str());
    }

    // Safety: every variable in a negated atom or built-in occurs in a
    // positive relational subgoal of the same rule; head variables too.
    for r in &p.rules {
        let mut positive_vars: BTreeSet<&str> = BTreeSet::new();
        for a in r.positive_atoms() {
            for t in &a.args {
                if let Term::Var(v) = t {
                    positive_vars.insert(v);
                }
            }
        }
        let mut check = |t: &Term, what: &str, span: Span, out: &mut Vec<Violation>| {
            if let Term::Var(v) = t {
                if !positive_vars.contains(v.as_str()) {
                    out.push(Violation {
                        kind: ViolationKind::Unsafe,
                        message: format!(
                            "variable {v} in {what} must appear in a nonnegated relational subgoal"
                        ),
                        span,
                    });
                }
            }
        };
        for a in r.negated_atoms() {
            for t in &a.args {
                check(t, "a negated atom", a.span, &mut violations);
            }
        }
        for c in r.comparisons() {
            check(&c.left, "a built-in predicate", c.span, &mut violations);
            check(&c.right, "a built-in predicate", c.span, &mut violations);
        }
        for t in &r.head.args {
            check(t, "the rule head", r.head.span, &mut violations);
        }
    }

    // EDB atoms must match the schema.
    for r in &p.rules {
        for lit in &r.body {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if !idbs.contains(&a.pred) {
                    match schema.relation(&a.pred) {
                        None => violations.push(Violation {
                            kind: ViolationKind::Unsafe,
                            message: format!("unknown relation {}", a.pred),
                            span: a.span,
                        }),
                        Some(decl) if decl.arity() != a.args.len() => {
                            violations.push(Violation {
                                kind: ViolationKind::Unsafe,
                                message: format!(
                                    "atom {} has arity {}, relation has arity {}",
                                    a.pred,
                                    a.args.len(),
                                    decl.arity()
                                ),
                                span: a.span,
                            })
                        }
                        Some(_) => {}
                    }
                }
            }
        }
    }

    FragmentReport::from_violations(Dialect::Datalog, violations)
}

// ---------------------------------------------------------------------------
// RA

fn classify_ra(e: &ra::RaExpr, schema: &Schema) -> FragmentReport {
    // Union and disjunctive selections do not exist in the expression type;
    // schema conformance is the remaining check.
    let mut violations = Vec::new();
    if let Err(err) = ra::output_schema(e, schema) {
        violations.push(Violation {
            kind: ViolationKind::Unsafe,
            message: err.to_string(),
            span: Span::default(),
        });
    }
    FragmentReport::from_violations(Dialect::Ra, violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::trc::AttrRef;
    use crate::catalog::Sort;

    fn schema_rs() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    fn pred(l: AttrRef, op: CompOp, r: Operand) -> TrcFormula {
        TrcFormula::Pred(Predicate {
            left: Operand::Attr(l),
            op,
            right: r,
            span: Span::default(),
        })
    }

    #[test]
    fn canonicalize_hoists_nested_quantifier() {
        // not(exists r in R [r.A = 0 and exists s in S [s.B = r.B]])
        // becomes
        // not(exists r in R, s in S [r.A = 0 and s.B = r.B])
        let inner = TrcFormula::Exists(
            vec![Quantifier::new("s", "S")],
            Box::new(pred(
                AttrRef::new("s", "B"),
                CompOp::Eq,
                Operand::Attr(AttrRef::new("r", "B")),
            )),
        );
        let body = TrcFormula::Not(Box::new(TrcFormula::Exists(
            vec![Quantifier::new("r", "R")],
            Box::new(TrcFormula::And(vec![
                pred(
                    AttrRef::new("r", "A"),
                    CompOp::Eq,
                    Operand::Const(crate::catalog::Value::Int(0)),
                ),
                inner,
            ])),
        )));
        let q = TrcQuery { output: None, body };
        let canon = canonicalize_trc(&q).unwrap();
        match &canon.body {
            TrcFormula::Not(inner) => match inner.as_ref() {
                TrcFormula::Exists(qs, _) => {
                    assert_eq!(
                        qs.iter().map(|q| q.var.as_str()).collect::<Vec<_>>(),
                        vec!["r", "s"]
                    );
                }
                other => panic!("expected scope head, got {other:?}"),
            },
            other => panic!("expected negation, got {other:?}"),
        }
        // Idempotent.
        let again = canonicalize_trc(&canon).unwrap();
        assert_eq!(again, canon);
    }

    #[test]
    fn canonicalize_preserves_signature() {
        let body = TrcFormula::Exists(
            vec![Quantifier::new("r", "R")],
            Box::new(TrcFormula::Exists(
                vec![Quantifier::new("s", "S")],
                Box::new(pred(
                    AttrRef::new("s", "B"),
                    CompOp::Eq,
                    Operand::Attr(AttrRef::new("r", "B")),
                )),
            )),
        );
        let q = TrcQuery { output: None, body };
        let before: Vec<String> = q.quantifiers().iter().map(|x| x.rel.clone()).collect();
        let canon = canonicalize_trc(&q).unwrap();
        let after: Vec<String> = canon.quantifiers().iter().map(|x| x.rel.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn unguarded_inner_negation_is_reported() {
        // not(exists r in R [not (r.A = 0)]) violates guardedness
        let body = TrcFormula::Not(Box::new(TrcFormula::Exists(
            vec![Quantifier::new("r", "R")],
            Box::new(TrcFormula::Not(Box::new(pred(
                AttrRef::new("r", "A"),
                CompOp::Eq,
                Operand::Const(crate::catalog::Value::Int(0)),
            )))),
        )));
        let q = Query::Trc(TrcQuery { output: None, body });
        let report = check_guarded(&q, &schema_rs());
        assert!(!report.guarded);
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn inequality_form_is_guarded() {
        // not(exists r in R [r.A != 0]) is allowed
        let body = TrcFormula::Not(Box::new(TrcFormula::Exists(
            vec![Quantifier::new("r", "R")],
            Box::new(pred(
                AttrRef::new("r", "A"),
                CompOp::Ne,
                Operand::Const(crate::catalog::Value::Int(0)),
            )),
        )));
        let q = Query::Trc(TrcQuery { output: None, body });
        let report = check_guarded(&q, &schema_rs());
        assert!(report.guarded, "{:?}", report.violations);
    }

    #[test]
    fn constant_only_predicate_is_unguarded() {
        let body = TrcFormula::Exists(
            vec![Quantifier::new("r", "R")],
            Box::new(TrcFormula::Pred(Predicate {
                left: Operand::Const(crate::catalog::Value::Int(1)),
                op: CompOp::Eq,
                right: Operand::Const(crate::catalog::Value::Int(1)),
                span: Span::default(),
            })),
        );
        let q = Query::Trc(TrcQuery { output: None, body });
        let report = check_guarded(&q, &schema_rs());
        assert!(!report.guarded);
    }
}
