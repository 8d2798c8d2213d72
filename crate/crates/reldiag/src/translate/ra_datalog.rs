//! Translations between algebra expressions and Datalog programs.
//!
//! Algebra to Datalog is an induction on the expression: products, joins,
//! selections, projections, and renames merge into one rule body; a set
//! difference (or antijoin) materializes its right side as an intermediate
//! predicate and negates it.
//!
//! Datalog to algebra joins the positive atoms left to right in body order.
//! A negated atom whose variables do not cover the positives subtracts a
//! cross product of the negated relation with the projection of the
//! positives onto the complement variables, which repeats table references
//! and loses the pattern; the antijoin variant chains one antijoin per
//! negated atom instead and preserves it.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::datalog::{Atom, Comparison, DatalogProgram, Literal, Rule, Term};
use crate::ast::ra::{self, RaCol, RaColRef, RaCond, RaExpr, RaRhs};
use crate::ast::CompOp;
use crate::catalog::{Schema, Value};
use crate::translate::TranslationTrace;
use crate::{Dialect, Error, Query, Result};

// ---------------------------------------------------------------------------
// RA -> Datalog

pub fn ra_to_datalog(e: &RaExpr, schema: &Schema) -> Result<(DatalogProgram, TranslationTrace)> {
    let report = crate::ast::fragment::classify(&Query::Ra(e.clone()), schema);
    if !report.ok() {
        return Err(Error::Fragment(report.violations[0].message.clone()));
    }
    let mut trace = TranslationTrace::new(Dialect::Ra, Dialect::Datalog);
    let mut ctx = RaCtx {
        schema,
        var_counter: 0,
        idb_counter: 0,
        rules: Vec::new(),
        rule_prov: Vec::new(),
        leaf_counter: 0,
        taken_preds: schema.relations().map(|r| r.name.clone()).collect(),
    };
    let body = ctx.build(e)?;
    let head_args: Vec<Term> = body.cols.iter().map(|c| Term::Var(c.var.clone())).collect();
    let head_name = ctx.fresh_pred("Q");
    let prov: Vec<Option<usize>> = body.literals.iter().map(|(_, p)| *p).collect();
    ctx.rules.push(Rule {
        head: Atom {
            pred: head_name,
            args: head_args,
            span: Default::default(),
        },
        body: body.literals.into_iter().map(|(l, _)| l).collect(),
        span: Default::default(),
    });
    ctx.rule_prov.push(prov);

    let mut program = DatalogProgram { rules: ctx.rules };
    crate::parse::normalize_anon_vars(&mut program);
    let check = crate::ast::fragment::classify(&Query::Datalog(program.clone()), schema);
    if !check.ok() {
        return Err(Error::Translate(format!(
            "produced an invalid program: {}",
            check.violations[0].message
        )));
    }
    trace.push(
        format!(
            "translated {} operator nodes into {} rules",
            count_nodes(e),
            program.rules.len()
        ),
        vec![],
    );

    // Correspondence: leaf order (RA signature) -> EDB atom position.
    let leaves = e.leaves().len();
    let mut corr = vec![usize::MAX; leaves];
    let mut program_pos = 0usize;
    let idbs = program.idb_names();
    for (rule, provs) in program.rules.iter().zip(&ctx.rule_prov) {
        for (lit, prov) in rule.body.iter().zip(provs) {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if !idbs.contains(&a.pred) {
                    if let Some(src) = prov {
                        corr[*src] = program_pos;
                    }
                    program_pos += 1;
                }
            }
        }
    }
    if corr.iter().all(|&i| i != usize::MAX) {
        trace.correspondence = Some(corr);
    }
    Ok((program, trace))
}

fn count_nodes(e: &RaExpr) -> usize {
    match e {
        RaExpr::Relation { .. } => 1,
        RaExpr::Project { input, .. }
        | RaExpr::Select { input, .. }
        | RaExpr::Rename { input, .. } => 1 + count_nodes(input),
        RaExpr::Product { left, right }
        | RaExpr::Join { left, right, .. }
        | RaExpr::Minus { left, right }
        | RaExpr::Antijoin { left, right, .. } => 1 + count_nodes(left) + count_nodes(right),
    }
}

/// A partially built rule body: literals with leaf provenance, plus the
/// output columns with the variables that carry them.
struct Body {
    literals: Vec<(Literal, Option<usize>)>,
    cols: Vec<BodyCol>,
}

#[derive(Clone, Debug)]
struct BodyCol {
    col: RaCol,
    var: String,
}

struct RaCtx<'a> {
    schema: &'a Schema,
    var_counter: usize,
    idb_counter: usize,
    rules: Vec<Rule>,
    rule_prov: Vec<Vec<Option<usize>>>,
    leaf_counter: usize,
    taken_preds: BTreeSet<String>,
}

impl<'a> RaCtx<'a> {
    fn fresh_var(&mut self) -> String {
        self.var_counter += 1;
        format!("x{}", self.var_counter)
    }

    fn fresh_pred(&mut self, base: &str) -> String {
        let mut candidate = base.to_string();
        let mut i = 1;
        while self.taken_preds.contains(&candidate) {
            i += 1;
            candidate = format!("{base}{i}");
        }
        self.taken_preds.insert(candidate.clone());
        candidate
    }

    fn build(&mut self, e: &RaExpr) -> Result<Body> {
        match e {
            RaExpr::Relation { name, .. } => {
                let decl = self
                    .schema
                    .relation(name)
                    .ok_or_else(|| Error::Schema(format!("unknown relation {name}")))?;
                let leaf = self.leaf_counter;
                self.leaf_counter += 1;
                let cols: Vec<BodyCol> = decl
                    .attrs
                    .iter()
                    .map(|a| BodyCol {
                        col: RaCol {
                            rel: Some(name.clone()),
                            attr: a.name.clone(),
                            sort: a.sort,
                        },
                        var: self.fresh_var(),
                    })
                    .collect();
                let atom = Atom {
                    pred: name.clone(),
                    args: cols.iter().map(|c| Term::Var(c.var.clone())).collect(),
                    span: Default::default(),
                };
                Ok(Body {
                    literals: vec![(Literal::Pos(atom), Some(leaf))],
                    cols,
                })
            }
            RaExpr::Project { cols, input } => {
                let body = self.build(input)?;
                let selected = cols
                    .iter()
                    .map(|c| resolve_body(&body.cols, c).cloned())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Body {
                    literals: body.literals,
                    cols: selected,
                })
            }
            RaExpr::Rename { pairs, input } => {
                let mut body = self.build(input)?;
                for (old, new) in pairs {
                    let matches: Vec<usize> = body
                        .cols
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.col.attr == *old)
                        .map(|(i, _)| i)
                        .collect();
                    match matches.as_slice() {
                        [i] => body.cols[*i].col.attr = new.clone(),
                        _ => {
                            return Err(Error::Translate(format!(
                                "rename target {old} is missing or ambiguous"
                            )))
                        }
                    }
                }
                Ok(body)
            }
            RaExpr::Select { conds, input } => {
                let mut body = self.build(input)?;
                for cond in conds {
                    self.apply_cond(&mut body, cond)?;
                }
                Ok(body)
            }
            RaExpr::Product { left, right } => {
                let l = self.build(left)?;
                let r = self.build(right)?;
                let mut literals = l.literals;
                literals.extend(r.literals);
                let mut cols = l.cols;
                cols.extend(r.cols);
                Ok(Body { literals, cols })
            }
            RaExpr::Join { conds, left, right } => {
                let l = self.build(left)?;
                let r = self.build(right)?;
                if conds.is_empty() {
                    // Natural join: unify same-named columns, collapse the
                    // right copies.
                    let mut literals = l.literals;
                    let mut right_literals = r.literals;
                    let mut keep_right = Vec::new();
                    for rc in &r.cols {
                        match l.cols.iter().find(|lc| lc.col.attr == rc.col.attr) {
                            Some(lc) => {
                                substitute_var(&mut right_literals, &rc.var, &lc.var);
                            }
                            None => keep_right.push(rc.clone()),
                        }
                    }
                    literals.extend(right_literals);
                    let mut cols = l.cols;
                    cols.extend(keep_right);
                    Ok(Body { literals, cols })
                } else {
                    let mut literals = l.literals;
                    literals.extend(r.literals);
                    let mut body = Body {
                        literals,
                        cols: {
                            let mut cols = l.cols;
                            cols.extend(r.cols);
                            cols
                        },
                    };
                    for cond in conds {
                        self.apply_cond(&mut body, cond)?;
                    }
                    Ok(body)
                }
            }
            RaExpr::Minus { left, right } => {
                let l = self.build(left)?;
                if let RaExpr::Relation { name, .. } = right.as_ref() {
                    // Subtracting a base relation negates it in place.
                    let leaf = self.leaf_counter;
                    self.leaf_counter += 1;
                    let mut literals = l.literals;
                    literals.push((
                        Literal::Neg(Atom {
                            pred: name.clone(),
                            args: l.cols.iter().map(|c| Term::Var(c.var.clone())).collect(),
                            span: Default::default(),
                        }),
                        Some(leaf),
                    ));
                    return Ok(Body {
                        literals,
                        cols: l.cols,
                    });
                }
                let r = self.build(right)?;
                if l.cols.len() != r.cols.len() {
                    return Err(Error::Schema("minus operands disagree on arity".into()));
                }
                let idb = self.materialize(r)?;
                let mut literals = l.literals;
                literals.push((
                    Literal::Neg(Atom {
                        pred: idb,
                        args: l.cols.iter().map(|c| Term::Var(c.var.clone())).collect(),
                        span: Default::default(),
                    }),
                    None,
                ));
                Ok(Body {
                    literals,
                    cols: l.cols,
                })
            }
            RaExpr::Antijoin { conds, left, right } => {
                let l = self.build(left)?;
                let r = self.build(right)?;
                // Pair the join columns; empty conditions mean natural.
                let pairs: Vec<(usize, usize)> = if conds.is_empty() {
                    let lcols: Vec<RaCol> = l.cols.iter().map(|c| c.col.clone()).collect();
                    let rcols: Vec<RaCol> = r.cols.iter().map(|c| c.col.clone()).collect();
                    crate::ast::ra::natural_pairs(&lcols, &rcols)
                } else {
                    conds
                        .iter()
                        .map(|c| {
                            if c.op != CompOp::Eq {
                                return Err(Error::Translate(
                                    "antijoin conditions must be equalities".into(),
                                ));
                            }
                            let RaRhs::Col(rhs) = &c.right else {
                                return Err(Error::Translate(
                                    "antijoin conditions must compare attributes".into(),
                                ));
                            };
                            match (
                                resolve_body_index(&l.cols, &c.left),
                                resolve_body_index(&r.cols, rhs),
                            ) {
                                (Ok(i), Ok(j)) => Ok((i, j)),
                                _ => match (
                                    resolve_body_index(&l.cols, rhs),
                                    resolve_body_index(&r.cols, &c.left),
                                ) {
                                    (Ok(i), Ok(j)) => Ok((i, j)),
                                    _ => Err(Error::Translate(format!(
                                        "antijoin condition on {} does not relate the sides",
                                        c.left
                                    ))),
                                },
                            }
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                // Project the right side onto its join columns, then negate.
                let proj = Body {
                    literals: r.literals,
                    cols: pairs.iter().map(|&(_, j)| r.cols[j].clone()).collect(),
                };
                let idb = self.materialize(proj)?;
                let mut literals = l.literals;
                literals.push((
                    Literal::Neg(Atom {
                        pred: idb,
                        args: pairs
                            .iter()
                            .map(|&(i, _)| Term::Var(l.cols[i].var.clone()))
                            .collect(),
                        span: Default::default(),
                    }),
                    None,
                ));
                Ok(Body {
                    literals,
                    cols: l.cols,
                })
            }
        }
    }

    /// Apply a selection condition to a body: equalities between columns
    /// unify their variables, everything else becomes a built-in literal.
    fn apply_cond(&mut self, body: &mut Body, cond: &RaCond) -> Result<()> {
        let left = resolve_body(&body.cols, &cond.left)?.clone();
        match (&cond.right, cond.op) {
            (RaRhs::Col(r), CompOp::Eq) => {
                let right = resolve_body(&body.cols, r)?.clone();
                substitute_body(body, &right.var, &left.var);
            }
            (RaRhs::Col(r), op) => {
                let right = resolve_body(&body.cols, r)?.clone();
                body.literals.push((
                    Literal::Cmp(Comparison {
                        left: Term::Var(left.var),
                        op,
                        right: Term::Var(right.var),
                        span: Default::default(),
                    }),
                    None,
                ));
            }
            (RaRhs::Const(v), op) => {
                body.literals.push((
                    Literal::Cmp(Comparison {
                        left: Term::Var(left.var),
                        op,
                        right: Term::Const(v.clone()),
                        span: Default::default(),
                    }),
                    None,
                ));
            }
        }
        Ok(())
    }

    /// Emit an intermediate rule for a body and return its predicate name.
    fn materialize(&mut self, body: Body) -> Result<String> {
        self.idb_counter += 1;
        let name = self.fresh_pred(&format!("I{}", self.idb_counter));
        let prov: Vec<Option<usize>> = body.literals.iter().map(|(_, p)| *p).collect();
        self.rules.push(Rule {
            head: Atom {
                pred: name.clone(),
                args: body.cols.iter().map(|c| Term::Var(c.var.clone())).collect(),
                span: Default::default(),
            },
            body: body.literals.into_iter().map(|(l, _)| l).collect(),
            span: Default::default(),
        });
        self.rule_prov.push(prov);
        Ok(name)
    }
}

fn resolve_body<'b>(cols: &'b [BodyCol], r: &RaColRef) -> Result<&'b BodyCol> {
    let matches: Vec<&BodyCol> = cols
        .iter()
        .filter(|c| c.col.attr == r.attr && (r.rel.is_none() || c.col.rel == r.rel))
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Schema(format!("unknown column {r}"))),
        _ => Err(Error::Schema(format!("ambiguous column {r}"))),
    }
}

fn resolve_body_index(cols: &[BodyCol], r: &RaColRef) -> Result<usize> {
    let matches: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.col.attr == r.attr && (r.rel.is_none() || c.col.rel == r.rel))
        .map(|(i, _)| i)
        .collect();
    match matches.as_slice() {
        [one] => Ok(*one),
        [] => Err(Error::Schema(format!("unknown column {r}"))),
        _ => Err(Error::Schema(format!("ambiguous column {r}"))),
    }
}

fn substitute_var(literals: &mut [(Literal, Option<usize>)], from: &str, to: &str) {
    for (lit, _) in literals {
        match lit {
            Literal::Pos(a) | Literal::Neg(a) => {
                for t in &mut a.args {
                    if let Term::Var(v) = t {
                        if v == from {
                            *v = to.to_string();
                        }
                    }
                }
            }
            Literal::Cmp(c) => {
                for t in [&mut c.left, &mut c.right] {
                    if let Term::Var(v) = t {
                        if v == from {
                            *v = to.to_string();
                        }
                    }
                }
            }
        }
    }
}

fn substitute_body(body: &mut Body, from: &str, to: &str) {
    substitute_var(&mut body.literals, from, to);
    for c in &mut body.cols {
        if c.var == from {
            c.var = to.to_string();
        }
    }
}

// ---------------------------------------------------------------------------
// Datalog -> RA

pub fn datalog_to_ra(
    p: &DatalogProgram,
    schema: &Schema,
    use_antijoin: bool,
) -> Result<(RaExpr, TranslationTrace)> {
    let report = crate::ast::fragment::classify(&Query::Datalog(p.clone()), schema);
    if !report.ok() {
        return Err(Error::Fragment(report.violations[0].message.clone()));
    }
    let mut trace = TranslationTrace::new(Dialect::Datalog, Dialect::Ra);

    // Signature positions of the EDB atoms, in program order.
    let idbs = p.idb_names();
    let mut sig_counter = 0usize;
    let mut completions = 0usize;

    // Translated IDBs: expression, its columns mapped to head positions,
    // and the leaf provenance of the expression.
    let mut env: BTreeMap<String, TranslatedIdb> = BTreeMap::new();
    for rule in &p.rules {
        // Signature indices follow body literal order.
        let atom_sig: Vec<Option<usize>> = rule
            .body
            .iter()
            .map(|lit| match lit {
                Literal::Pos(a) | Literal::Neg(a) if !idbs.contains(&a.pred) => {
                    let idx = sig_counter;
                    sig_counter += 1;
                    Some(idx)
                }
                _ => None,
            })
            .collect();
        let translated = translate_rule(
            rule,
            schema,
            &idbs,
            &env,
            &atom_sig,
            use_antijoin,
            &mut completions,
        )?;
        env.insert(rule.head.pred.clone(), translated);
    }
    let query = p
        .query_rule()
        .ok_or_else(|| Error::Translate("empty program".into()))?;
    let result = env.remove(&query.head.pred).expect("just translated");
    trace.push(
        format!("translated {} rules bottom-up", p.rules.len()),
        vec![],
    );
    if completions > 0 {
        trace.push(
            format!(
                "used the cross-product completion for {completions} negated atoms with uncovered attributes"
            ),
            vec![],
        );
    }
    if use_antijoin {
        trace.push("negated atoms handled by chained antijoins", vec![]);
    }

    // Correspondence: program signature position -> leaf position.
    let mut corr = vec![usize::MAX; sig_counter];
    let mut ok = true;
    for (leaf_pos, src) in result.prov.iter().enumerate() {
        match src {
            Some(s) => {
                if corr[*s] == usize::MAX {
                    corr[*s] = leaf_pos;
                } else {
                    ok = false; // duplicated by a completion
                }
            }
            None => ok = false,
        }
    }
    if ok && corr.iter().all(|&i| i != usize::MAX) {
        trace.correspondence = Some(corr);
    }
    Ok((result.expr, trace))
}

struct TranslatedIdb {
    expr: RaExpr,
    /// Output columns, aligned with the head arguments.
    cols: Vec<RaCol>,
    /// Leaf provenance in expression order; None marks a completion copy.
    prov: Vec<Option<usize>>,
}

/// One variable's carrier column during rule translation.
#[derive(Clone)]
struct VarCol {
    var: String,
    col: RaCol,
}

fn translate_rule(
    rule: &Rule,
    schema: &Schema,
    idbs: &BTreeSet<String>,
    env: &BTreeMap<String, TranslatedIdb>,
    atom_sig: &[Option<usize>],
    use_antijoin: bool,
    completions: &mut usize,
) -> Result<TranslatedIdb> {
    let occurrences = rule.var_occurrences();

    // Positive atoms, joined left to right.
    let mut pos: Option<(RaExpr, Vec<VarCol>, Vec<Option<usize>>)> = None;
    for (li, lit) in rule.body.iter().enumerate() {
        let Literal::Pos(atom) = lit else { continue };
        let (expr, cols, prov) =
            atom_expr(atom, schema, idbs, env, atom_sig[li], &occurrences)?;
        pos = Some(match pos {
            None => (expr, cols, prov),
            Some((le, mut lc, mut lp)) => {
                // Shared variables become join conditions; colliding
                // qualified names on repeated relations get renamed.
                let (re, rc) = disambiguate(expr, cols, &lc);
                let conds: Vec<RaCond> = rc
                    .iter()
                    .filter_map(|c| {
                        lc.iter().find(|l| l.var == c.var).map(|l| RaCond {
                            left: qualified(&l.col),
                            op: CompOp::Eq,
                            right: RaRhs::Col(qualified(&c.col)),
                            span: Default::default(),
                        })
                    })
                    .collect();
                let joined = if conds.is_empty() {
                    RaExpr::Product {
                        left: Box::new(le),
                        right: Box::new(re),
                    }
                } else {
                    RaExpr::Join {
                        conds,
                        left: Box::new(le),
                        right: Box::new(re),
                    }
                };
                // Columns for repeated variables stay in the schema but only
                // the first carries the variable for later references.
                let mut seen: BTreeSet<String> =
                    lc.iter().map(|c| c.var.clone()).collect();
                for c in rc {
                    if seen.insert(c.var.clone()) {
                        lc.push(c);
                    } else {
                        lc.push(VarCol {
                            var: format!("__dup_{}", c.var),
                            col: c.col,
                        });
                    }
                }
                lp.extend(prov);
                (joined, lc, lp)
            }
        });
    }
    let (mut expr, mut carriers, mut prov) = pos.ok_or_else(|| {
        Error::Translate("a rule without positive atoms cannot reach the algebra".into())
    })?;

    // Drop duplicate variable columns so set difference lines up per
    // variable.
    let distinct: Vec<&VarCol> = carriers
        .iter()
        .filter(|c| !c.var.starts_with("__dup_"))
        .collect();
    if distinct.len() != carriers.len() {
        let cols = distinct.iter().map(|c| qualified(&c.col)).collect();
        expr = RaExpr::Project {
            cols,
            input: Box::new(expr),
        };
        carriers = distinct.into_iter().cloned().collect();
    }
    let positives = expr.clone();
    let positives_prov = prov.clone();
    let positive_carriers = carriers.clone();

    // Negated atoms.
    for (li, lit) in rule.body.iter().enumerate() {
        let Literal::Neg(atom) = lit else { continue };
        let (n_expr, n_cols, n_prov) =
            atom_expr(atom, schema, idbs, env, atom_sig[li], &occurrences)?;
        // Columns of the negated side pair with the positive carriers by
        // shared variable.
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (j, c) in n_cols.iter().enumerate() {
            match carriers.iter().position(|l| l.var == c.var) {
                Some(i) => pairs.push((i, j)),
                None => {
                    return Err(Error::Fragment(format!(
                        "variable {} of a negated atom is not bound positively",
                        c.var
                    )))
                }
            }
        }
        if use_antijoin {
            let (n_expr, n_cols2) = disambiguate(n_expr, n_cols, &carriers);
            let conds = pairs
                .iter()
                .map(|&(i, j)| RaCond {
                    left: qualified(&carriers[i].col),
                    op: CompOp::Eq,
                    right: RaRhs::Col(qualified(&n_cols2[j].col)),
                    span: Default::default(),
                })
                .collect();
            expr = RaExpr::Antijoin {
                conds,
                left: Box::new(expr),
                right: Box::new(n_expr),
            };
            prov.extend(n_prov);
        } else {
            // Complement attributes: positive variables the negated atom
            // does not mention.
            let covered: BTreeSet<usize> = pairs.iter().map(|&(i, _)| i).collect();
            let z: Vec<usize> = (0..carriers.len()).filter(|i| !covered.contains(i)).collect();
            let subtrahend_cols: Vec<VarCol> = pairs
                .iter()
                .map(|&(i, j)| VarCol {
                    var: carriers[i].var.clone(),
                    col: n_cols[j].col.clone(),
                })
                .collect();
            let (mut sub_expr, mut sub_cols, mut sub_prov) = if z.is_empty() {
                (n_expr, subtrahend_cols, n_prov)
            } else {
                *completions += 1;
                let z_cols: Vec<RaColRef> =
                    z.iter().map(|&i| qualified(&carriers[i].col)).collect();
                let z_proj = RaExpr::Project {
                    cols: z_cols,
                    input: Box::new(positives.clone()),
                };
                let mut cols: Vec<VarCol> =
                    z.iter().map(|&i| positive_carriers[i].clone()).collect();
                cols.extend(subtrahend_cols);
                let mut prov: Vec<Option<usize>> =
                    positives_prov.iter().map(|_| None).collect();
                prov.extend(n_prov);
                (
                    RaExpr::Product {
                        left: Box::new(z_proj),
                        right: Box::new(n_expr),
                    },
                    cols,
                    prov,
                )
            };
            // Align the subtrahend columns with the carrier order.
            let want: Vec<&str> = carriers.iter().map(|c| c.var.as_str()).collect();
            let have: Vec<&str> = sub_cols.iter().map(|c| c.var.as_str()).collect();
            if want != have {
                let perm: Vec<usize> = want
                    .iter()
                    .map(|v| have.iter().position(|h| h == v).expect("covered"))
                    .collect();
                let cols = perm.iter().map(|&i| qualified(&sub_cols[i].col)).collect();
                sub_expr = RaExpr::Project {
                    cols,
                    input: Box::new(sub_expr),
                };
                sub_cols = perm.iter().map(|&i| sub_cols[i].clone()).collect();
                let _ = &sub_cols;
            }
            expr = RaExpr::Minus {
                left: Box::new(expr),
                right: Box::new(sub_expr),
            };
            prov.extend(sub_prov);
        }
    }

    // Built-in predicates select after the differences.
    let builtins: Vec<&Comparison> = rule.comparisons().collect();
    if !builtins.is_empty() {
        let conds = builtins
            .iter()
            .map(|c| {
                let (left, op, right) = match (&c.left, &c.right) {
                    (Term::Var(l), Term::Var(r)) => {
                        let lc = carrier(&carriers, l)?;
                        let rc = carrier(&carriers, r)?;
                        (qualified(&lc.col), c.op, RaRhs::Col(qualified(&rc.col)))
                    }
                    (Term::Var(l), Term::Const(v)) => {
                        let lc = carrier(&carriers, l)?;
                        (qualified(&lc.col), c.op, RaRhs::Const(v.clone()))
                    }
                    (Term::Const(v), Term::Var(r)) => {
                        let rc = carrier(&carriers, r)?;
                        (qualified(&rc.col), c.op.flip(), RaRhs::Const(v.clone()))
                    }
                    (Term::Const(_), Term::Const(_)) => {
                        return Err(Error::Translate(
                            "constant-to-constant built-ins are not supported".into(),
                        ))
                    }
                };
                Ok(RaCond {
                    left,
                    op,
                    right,
                    span: Default::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        expr = RaExpr::Select {
            conds,
            input: Box::new(expr),
        };
    }

    // Head projection, skipped when it is the identity.
    let head_vars: Vec<&str> = rule
        .head
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Ok(v.as_str()),
            Term::Const(_) => Err(Error::Translate(
                "constant head arguments are not supported".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let identity = head_vars.len() == carriers.len()
        && head_vars
            .iter()
            .zip(&carriers)
            .all(|(v, c)| *v == c.var);
    let (expr, cols) = if identity {
        (expr, carriers.iter().map(|c| c.col.clone()).collect())
    } else {
        let cols: Vec<RaColRef> = head_vars
            .iter()
            .map(|v| carrier(&carriers, v).map(|c| qualified(&c.col)))
            .collect::<Result<Vec<_>>>()?;
        let out_cols = head_vars
            .iter()
            .map(|v| carrier(&carriers, v).map(|c| c.col.clone()))
            .collect::<Result<Vec<_>>>()?;
        (
            RaExpr::Project {
                cols,
                input: Box::new(expr),
            },
            out_cols,
        )
    };
    Ok(TranslatedIdb { expr, cols, prov })
}

fn carrier<'c>(carriers: &'c [VarCol], var: &str) -> Result<&'c VarCol> {
    carriers
        .iter()
        .find(|c| c.var == var)
        .ok_or_else(|| Error::Translate(format!("variable {var} is not bound positively")))
}

fn qualified(col: &RaCol) -> RaColRef {
    RaColRef {
        rel: col.rel.clone(),
        attr: col.attr.clone(),
        span: Default::default(),
    }
}

/// Build the expression for one atom: the base relation or the IDB's
/// expression, with constants and repeated variables selected away and
/// single-use positions projected out.
fn atom_expr(
    atom: &Atom,
    schema: &Schema,
    idbs: &BTreeSet<String>,
    env: &BTreeMap<String, TranslatedIdb>,
    sig: Option<usize>,
    occurrences: &BTreeMap<String, usize>,
) -> Result<(RaExpr, Vec<VarCol>, Vec<Option<usize>>)> {
    let (mut expr, base_cols, prov): (RaExpr, Vec<RaCol>, Vec<Option<usize>>) =
        if idbs.contains(&atom.pred) {
            let idb = env
                .get(&atom.pred)
                .ok_or_else(|| Error::Translate(format!("IDB {} used before defined", atom.pred)))?;
            (idb.expr.clone(), idb.cols.clone(), idb.prov.clone())
        } else {
            let decl = schema
                .relation(&atom.pred)
                .ok_or_else(|| Error::Schema(format!("unknown relation {}", atom.pred)))?;
            let idx = sig.expect("EDB atoms carry a signature index");
            (
                RaExpr::relation(&atom.pred),
                decl.attrs
                    .iter()
                    .map(|a| RaCol {
                        rel: Some(atom.pred.clone()),
                        attr: a.name.clone(),
                        sort: a.sort,
                    })
                    .collect(),
                vec![Some(idx)],
            )
        };
    if atom.args.len() != base_cols.len() {
        return Err(Error::Schema(format!("atom {} arity mismatch", atom.pred)));
    }

    // Selections for constants and within-atom repeats.
    let mut conds = Vec::new();
    let mut first_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, term) in atom.args.iter().enumerate() {
        match term {
            Term::Const(v) => conds.push(RaCond {
                left: qualified(&base_cols[i]),
                op: CompOp::Eq,
                right: RaRhs::Const(v.clone()),
                span: Default::default(),
            }),
            Term::Var(v) => match first_of.get(v.as_str()) {
                Some(&j) => conds.push(RaCond {
                    left: qualified(&base_cols[j]),
                    op: CompOp::Eq,
                    right: RaRhs::Col(qualified(&base_cols[i])),
                    span: Default::default(),
                }),
                None => {
                    first_of.insert(v, i);
                }
            },
        }
    }
    if !conds.is_empty() {
        expr = RaExpr::Select {
            conds,
            input: Box::new(expr),
        };
    }

    // Keep the first position of every variable that occurs more than once
    // in the rule; single-use variables project away.
    let keep: Vec<(usize, &str)> = atom
        .args
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t {
            Term::Var(v)
                if first_of.get(v.as_str()) == Some(&i)
                    && occurrences.get(v).copied().unwrap_or(0) > 1 =>
            {
                Some((i, v.as_str()))
            }
            _ => None,
        })
        .collect();
    if keep.len() != base_cols.len() {
        let cols = keep.iter().map(|&(i, _)| qualified(&base_cols[i])).collect();
        expr = RaExpr::Project {
            cols,
            input: Box::new(expr),
        };
    }
    let cols = keep
        .iter()
        .map(|&(i, v)| VarCol {
            var: v.to_string(),
            col: base_cols[i].clone(),
        })
        .collect();
    Ok((expr, cols, prov))
}

/// Rename attribute-name collisions between a new operand and columns
/// already in scope.
fn disambiguate(expr: RaExpr, cols: Vec<VarCol>, existing: &[VarCol]) -> (RaExpr, Vec<VarCol>) {
    let mut pairs = Vec::new();
    let mut out_cols = Vec::new();
    for c in &cols {
        let clash = existing
            .iter()
            .chain(out_cols.iter())
            .any(|e: &VarCol| e.col.rel == c.col.rel && e.col.attr == c.col.attr);
        if clash {
            let mut n = 2;
            let fresh = loop {
                let candidate = format!("{}{}", c.col.attr, n);
                let taken = existing
                    .iter()
                    .chain(out_cols.iter())
                    .chain(cols.iter())
                    .any(|e| e.col.attr == candidate);
                if !taken {
                    break candidate;
                }
                n += 1;
            };
            pairs.push((c.col.attr.clone(), fresh.clone()));
            out_cols.push(VarCol {
                var: c.var.clone(),
                col: RaCol {
                    rel: c.col.rel.clone(),
                    attr: fresh,
                    sort: c.col.sort,
                },
            });
        } else {
            out_cols.push(c.clone());
        }
    }
    if pairs.is_empty() {
        (expr, out_cols)
    } else {
        (
            RaExpr::Rename {
                pairs,
                input: Box::new(expr),
            },
            out_cols,
        )
    }
}
