//! Calculus evaluation by scope-by-scope assignment enumeration.
//!
//! Within one negation scope, quantifiers hoist past conjunctions, so each
//! region is flattened to a quantifier prefix plus a matrix of predicates,
//! negated subregions, and (for the disjunctive extension) disjunctions.
//! Output tuples are projected from the root assignments; when linkage
//! predicates still sit inside disjuncts, candidate output tuples are drawn
//! from the active domain instead and checked against the formula.

use std::collections::BTreeMap;

use crate::ast::trc::{Operand, Predicate, Quantifier, TrcFormula, TrcQuery};
use crate::catalog::{Database, Schema, Sort, Value};
use crate::eval::ResultRelation;
use crate::{Error, Result};

/// A tuple binding: variable -> (relation name, tuple).
type Env = BTreeMap<String, (String, Vec<Value>)>;

pub fn eval_trc(q: &TrcQuery, db: &Database) -> Result<ResultRelation> {
    crate::ast::fragment::validate_trc(q, &db.schema)?;
    match &q.output {
        None => Ok(ResultRelation::boolean(sat_region(
            &q.body,
            &Env::new(),
            db,
        )?)),
        Some(out) => {
            let attrs = trc_output_schema(q, &db.schema)?;
            let unresolved = out.attrs.iter().any(|a| a.source.is_none());
            if unresolved {
                eval_by_candidates(q, &attrs, db)
            } else {
                eval_by_assignment(q, &attrs, db)
            }
        }
    }
}

/// Root-region enumeration: assign the non-negated quantifiers, check the
/// matrix, and project the output sources.
fn eval_by_assignment(
    q: &TrcQuery,
    attrs: &[(String, Sort)],
    db: &Database,
) -> Result<ResultRelation> {
    let out = q.output.as_ref().expect("non-Boolean");
    let (vars, matrix) = flatten_region(&q.body);
    let mut result = ResultRelation {
        attrs: attrs.to_vec(),
        tuples: Default::default(),
    };
    let sources: Vec<&crate::ast::trc::AttrRef> = out
        .attrs
        .iter()
        .map(|a| a.source.as_ref().expect("resolved linkage"))
        .collect();
    for_each_assignment(&vars, &Env::new(), db, &mut |env| {
        if matrix_holds(&matrix, env, db)? {
            let tuple = sources
                .iter()
                .map(|s| attr_value(s.var.as_str(), s.attr.as_str(), env, &db.schema))
                .collect::<Result<Vec<_>>>()?;
            result.tuples.insert(tuple);
        }
        Ok(())
    })?;
    Ok(result)
}

/// Candidate enumeration for queries whose linkage predicates still sit
/// inside disjuncts: bind the output table to every candidate tuple over
/// the active domain and test satisfaction.
fn eval_by_candidates(
    q: &TrcQuery,
    attrs: &[(String, Sort)],
    db: &Database,
) -> Result<ResultRelation> {
    let out = q.output.as_ref().expect("non-Boolean");
    let mut result = ResultRelation {
        attrs: attrs.to_vec(),
        tuples: Default::default(),
    };
    let domains: Vec<Vec<Value>> = attrs
        .iter()
        .map(|(_, sort)| db.active_domain(*sort).into_iter().collect())
        .collect();
    let mut candidate = Vec::with_capacity(attrs.len());
    // The output table acts as a free tuple variable named after itself,
    // with a pseudo-relation carrying the declared attributes.
    let pseudo_rel = format!("__out_{}", out.name);
    let mut schema_ext = db.schema.clone();
    schema_ext
        .add_relation(
            &pseudo_rel,
            attrs.iter().map(|(n, s)| (n.as_str(), *s)).collect(),
        )
        .map_err(|e| Error::Eval(e.to_string()))?;
    let db_ext = rebind_db(db, &schema_ext)?;
    // Linkages that were already extracted re-enter the matrix so they
    // constrain the candidate exactly like the in-body ones.
    let mut conjuncts = vec![q.body.clone()];
    for a in &out.attrs {
        if let Some(source) = &a.source {
            conjuncts.push(TrcFormula::Pred(Predicate {
                left: Operand::Attr(crate::ast::trc::AttrRef {
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
    let body = TrcFormula::And(conjuncts);
    enumerate_candidates(&domains, 0, &mut candidate, &mut |tuple| {
        let mut env = Env::new();
        env.insert(out.name.clone(), (pseudo_rel.clone(), tuple.to_vec()));
        if sat_region(&body, &env, &db_ext)? {
            result.tuples.insert(tuple.to_vec());
        }
        Ok(())
    })?;
    Ok(result)
}

fn rebind_db(db: &Database, schema: &Schema) -> Result<Database> {
    let mut out = Database::empty(schema.clone());
    for rel in db.schema.relations() {
        for tuple in db.tuples(&rel.name) {
            out.insert(&rel.name, tuple.clone())
                .map_err(|e| Error::Eval(e.to_string()))?;
        }
    }
    Ok(out)
}

fn enumerate_candidates(
    domains: &[Vec<Value>],
    index: usize,
    acc: &mut Vec<Value>,
    f: &mut impl FnMut(&[Value]) -> Result<()>,
) -> Result<()> {
    if index == domains.len() {
        return f(acc);
    }
    for v in &domains[index] {
        acc.push(v.clone());
        enumerate_candidates(domains, index + 1, acc, f)?;
        acc.pop();
    }
    Ok(())
}

/// One flattened negation region: quantifier prefix plus matrix conjuncts.
enum Conjunct<'a> {
    Pred(&'a Predicate),
    Not(&'a TrcFormula),
    Or(&'a [TrcFormula]),
}

fn flatten_region(f: &TrcFormula) -> (Vec<&Quantifier>, Vec<Conjunct<'_>>) {
    let mut vars = Vec::new();
    let mut matrix = Vec::new();
    fn go<'a>(f: &'a TrcFormula, vars: &mut Vec<&'a Quantifier>, matrix: &mut Vec<Conjunct<'a>>) {
        match f {
            TrcFormula::And(fs) => fs.iter().for_each(|g| go(g, vars, matrix)),
            TrcFormula::Exists(qs, g) => {
                vars.extend(qs.iter());
                go(g, vars, matrix);
            }
            TrcFormula::Not(g) => matrix.push(Conjunct::Not(g)),
            TrcFormula::Or(fs) => matrix.push(Conjunct::Or(fs)),
            TrcFormula::Pred(p) => matrix.push(Conjunct::Pred(p)),
        }
    }
    go(f, &mut vars, &mut matrix);
    (vars, matrix)
}

/// Does the region rooted at `f` hold under `env`?
fn sat_region(f: &TrcFormula, env: &Env, db: &Database) -> Result<bool> {
    let (vars, matrix) = flatten_region(f);
    let mut found = false;
    for_each_assignment(&vars, env, db, &mut |env| {
        if !found && matrix_holds(&matrix, env, db)? {
            found = true;
        }
        Ok(())
    })?;
    Ok(found)
}

fn matrix_holds(matrix: &[Conjunct<'_>], env: &Env, db: &Database) -> Result<bool> {
    for c in matrix {
        let holds = match c {
            Conjunct::Pred(p) => eval_pred(p, env, db)?,
            Conjunct::Not(g) => !sat_region(g, env, db)?,
            Conjunct::Or(branches) => {
                let mut any = false;
                for b in branches.iter() {
                    if sat_region(b, env, db)? {
                        any = true;
                        break;
                    }
                }
                any
            }
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

fn for_each_assignment(
    vars: &[&Quantifier],
    env: &Env,
    db: &Database,
    f: &mut impl FnMut(&Env) -> Result<()>,
) -> Result<()> {
    fn go(
        vars: &[&Quantifier],
        env: &mut Env,
        db: &Database,
        f: &mut impl FnMut(&Env) -> Result<()>,
    ) -> Result<()> {
        match vars.split_first() {
            None => f(env),
            Some((q, rest)) => {
                let tuples: Vec<Vec<Value>> = db.tuples(&q.rel).iter().cloned().collect();
                for tuple in tuples {
                    env.insert(q.var.clone(), (q.rel.clone(), tuple));
                    go(rest, env, db, f)?;
                }
                env.remove(&q.var);
                Ok(())
            }
        }
    }
    let mut env = env.clone();
    go(vars, &mut env, db, f)
}

fn eval_pred(p: &Predicate, env: &Env, db: &Database) -> Result<bool> {
    let left = operand_value(&p.left, env, &db.schema)?;
    let right = operand_value(&p.right, env, &db.schema)?;
    Ok(p.op.eval(left.compare(&right)?))
}

fn operand_value(o: &Operand, env: &Env, schema: &Schema) -> Result<Value> {
    match o {
        Operand::Const(v) => Ok(v.clone()),
        Operand::Attr(a) => attr_value(&a.var, &a.attr, env, schema),
    }
}

fn attr_value(var: &str, attr: &str, env: &Env, schema: &Schema) -> Result<Value> {
    let (rel, tuple) = env
        .get(var)
        .ok_or_else(|| Error::Eval(format!("unbound variable {var}")))?;
    let decl = schema
        .relation(rel)
        .ok_or_else(|| Error::Eval(format!("unknown relation {rel}")))?;
    let idx = decl
        .attr_index(attr)
        .ok_or_else(|| Error::Eval(format!("relation {rel} has no attribute {attr}")))?;
    Ok(tuple[idx].clone())
}

pub fn trc_output_schema(q: &TrcQuery, schema: &Schema) -> Result<Vec<(String, Sort)>> {
    let Some(out) = &q.output else {
        return Ok(Vec::new());
    };
    let binding = crate::ast::fragment::validate_trc(q, schema)?;
    out.attrs
        .iter()
        .map(|a| {
            let sort = match &a.source {
                Some(source) => {
                    let rel = binding.get(&source.var).ok_or_else(|| {
                        Error::Eval(format!("unscoped variable {}", source.var))
                    })?;
                    schema.attr_sort(rel, &source.attr)?
                }
                None => infer_output_sort(&q.body, &out.name, &a.name, &binding, schema)?,
            };
            Ok((a.name.clone(), sort))
        })
        .collect()
}

/// Infer an unresolved output attribute's sort from the linkage predicates
/// inside the disjuncts.
fn infer_output_sort(
    f: &TrcFormula,
    out_name: &str,
    attr: &str,
    binding: &BTreeMap<String, String>,
    schema: &Schema,
) -> Result<Sort> {
    let mut found: Option<Sort> = None;
    fn walk(
        f: &TrcFormula,
        out_name: &str,
        attr: &str,
        binding: &BTreeMap<String, String>,
        schema: &Schema,
        found: &mut Option<Sort>,
    ) -> Result<()> {
        match f {
            TrcFormula::And(fs) | TrcFormula::Or(fs) => fs
                .iter()
                .try_for_each(|g| walk(g, out_name, attr, binding, schema, found)),
            TrcFormula::Not(g) | TrcFormula::Exists(_, g) => {
                walk(g, out_name, attr, binding, schema, found)
            }
            TrcFormula::Pred(p) => {
                let mut check = |a: &crate::ast::trc::AttrRef, other: &Operand| -> Result<()> {
                    if a.var == out_name && a.attr == attr {
                        let sort = match other {
                            Operand::Const(v) => v.sort(),
                            Operand::Attr(o) => {
                                let rel = binding.get(&o.var).ok_or_else(|| {
                                    Error::Eval(format!("unscoped variable {}", o.var))
                                })?;
                                schema.attr_sort(rel, &o.attr)?
                            }
                        };
                        if let Some(prev) = found {
                            if *prev != sort {
                                return Err(Error::CrossSortComparison {
                                    left: *prev,
                                    right: sort,
                                });
                            }
                        }
                        *found = Some(sort);
                    }
                    Ok(())
                };
                if let Operand::Attr(a) = &p.left {
                    check(a, &p.right)?;
                }
                if let Operand::Attr(a) = &p.right {
                    check(a, &p.left)?;
                }
                Ok(())
            }
        }
    }
    walk(f, out_name, attr, binding, schema, &mut found)?;
    found.ok_or_else(|| {
        Error::Eval(format!(
            "output attribute {attr} is never linked anywhere in the query"
        ))
    })
}

pub fn collect_constants(f: &TrcFormula, add: &mut impl FnMut(&Value)) {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            fs.iter().for_each(|g| collect_constants(g, add))
        }
        TrcFormula::Not(g) | TrcFormula::Exists(_, g) => collect_constants(g, add),
        TrcFormula::Pred(p) => {
            if let Operand::Const(v) = &p.left {
                add(v);
            }
            if let Operand::Const(v) = &p.right {
                add(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_database;
    use crate::parse::parse_trc;

    fn division_db(rows: &[(i64, i64)], s: &[i64]) -> Database {
        let mut text = String::from("relation R(A:int, B:int)\nrelation S(B:int)\n");
        for (a, b) in rows {
            text.push_str(&format!("R({a}, {b})\n"));
        }
        for b in s {
            text.push_str(&format!("S({b})\n"));
        }
        load_database(&text).unwrap()
    }

    const DIVISION: &str = "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [not (exists r2 in R [r2.B = s.B and r2.A = r.A])])] }";

    #[test]
    fn division_query_answers() {
        let q = parse_trc(DIVISION).unwrap();
        let db = division_db(&[(1, 10), (1, 20), (2, 10)], &[10, 20]);
        let result = eval_trc(&q, &db).unwrap();
        let expected: std::collections::BTreeSet<Vec<Value>> =
            [vec![Value::Int(1)]].into_iter().collect();
        assert_eq!(result.tuples, expected);
    }

    #[test]
    fn division_with_empty_divisor_returns_all() {
        let q = parse_trc(DIVISION).unwrap();
        let db = division_db(&[(1, 10), (2, 20)], &[]);
        let result = eval_trc(&q, &db).unwrap();
        assert_eq!(result.tuples.len(), 2);
    }

    #[test]
    fn boolean_sentence_truth() {
        let q = parse_trc("not (exists r in R [r.A = 1])").unwrap();
        let db = division_db(&[(1, 10)], &[]);
        assert!(!eval_trc(&q, &db).unwrap().truth());
        let db2 = division_db(&[(2, 10)], &[]);
        assert!(eval_trc(&q, &db2).unwrap().truth());
    }

    #[test]
    fn root_disjunction_with_unresolved_linkage() {
        let text = "relation R(A:int)\nrelation S(A:int)\nR(1)\nR(2)\nS(3)\n";
        let db = load_database(text).unwrap();
        let q = parse_trc(
            "{ q(A) | exists r in R [q.A = r.A] or exists s in S [q.A = s.A] }",
        )
        .unwrap();
        let result = eval_trc(&q, &db).unwrap();
        let expected: std::collections::BTreeSet<Vec<Value>> =
            [1, 2, 3].into_iter().map(|n| vec![Value::Int(n)]).collect();
        assert_eq!(result.tuples, expected);
    }

    #[test]
    fn non_canonical_query_evaluates() {
        // Quantifier nested past a conjunction still works.
        let q = parse_trc("{ q(A) | exists r in R [q.A = r.A and exists s in S [s.B = r.B]] }")
            .unwrap();
        let db = division_db(&[(1, 10), (2, 30)], &[10]);
        let result = eval_trc(&q, &db).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }
}
