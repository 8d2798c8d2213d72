//! Bottom-up evaluation of non-recursive programs, rule by rule in program
//! order. The head of the last rule is the answer.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::datalog::{Atom, DatalogProgram, Literal, Rule, Term};
use crate::catalog::{Database, Schema, Sort, Value};
use crate::eval::ResultRelation;
use crate::{Error, Result};

type Bindings = BTreeMap<String, Value>;
type Stored = BTreeMap<String, (Vec<Sort>, BTreeSet<Vec<Value>>)>;

pub fn eval_datalog(p: &DatalogProgram, db: &Database) -> Result<ResultRelation> {
    let report = crate::ast::fragment::classify(&crate::Query::Datalog(p.clone()), &db.schema);
    if !report.safe || !report.non_disjunctive {
        let msg = report
            .violations
            .first()
            .map(|v| v.message.clone())
            .unwrap_or_else(|| "program violates the fragment".into());
        return Err(Error::Fragment(msg));
    }
    let mut idbs: Stored = BTreeMap::new();
    for rule in &p.rules {
        let (sorts, tuples) = eval_rule(rule, db, &idbs)?;
        idbs.insert(rule.head.pred.clone(), (sorts, tuples));
    }
    let query = p
        .query_rule()
        .ok_or_else(|| Error::Eval("empty program".into()))?;
    let (sorts, tuples) = idbs.remove(&query.head.pred).expect("just stored");
    let attrs = query
        .head
        .args
        .iter()
        .zip(sorts)
        .map(|(t, s)| {
            let name = match t {
                Term::Var(v) => v.clone(),
                Term::Const(_) => "c".to_string(),
            };
            (name, s)
        })
        .collect();
    Ok(ResultRelation { attrs, tuples })
}

fn eval_rule(rule: &Rule, db: &Database, idbs: &Stored) -> Result<(Vec<Sort>, BTreeSet<Vec<Value>>)> {
    let positives: Vec<&Atom> = rule.positive_atoms().collect();
    let mut tuples = BTreeSet::new();
    let mut env = Bindings::new();
    eval_positives(&positives, 0, rule, db, idbs, &mut env, &mut tuples)?;

    // Head sorts come from the variable bindings of the rule.
    let var_sorts = rule_var_sorts(rule, db, idbs)?;
    let sorts = rule
        .head
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => var_sorts
                .get(v)
                .copied()
                .ok_or_else(|| Error::Eval(format!("head variable {v} is unbound"))),
            Term::Const(v) => Ok(v.sort()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sorts, tuples))
}

fn eval_positives(
    positives: &[&Atom],
    index: usize,
    rule: &Rule,
    db: &Database,
    idbs: &Stored,
    env: &mut Bindings,
    out: &mut BTreeSet<Vec<Value>>,
) -> Result<()> {
    if index == positives.len() {
        if rule_filters_hold(rule, db, idbs, env)? {
            let tuple = rule
                .head
                .args
                .iter()
                .map(|t| term_value(t, env))
                .collect::<Result<Vec<_>>>()?;
            out.insert(tuple);
        }
        return Ok(());
    }
    let atom = positives[index];
    let relation = relation_tuples(&atom.pred, db, idbs)?;
    for tuple in relation {
        let mut added = Vec::new();
        if match_atom(atom, &tuple, env, &mut added)? {
            eval_positives(positives, index + 1, rule, db, idbs, env, out)?;
        }
        for v in added {
            env.remove(&v);
        }
    }
    Ok(())
}

fn relation_tuples(pred: &str, db: &Database, idbs: &Stored) -> Result<Vec<Vec<Value>>> {
    if let Some((_, tuples)) = idbs.get(pred) {
        return Ok(tuples.iter().cloned().collect());
    }
    if db.schema.relation(pred).is_some() {
        return Ok(db.tuples(pred).iter().cloned().collect());
    }
    Err(Error::Eval(format!("unknown predicate {pred}")))
}

fn match_atom(
    atom: &Atom,
    tuple: &[Value],
    env: &mut Bindings,
    added: &mut Vec<String>,
) -> Result<bool> {
    if atom.args.len() != tuple.len() {
        return Err(Error::Eval(format!(
            "atom {} arity mismatch ({} vs {})",
            atom.pred,
            atom.args.len(),
            tuple.len()
        )));
    }
    for (term, value) in atom.args.iter().zip(tuple) {
        match term {
            Term::Const(c) => {
                if c != value {
                    return Ok(false);
                }
            }
            Term::Var(v) => match env.get(v) {
                Some(bound) => {
                    if bound != value {
                        return Ok(false);
                    }
                }
                None => {
                    env.insert(v.clone(), value.clone());
                    added.push(v.clone());
                }
            },
        }
    }
    Ok(true)
}

fn rule_filters_hold(rule: &Rule, db: &Database, idbs: &Stored, env: &Bindings) -> Result<bool> {
    for cmp in rule.comparisons() {
        let left = term_value(&cmp.left, env)?;
        let right = term_value(&cmp.right, env)?;
        if !cmp.op.eval(left.compare(&right)?) {
            return Ok(false);
        }
    }
    for atom in rule.negated_atoms() {
        let relation = relation_tuples(&atom.pred, db, idbs)?;
        let mut matched = false;
        for tuple in &relation {
            let mut scratch = env.clone();
            let mut added = Vec::new();
            if match_atom(atom, tuple, &mut scratch, &mut added)? {
                matched = true;
                break;
            }
        }
        if matched {
            return Ok(false);
        }
    }
    Ok(true)
}

fn term_value(t: &Term, env: &Bindings) -> Result<Value> {
    match t {
        Term::Const(v) => Ok(v.clone()),
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| Error::Eval(format!("unbound variable {v}"))),
    }
}

/// Sorts of every variable, from its first occurrence in a positive atom.
fn rule_var_sorts(rule: &Rule, db: &Database, idbs: &Stored) -> Result<BTreeMap<String, Sort>> {
    let mut out = BTreeMap::new();
    for atom in rule.positive_atoms() {
        let sorts: Vec<Sort> = if let Some((sorts, _)) = idbs.get(&atom.pred) {
            sorts.clone()
        } else if let Some(decl) = db.schema.relation(&atom.pred) {
            decl.sorts()
        } else {
            return Err(Error::Eval(format!("unknown predicate {}", atom.pred)));
        };
        if sorts.len() != atom.args.len() {
            return Err(Error::Eval(format!("atom {} arity mismatch", atom.pred)));
        }
        for (t, s) in atom.args.iter().zip(sorts) {
            if let Term::Var(v) = t {
                out.entry(v.clone()).or_insert(s);
            }
        }
    }
    Ok(out)
}

pub fn datalog_output_schema(p: &DatalogProgram, schema: &Schema) -> Result<Vec<(String, Sort)>> {
    // Walk the rules in order, tracking IDB sorts, without any data.
    let mut idb_sorts: BTreeMap<String, Vec<Sort>> = BTreeMap::new();
    let mut result = Vec::new();
    for rule in &p.rules {
        let mut var_sorts: BTreeMap<String, Sort> = BTreeMap::new();
        for atom in rule.positive_atoms() {
            let sorts = if let Some(s) = idb_sorts.get(&atom.pred) {
                s.clone()
            } else if let Some(decl) = schema.relation(&atom.pred) {
                decl.sorts()
            } else {
                return Err(Error::Schema(format!("unknown relation {}", atom.pred)));
            };
            if sorts.len() != atom.args.len() {
                return Err(Error::Schema(format!(
                    "atom {} has arity {}, expected {}",
                    atom.pred,
                    atom.args.len(),
                    sorts.len()
                )));
            }
            for (t, s) in atom.args.iter().zip(sorts) {
                if let Term::Var(v) = t {
                    var_sorts.entry(v.clone()).or_insert(s);
                }
            }
        }
        let head_sorts = rule
            .head
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => var_sorts
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("head variable {v} is unbound"))),
                Term::Const(v) => Ok(v.sort()),
            })
            .collect::<Result<Vec<_>>>()?;
        idb_sorts.insert(rule.head.pred.clone(), head_sorts.clone());
        result = rule
            .head
            .args
            .iter()
            .zip(head_sorts)
            .map(|(t, s)| {
                let name = match t {
                    Term::Var(v) => v.clone(),
                    Term::Const(_) => "c".to_string(),
                };
                (name, s)
            })
            .collect();
    }
    Ok(result)
}

pub fn collect_constants(p: &DatalogProgram, add: &mut impl FnMut(&Value)) {
    for rule in &p.rules {
        for t in &rule.head.args {
            if let Term::Const(v) = t {
                add(v);
            }
        }
        for lit in &rule.body {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => {
                    for t in &a.args {
                        if let Term::Const(v) = t {
                            add(v);
                        }
                    }
                }
                Literal::Cmp(c) => {
                    if let Term::Const(v) = &c.left {
                        add(v);
                    }
                    if let Term::Const(v) = &c.right {
                        add(v);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_database;
    use crate::parse::parse_datalog;

    #[test]
    fn division_program_evaluates() {
        let db = load_database(
            "relation R(A:int, B:int)\nrelation S(B:int)\nR(1,10)\nR(1,20)\nR(2,10)\nS(10)\nS(20)\n",
        )
        .unwrap();
        let p = parse_datalog("I(x) :- R(x,_), S(y), not R(x,y).\nQ(x) :- R(x,_), not I(x).")
            .unwrap();
        let result = eval_datalog(&p, &db).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn builtin_comparison() {
        let db = load_database("relation R(A:int)\nrelation S(A:int)\nR(1)\nR(5)\nS(3)\n").unwrap();
        let p = parse_datalog("I(x) :- R(x), S(y), x > y.\nQ(x) :- R(x), not I(x).").unwrap();
        let result = eval_datalog(&p, &db).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn unsafe_rule_is_rejected() {
        let db = load_database("relation R(A:int)\nrelation S(A:int)\n").unwrap();
        let p = parse_datalog("Q(x) :- S(y), not R(x, y).").unwrap();
        assert!(eval_datalog(&p, &db).is_err());
    }

    #[test]
    fn boolean_program() {
        let db = load_database("relation R(A:int)\nR(1)\n").unwrap();
        let p = parse_datalog("I(x) :- R(x).\nQ :- not I(2).").unwrap();
        // "not I(2)": no variables, safety holds vacuously.
        let result = eval_datalog(&p, &db).unwrap();
        assert!(result.truth());
    }
}
