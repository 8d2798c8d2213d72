//! Structural evaluation of algebra expressions.

use std::collections::BTreeSet;

use crate::ast::ra::{self, RaCol, RaCond, RaColRef, RaExpr, RaRhs};
use crate::ast::CompOp;
use crate::catalog::{Database, Value};
use crate::eval::ResultRelation;
use crate::{Error, Result};

pub fn eval_ra(e: &RaExpr, db: &Database) -> Result<ResultRelation> {
    let (cols, tuples) = eval(e, db)?;
    Ok(ResultRelation {
        attrs: cols.into_iter().map(|c| (c.attr, c.sort)).collect(),
        tuples,
    })
}

type Rel = (Vec<RaCol>, BTreeSet<Vec<Value>>);

fn eval(e: &RaExpr, db: &Database) -> Result<Rel> {
    match e {
        RaExpr::Relation { name, .. } => {
            let cols = ra::output_schema(e, &db.schema)?;
            Ok((cols, db.tuples(name).clone()))
        }
        RaExpr::Project { cols, input } => {
            let (in_cols, in_tuples) = eval(input, db)?;
            let indexes = cols
                .iter()
                .map(|c| ra::resolve_index(&in_cols, c))
                .collect::<Result<Vec<_>>>()?;
            let out_cols: Vec<RaCol> = indexes.iter().map(|&i| in_cols[i].clone()).collect();
            let tuples = in_tuples
                .iter()
                .map(|t| indexes.iter().map(|&i| t[i].clone()).collect())
                .collect();
            Ok((out_cols, tuples))
        }
        RaExpr::Select { conds, input } => {
            let (cols, tuples) = eval(input, db)?;
            let compiled = compile_conds(&cols, conds)?;
            let tuples = tuples
                .into_iter()
                .filter(|t| conds_hold(&compiled, t, t))
                .collect();
            Ok((cols, tuples))
        }
        RaExpr::Product { left, right } => {
            let (lc, lt) = eval(left, db)?;
            let (rc, rt) = eval(right, db)?;
            let mut cols = lc;
            cols.extend(rc);
            let mut tuples = BTreeSet::new();
            for a in &lt {
                for b in &rt {
                    let mut t = a.clone();
                    t.extend(b.iter().cloned());
                    tuples.insert(t);
                }
            }
            Ok((cols, tuples))
        }
        RaExpr::Join { conds, left, right } => {
            let (lc, lt) = eval(left, db)?;
            let (rc, rt) = eval(right, db)?;
            if conds.is_empty() {
                // Natural join: equality on shared attribute names, shared
                // right columns collapsed away.
                let pairs = ra::natural_pairs(&lc, &rc);
                let keep: Vec<usize> = (0..rc.len())
                    .filter(|j| !pairs.iter().any(|(_, pj)| pj == j))
                    .collect();
                let mut cols = lc.clone();
                cols.extend(keep.iter().map(|&j| rc[j].clone()));
                let mut tuples = BTreeSet::new();
                for a in &lt {
                    for b in &rt {
                        if pairs.iter().all(|&(i, j)| a[i] == b[j]) {
                            let mut t = a.clone();
                            t.extend(keep.iter().map(|&j| b[j].clone()));
                            tuples.insert(t);
                        }
                    }
                }
                Ok((cols, tuples))
            } else {
                let mut cols = lc;
                cols.extend(rc);
                let compiled = compile_conds(&cols, conds)?;
                let mut tuples = BTreeSet::new();
                for a in &lt {
                    for b in &rt {
                        let mut t = a.clone();
                        t.extend(b.iter().cloned());
                        if conds_hold(&compiled, &t, &t) {
                            tuples.insert(t);
                        }
                    }
                }
                Ok((cols, tuples))
            }
        }
        RaExpr::Minus { left, right } => {
            let (lc, lt) = eval(left, db)?;
            let (rc, rt) = eval(right, db)?;
            if lc.len() != rc.len() {
                return Err(Error::Eval(format!(
                    "minus operands have arities {} and {}",
                    lc.len(),
                    rc.len()
                )));
            }
            let tuples = lt.into_iter().filter(|t| !rt.contains(t)).collect();
            Ok((lc, tuples))
        }
        RaExpr::Rename { .. } => {
            let cols = ra::output_schema(e, &db.schema)?;
            let RaExpr::Rename { input, .. } = e else { unreachable!() };
            let (_, tuples) = eval(input, db)?;
            Ok((cols, tuples))
        }
        RaExpr::Antijoin { conds, left, right } => {
            let (lc, lt) = eval(left, db)?;
            let (rc, rt) = eval(right, db)?;
            let pairs: Vec<(usize, usize)> = if conds.is_empty() {
                ra::natural_pairs(&lc, &rc)
            } else {
                conds
                    .iter()
                    .map(|c| {
                        if c.op != CompOp::Eq {
                            return Err(Error::Eval(
                                "antijoin conditions must be equalities".into(),
                            ));
                        }
                        let i = resolve_side(&lc, &rc, &c.left)?;
                        let rhs = match &c.right {
                            RaRhs::Col(r) => r,
                            RaRhs::Const(_) => {
                                return Err(Error::Eval(
                                    "antijoin conditions must compare attributes".into(),
                                ))
                            }
                        };
                        let j = resolve_side(&lc, &rc, rhs)?;
                        match (i, j) {
                            (Side::Left(i), Side::Right(j)) | (Side::Right(j), Side::Left(i)) => {
                                Ok((i, j))
                            }
                            _ => Err(Error::Eval(format!(
                                "antijoin condition {} does not relate the two sides",
                                c.left
                            ))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let tuples = lt
                .into_iter()
                .filter(|a| !rt.iter().any(|b| pairs.iter().all(|&(i, j)| a[i] == b[j])))
                .collect();
            Ok((lc, tuples))
        }
    }
}

enum Side {
    Left(usize),
    Right(usize),
}

fn resolve_side(left: &[RaCol], right: &[RaCol], r: &RaColRef) -> Result<Side> {
    match (
        ra::resolve_index(left, r),
        ra::resolve_index(right, r),
    ) {
        (Ok(i), Err(_)) => Ok(Side::Left(i)),
        (Err(_), Ok(j)) => Ok(Side::Right(j)),
        (Ok(_), Ok(_)) => Err(Error::Eval(format!("ambiguous antijoin column {r}"))),
        (Err(e), Err(_)) => Err(e),
    }
}

enum CompiledRhs {
    Col(usize),
    Const(Value),
}

fn compile_conds(cols: &[RaCol], conds: &[RaCond]) -> Result<Vec<(usize, CompOp, CompiledRhs)>> {
    conds
        .iter()
        .map(|c| {
            let left = ra::resolve_index(cols, &c.left)?;
            let rhs = match &c.right {
                RaRhs::Col(r) => CompiledRhs::Col(ra::resolve_index(cols, r)?),
                RaRhs::Const(v) => CompiledRhs::Const(v.clone()),
            };
            Ok((left, c.op, rhs))
        })
        .collect()
}

fn conds_hold(compiled: &[(usize, CompOp, CompiledRhs)], left: &[Value], right: &[Value]) -> bool {
    compiled.iter().all(|(i, op, rhs)| {
        let l = &left[*i];
        let r = match rhs {
            CompiledRhs::Col(j) => &right[*j],
            CompiledRhs::Const(v) => v,
        };
        match l.compare(r) {
            Ok(ord) => op.eval(ord),
            Err(_) => false,
        }
    })
}

pub fn collect_constants(e: &RaExpr, add: &mut impl FnMut(&Value)) {
    match e {
        RaExpr::Relation { .. } => {}
        RaExpr::Project { input, .. } | RaExpr::Rename { input, .. } => {
            collect_constants(input, add)
        }
        RaExpr::Select { conds, input } => {
            for c in conds {
                if let RaRhs::Const(v) = &c.right {
                    add(v);
                }
            }
            collect_constants(input, add);
        }
        RaExpr::Product { left, right } | RaExpr::Minus { left, right } => {
            collect_constants(left, add);
            collect_constants(right, add);
        }
        RaExpr::Join { conds, left, right } | RaExpr::Antijoin { conds, left, right } => {
            for c in conds {
                if let RaRhs::Const(v) = &c.right {
                    add(v);
                }
            }
            collect_constants(left, add);
            collect_constants(right, add);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_database;
    use crate::parse::parse_ra;

    fn db() -> Database {
        load_database(
            "relation R(A:int, B:int)\nrelation S(B:int)\nR(1,10)\nR(1,20)\nR(2,10)\nS(10)\nS(20)\n",
        )
        .unwrap()
    }

    #[test]
    fn division_expression() {
        let e = parse_ra("minus(project[A](R), project[A](minus(times(project[A](R), S), R)))")
            .unwrap();
        let result = eval_ra(&e, &db()).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn division_with_antijoins() {
        let e = parse_ra(
            "antijoin[](project[A](R), project[A](antijoin[](times(project[A](R), S), R)))",
        )
        .unwrap();
        let result = eval_ra(&e, &db()).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn select_with_qualified_columns() {
        let text = "relation R(A:int)\nrelation S(A:int)\nR(1)\nR(5)\nS(3)\n";
        let db = load_database(text).unwrap();
        let e = parse_ra("minus(R, project[R.A](select[S.A < R.A](times(R, S))))").unwrap();
        let result = eval_ra(&e, &db).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn natural_join_collapses_shared_columns() {
        let db = load_database("relation R(A:int)\nrelation S(A:int)\nR(1)\nR(2)\nS(2)\n").unwrap();
        let e = parse_ra("join[](R, S)").unwrap();
        let result = eval_ra(&e, &db).unwrap();
        assert_eq!(result.attrs.len(), 1);
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(2)]));
    }

    #[test]
    fn antijoin_explicit_condition() {
        let e = parse_ra("antijoin[R.B = S.B](R, S)").unwrap();
        let result = eval_ra(&e, &db()).unwrap();
        // R tuples whose B has no partner in S: none (10 and 20 both in S).
        assert!(result.tuples.is_empty());
    }
}
