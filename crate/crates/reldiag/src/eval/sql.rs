//! Direct evaluation of the SQL fragment under set semantics and binary
//! logic. Correlated subqueries see the enclosing bindings; inner blocks
//! shadow outer ones when resolving column references.

use std::collections::BTreeSet;

use crate::ast::sql::{
    ColRef, Quant, SelectCols, SelectQuery, SqlOperand, SqlPred, SqlQuery,
};
use crate::catalog::{Database, Schema, Sort, Value};
use crate::eval::ResultRelation;
use crate::{Error, Result};

/// Visible bindings, outermost first. Each entry is (binding name,
/// relation name, tuple).
type Env = Vec<(String, String, Vec<Value>)>;

pub fn eval_sql(q: &SqlQuery, db: &Database) -> Result<ResultRelation> {
    match q {
        SqlQuery::Select(sq) => eval_select(sq, &Env::new(), db),
        SqlQuery::SelectNot(p, _) => Ok(ResultRelation::boolean(!eval_pred(
            p,
            &Env::new(),
            db,
        )?)),
        SqlQuery::SelectExists { negated, query, .. } => {
            let truth = !eval_select(query, &Env::new(), db)?.tuples.is_empty();
            Ok(ResultRelation::boolean(truth ^ negated))
        }
        SqlQuery::Union(parts) => {
            let mut acc: Option<ResultRelation> = None;
            for part in parts {
                let r = eval_sql(part, db)?;
                match &mut acc {
                    None => acc = Some(r),
                    Some(a) => {
                        if a.attrs.len() != r.attrs.len()
                            || a
                                .attrs
                                .iter()
                                .zip(&r.attrs)
                                .any(|((_, s1), (_, s2))| s1 != s2)
                        {
                            return Err(Error::Eval(
                                "UNION members have incompatible output schemas".into(),
                            ));
                        }
                        a.tuples.extend(r.tuples);
                    }
                }
            }
            acc.ok_or_else(|| Error::Eval("empty UNION".into()))
        }
    }
}

fn eval_select(sq: &SelectQuery, outer: &Env, db: &Database) -> Result<ResultRelation> {
    let attrs = select_output_schema(sq, outer, &db.schema)?;
    let mut result = ResultRelation {
        attrs,
        tuples: BTreeSet::new(),
    };
    let cols = output_cols(sq, &db.schema)?;
    enumerate_from(sq, 0, &mut outer.clone(), db, &mut |env| {
        let keep = match &sq.where_clause {
            Some(p) => eval_pred(p, env, db)?,
            None => true,
        };
        if keep {
            let tuple = cols
                .iter()
                .map(|c| resolve_col(c, env, &db.schema).map(|(v, _)| v))
                .collect::<Result<Vec<_>>>()?;
            result.tuples.insert(tuple);
        }
        Ok(())
    })?;
    Ok(result)
}

fn enumerate_from(
    sq: &SelectQuery,
    index: usize,
    env: &mut Env,
    db: &Database,
    f: &mut impl FnMut(&Env) -> Result<()>,
) -> Result<()> {
    if index == sq.from.len() {
        return f(env);
    }
    let item = &sq.from[index];
    if db.schema.relation(&item.table).is_none() {
        return Err(Error::Schema(format!("unknown relation {}", item.table)));
    }
    let tuples: Vec<Vec<Value>> = db.tuples(&item.table).iter().cloned().collect();
    for tuple in tuples {
        env.push((item.binding().to_string(), item.table.clone(), tuple));
        enumerate_from(sq, index + 1, env, db, f)?;
        env.pop();
    }
    Ok(())
}

fn eval_pred(p: &SqlPred, env: &Env, db: &Database) -> Result<bool> {
    match p {
        SqlPred::And(ps) => {
            for q in ps {
                if !eval_pred(q, env, db)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        SqlPred::Or(ps) => {
            for q in ps {
                if eval_pred(q, env, db)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        SqlPred::Not(inner, _) => Ok(!eval_pred(inner, env, db)?),
        SqlPred::Cmp { left, op, right, .. } => {
            let (l, _) = resolve_col(left, env, &db.schema)?;
            let r = match right {
                SqlOperand::Col(c) => resolve_col(c, env, &db.schema)?.0,
                SqlOperand::Const(v) => v.clone(),
            };
            Ok(op.eval(l.compare(&r)?))
        }
        SqlPred::Exists { negated, query, .. } => {
            let result = eval_select(query, env, db)?;
            Ok(result.tuples.is_empty() == *negated)
        }
        SqlPred::In { negated, col, query, .. } => {
            let (needle, _) = resolve_col(col, env, &db.schema)?;
            let result = eval_select(query, env, db)?;
            if result.attrs.len() != 1 {
                return Err(Error::Eval(
                    "membership subquery must select exactly one column".into(),
                ));
            }
            let mut member = false;
            for t in &result.tuples {
                if needle.compare(&t[0])? == std::cmp::Ordering::Equal {
                    member = true;
                    break;
                }
            }
            Ok(member ^ negated)
        }
        SqlPred::Quantified { col, op, quant, query, .. } => {
            let (needle, _) = resolve_col(col, env, &db.schema)?;
            let result = eval_select(query, env, db)?;
            if result.attrs.len() != 1 {
                return Err(Error::Eval(
                    "quantified subquery must select exactly one column".into(),
                ));
            }
            let mut all = true;
            let mut any = false;
            for t in &result.tuples {
                let holds = op.eval(needle.compare(&t[0])?);
                all &= holds;
                any |= holds;
            }
            Ok(match quant {
                Quant::All => all,
                Quant::Any => any,
            })
        }
    }
}

/// Column references the SELECT clause projects, `*` expanded to all
/// attributes of the FROM list in declaration order.
fn output_cols(sq: &SelectQuery, schema: &Schema) -> Result<Vec<ColRef>> {
    match &sq.columns {
        SelectCols::List(cols) => Ok(cols.clone()),
        SelectCols::Star => {
            let mut cols = Vec::new();
            for item in &sq.from {
                let decl = schema
                    .relation(&item.table)
                    .ok_or_else(|| Error::Schema(format!("unknown relation {}", item.table)))?;
                for a in &decl.attrs {
                    cols.push(ColRef {
                        table: Some(item.binding().to_string()),
                        column: a.name.clone(),
                        span: Default::default(),
                    });
                }
            }
            Ok(cols)
        }
    }
}

/// Resolve a column reference against the environment: qualified names find
/// their binding, unqualified names match the innermost binding whose
/// relation has the attribute. Returns the value and its sort.
fn resolve_col(c: &ColRef, env: &Env, schema: &Schema) -> Result<(Value, Sort)> {
    match &c.table {
        Some(t) => {
            for (binding, rel, tuple) in env.iter().rev() {
                if binding == t {
                    let decl = schema.relation(rel).expect("bound relation");
                    let idx = decl.attr_index(&c.column).ok_or_else(|| {
                        Error::Schema(format!("relation {rel} has no attribute {}", c.column))
                    })?;
                    return Ok((tuple[idx].clone(), decl.attrs[idx].sort));
                }
            }
            Err(Error::Eval(format!("unknown table binding {t}")))
        }
        None => {
            for (_, rel, tuple) in env.iter().rev() {
                let decl = schema.relation(rel).expect("bound relation");
                if let Some(idx) = decl.attr_index(&c.column) {
                    return Ok((tuple[idx].clone(), decl.attrs[idx].sort));
                }
            }
            Err(Error::Eval(format!("cannot resolve column {}", c.column)))
        }
    }
}

/// Static variant of [`resolve_col`] for schema computation: track only
/// binding names and relations.
fn resolve_col_sort(
    c: &ColRef,
    scopes: &[(String, String)],
    schema: &Schema,
) -> Result<Sort> {
    match &c.table {
        Some(t) => {
            for (binding, rel) in scopes.iter().rev() {
                if binding == t {
                    return schema.attr_sort(rel, &c.column);
                }
            }
            Err(Error::Schema(format!("unknown table binding {t}")))
        }
        None => {
            for (_, rel) in scopes.iter().rev() {
                if schema.attr_sort(rel, &c.column).is_ok() {
                    return schema.attr_sort(rel, &c.column);
                }
            }
            Err(Error::Schema(format!("cannot resolve column {}", c.column)))
        }
    }
}

fn select_output_schema(
    sq: &SelectQuery,
    outer: &Env,
    schema: &Schema,
) -> Result<Vec<(String, Sort)>> {
    let mut scopes: Vec<(String, String)> = outer
        .iter()
        .map(|(b, r, _)| (b.clone(), r.clone()))
        .collect();
    for item in &sq.from {
        scopes.push((item.binding().to_string(), item.table.clone()));
    }
    output_cols(sq, schema)?
        .iter()
        .map(|c| {
            let sort = resolve_col_sort(c, &scopes, schema)?;
            Ok((c.column.clone(), sort))
        })
        .collect()
}

pub fn sql_output_schema(q: &SqlQuery, schema: &Schema) -> Result<Vec<(String, Sort)>> {
    match q {
        SqlQuery::Select(sq) => select_output_schema(sq, &Env::new(), schema),
        SqlQuery::SelectNot(..) | SqlQuery::SelectExists { .. } => Ok(Vec::new()),
        SqlQuery::Union(parts) => {
            let first = sql_output_schema(
                parts.first().ok_or_else(|| Error::Eval("empty UNION".into()))?,
                schema,
            )?;
            for p in &parts[1..] {
                let other = sql_output_schema(p, schema)?;
                if other.len() != first.len()
                    || other.iter().zip(&first).any(|((_, a), (_, b))| a != b)
                {
                    return Err(Error::Schema(
                        "UNION members have incompatible output schemas".into(),
                    ));
                }
            }
            Ok(first)
        }
    }
}

pub fn collect_constants(q: &SqlQuery, add: &mut impl FnMut(&Value)) {
    fn pred(p: &SqlPred, add: &mut impl FnMut(&Value)) {
        match p {
            SqlPred::And(ps) | SqlPred::Or(ps) => ps.iter().for_each(|q| pred(q, add)),
            SqlPred::Not(inner, _) => pred(inner, add),
            SqlPred::Cmp { right, .. } => {
                if let SqlOperand::Const(v) = right {
                    add(v);
                }
            }
            SqlPred::Exists { query, .. }
            | SqlPred::In { query, .. }
            | SqlPred::Quantified { query, .. } => block(query, add),
        }
    }
    fn block(sq: &SelectQuery, add: &mut impl FnMut(&Value)) {
        if let Some(w) = &sq.where_clause {
            pred(w, add);
        }
    }
    match q {
        SqlQuery::Select(sq) => block(sq, add),
        SqlQuery::SelectNot(p, _) => pred(p, add),
        SqlQuery::SelectExists { query, .. } => block(query, add),
        SqlQuery::Union(parts) => parts.iter().for_each(|p| collect_constants(p, add)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_database;
    use crate::parse::parse_sql;

    fn db() -> Database {
        load_database(
            "relation R(A:int, B:int)\nrelation S(B:int)\nR(1,10)\nR(1,20)\nR(2,10)\nS(10)\nS(20)\n",
        )
        .unwrap()
    }

    #[test]
    fn division_in_sql() {
        let q = parse_sql(
            "SELECT DISTINCT R.A FROM R WHERE not exists (SELECT * FROM S WHERE not exists (SELECT * FROM R AS R2 WHERE R2.B = S.B AND R2.A = R.A))",
        )
        .unwrap();
        let result = eval_sql(&q, &db()).unwrap();
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn membership_and_quantified_forms_agree() {
        let variants = [
            "SELECT DISTINCT R.A FROM R, S WHERE R.B = S.B",
            "SELECT DISTINCT R.A FROM R WHERE exists (SELECT * FROM S WHERE R.B = S.B)",
            "SELECT DISTINCT R.A FROM R WHERE R.B IN (SELECT S.B FROM S)",
            "SELECT DISTINCT R.A FROM R WHERE R.B = ANY (SELECT S.B FROM S)",
        ];
        let mut results = Vec::new();
        for v in variants {
            let q = parse_sql(v).unwrap();
            results.push(eval_sql(&q, &db()).unwrap().tuples);
        }
        for r in &results[1..] {
            assert_eq!(&results[0], r);
        }
    }

    #[test]
    fn all_quantifier() {
        let q = parse_sql("SELECT DISTINCT R.A FROM R WHERE R.B >= ALL (SELECT S.B FROM S)")
            .unwrap();
        let result = eval_sql(&q, &db()).unwrap();
        // Only B=20 >= all of {10, 20}.
        assert_eq!(result.tuples.len(), 1);
        assert!(result.tuples.contains(&vec![Value::Int(1)]));
    }

    #[test]
    fn boolean_heads() {
        let q = parse_sql("SELECT NOT EXISTS (SELECT * FROM R WHERE R.A = 3)").unwrap();
        assert!(eval_sql(&q, &db()).unwrap().truth());
        let q2 = parse_sql("SELECT EXISTS (SELECT * FROM R WHERE R.A = 2)").unwrap();
        assert!(eval_sql(&q2, &db()).unwrap().truth());
    }

    #[test]
    fn union_and_or() {
        let db = load_database("relation R(A:int)\nrelation S(A:int)\nR(1)\nS(2)\n").unwrap();
        let q = parse_sql("(SELECT DISTINCT R.A FROM R) UNION (SELECT DISTINCT S.A FROM S)")
            .unwrap();
        let result = eval_sql(&q, &db).unwrap();
        assert_eq!(result.tuples.len(), 2);
    }

    #[test]
    fn select_star_expansion() {
        let q = parse_sql("SELECT DISTINCT * FROM R").unwrap();
        let result = eval_sql(&q, &db()).unwrap();
        assert_eq!(result.attrs.len(), 2);
        assert_eq!(result.tuples.len(), 3);
    }
}
