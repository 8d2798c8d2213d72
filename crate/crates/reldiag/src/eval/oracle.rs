//! The bounded logical-equivalence oracle.
//!
//! Logical equivalence of relational queries is undecidable in general, so
//! the oracle gives a one-sided guarantee: a witness database is definitive
//! evidence of non-equivalence, while agreement is only evidence up to the
//! stated bound. The exhaustive tier sweeps every database whose per-sort
//! active domain is drawn from a canonical small set plus all query
//! constants; a seeded random tier adds larger trials.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Database, Schema, Sort, Value};
use crate::eval::{evaluate, output_schema_of, query_constants};
use crate::{Error, Query, Result};

/// Bound parameters for the oracle.
#[derive(Clone, Copy, Debug)]
pub struct Bound {
    /// Per-sort active-domain size of the exhaustive tier.
    pub max_domain: usize,
    /// Number of seeded random databases in the second tier.
    pub random_trials: usize,
    /// Per-sort active-domain size of the random tier.
    pub random_size: usize,
    pub seed: u64,
}

impl Default for Bound {
    fn default() -> Self {
        Bound {
            max_domain: 2,
            random_trials: 100,
            random_size: 3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub enum EquivalenceVerdict {
    NotEquivalent {
        witness: Database,
        /// A tuple in exactly one of the two answers.
        tuple: Vec<Value>,
        /// Whether that tuple came from the first query's answer.
        in_first: bool,
    },
    EquivalentUpToBound {
        databases_checked: usize,
        description: String,
    },
}

impl EquivalenceVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivalenceVerdict::EquivalentUpToBound { .. })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            EquivalenceVerdict::NotEquivalent { witness, tuple, in_first } => serde_json::json!({
                "status": "not-equivalent",
                "witness": crate::catalog::save_database(witness),
                "tuple": tuple,
                "in-first": in_first,
            }),
            EquivalenceVerdict::EquivalentUpToBound { databases_checked, description } => {
                serde_json::json!({
                    "status": "equivalent-up-to-bound",
                    "databases-checked": databases_checked,
                    "bound": description,
                })
            }
        }
    }
}

/// Decide bounded equivalence of two queries over the same schema.
pub fn equivalent_bounded(
    q1: &Query,
    q2: &Query,
    schema: &Schema,
    bound: &Bound,
) -> Result<EquivalenceVerdict> {
    let s1 = output_schema_of(q1, schema)?;
    let s2 = output_schema_of(q2, schema)?;
    if s1.len() != s2.len() || s1.iter().zip(&s2).any(|((_, a), (_, b))| a != b) {
        return Err(Error::Pattern(format!(
            "output schemas differ: ({}) vs ({})",
            fmt_schema(&s1),
            fmt_schema(&s2)
        )));
    }

    let (ints, strs) = combined_domains(q1, q2, bound.max_domain);
    let mut checked = 0usize;
    let mut verdict: Option<EquivalenceVerdict> = None;
    for_each_database(schema, &ints, &strs, &mut |db| {
        checked += 1;
        if verdict.is_none() {
            if let Some(found) = check_one(q1, q2, db)? {
                verdict = Some(found);
            }
        }
        Ok(())
    })?;
    if let Some(v) = verdict {
        return Ok(v);
    }

    // Random tier at a larger domain.
    let (rints, rstrs) = combined_domains(q1, q2, bound.random_size);
    let mut rng = ChaCha8Rng::seed_from_u64(bound.seed);
    for _ in 0..bound.random_trials {
        let db = random_database(schema, &rints, &rstrs, &mut rng)?;
        checked += 1;
        if let Some(found) = check_one(q1, q2, &db)? {
            return Ok(found);
        }
    }

    Ok(EquivalenceVerdict::EquivalentUpToBound {
        databases_checked: checked,
        description: format!(
            "exhaustive over domains of size {} (plus query constants), {} random trials at size {}, seed {}",
            bound.max_domain, bound.random_trials, bound.random_size, bound.seed
        ),
    })
}

fn fmt_schema(s: &[(String, Sort)]) -> String {
    s.iter()
        .map(|(n, t)| format!("{n}:{t}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_one(q1: &Query, q2: &Query, db: &Database) -> Result<Option<EquivalenceVerdict>> {
    let r1 = evaluate(q1, db)?;
    let r2 = evaluate(q2, db)?;
    if let Some(tuple) = r1.tuples.difference(&r2.tuples).next() {
        return Ok(Some(EquivalenceVerdict::NotEquivalent {
            witness: db.clone(),
            tuple: tuple.clone(),
            in_first: true,
        }));
    }
    if let Some(tuple) = r2.tuples.difference(&r1.tuples).next() {
        return Ok(Some(EquivalenceVerdict::NotEquivalent {
            witness: db.clone(),
            tuple: tuple.clone(),
            in_first: false,
        }));
    }
    Ok(None)
}

/// The canonical small domains: ascending integers from 0 and strings
/// "a", "b", c..., extended first by the constants appearing in the queries.
fn combined_domains(q1: &Query, q2: &Query, size: usize) -> (Vec<Value>, Vec<Value>) {
    let (mut ints, mut strs) = query_constants(q1);
    let (i2, s2) = query_constants(q2);
    ints.extend(i2);
    strs.extend(s2);
    let mut int_dom: Vec<i64> = ints.into_iter().collect();
    let mut next = 0i64;
    while int_dom.len() < size {
        if !int_dom.contains(&next) {
            int_dom.push(next);
        }
        next += 1;
    }
    let mut str_dom: Vec<String> = strs.into_iter().collect();
    let mut letter = b'a';
    while str_dom.len() < size {
        let candidate = (letter as char).to_string();
        if !str_dom.contains(&candidate) {
            str_dom.push(candidate);
        }
        letter += 1;
    }
    int_dom.sort_unstable();
    str_dom.sort();
    (
        int_dom.into_iter().map(Value::Int).collect(),
        str_dom.into_iter().map(Value::Str).collect(),
    )
}

/// All tuples a relation can hold over the given domains.
fn possible_tuples(
    decl: &crate::catalog::RelationDecl,
    ints: &[Value],
    strs: &[Value],
) -> Vec<Vec<Value>> {
    let mut tuples: Vec<Vec<Value>> = vec![Vec::new()];
    for attr in &decl.attrs {
        let domain = match attr.sort {
            Sort::Int => ints,
            Sort::Str => strs,
        };
        let mut next = Vec::with_capacity(tuples.len() * domain.len());
        for t in &tuples {
            for v in domain {
                let mut t2 = t.clone();
                t2.push(v.clone());
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples
}

/// Enumerate every database over the schema whose relations hold subsets of
/// the possible tuples, in a canonical order (bit counters per relation).
fn for_each_database(
    schema: &Schema,
    ints: &[Value],
    strs: &[Value],
    f: &mut impl FnMut(&Database) -> Result<()>,
) -> Result<()> {
    let universes: Vec<(String, Vec<Vec<Value>>)> = schema
        .relations()
        .map(|r| (r.name.clone(), possible_tuples(r, ints, strs)))
        .collect();
    let total_bits: usize = universes.iter().map(|(_, u)| u.len()).sum();
    if total_bits > 22 {
        return Err(Error::BoundExceeded(format!(
            "exhaustive tier would enumerate 2^{total_bits} databases; shrink the domain or schema"
        )));
    }
    let mut counters = vec![0u64; universes.len()];
    loop {
        let mut db = Database::empty(schema.clone());
        for ((rel, universe), bits) in universes.iter().zip(&counters) {
            for (i, tuple) in universe.iter().enumerate() {
                if bits & (1 << i) != 0 {
                    db.insert(rel, tuple.clone())?;
                }
            }
        }
        f(&db)?;
        // Increment the multi-counter.
        let mut i = 0;
        loop {
            if i == universes.len() {
                return Ok(());
            }
            counters[i] += 1;
            if counters[i] < (1u64 << universes[i].1.len()) {
                break;
            }
            counters[i] = 0;
            i += 1;
        }
    }
}

/// One random database: every possible tuple is included with probability
/// one half.
fn random_database(
    schema: &Schema,
    ints: &[Value],
    strs: &[Value],
    rng: &mut ChaCha8Rng,
) -> Result<Database> {
    let mut db = Database::empty(schema.clone());
    for rel in schema.relations() {
        for tuple in possible_tuples(rel, ints, strs) {
            if rng.gen_bool(0.5) {
                db.insert(&rel.name, tuple)?;
            }
        }
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Sort;
    use crate::parse::{parse_sql, parse_trc};

    fn schema_rs() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    #[test]
    fn query_equivalent_to_itself() {
        let q = Query::Trc(
            parse_trc("{ q(A) | exists r in R [q.A = r.A and not (exists s in S [s.B = r.B])] }")
                .unwrap(),
        );
        let v = equivalent_bounded(&q, &q, &schema_rs(), &Bound::default()).unwrap();
        assert!(v.is_equivalent());
    }

    #[test]
    fn join_vs_antijoin_patterns_differ() {
        // The join and negation variants of the same shape are inequivalent.
        let q1 = Query::Sql(
            parse_sql("SELECT DISTINCT R.A FROM R WHERE exists (SELECT * FROM S WHERE R.B = S.B)")
                .unwrap(),
        );
        let q2 = Query::Sql(
            parse_sql(
                "SELECT DISTINCT R.A FROM R WHERE not exists (SELECT * FROM S WHERE R.B = S.B)",
            )
            .unwrap(),
        );
        let v = equivalent_bounded(&q1, &q2, &schema_rs(), &Bound::default()).unwrap();
        match v {
            EquivalenceVerdict::NotEquivalent { witness, tuple, .. } => {
                // Witness must re-evaluate to a genuine difference.
                let r1 = evaluate(&q1, &witness).unwrap();
                let r2 = evaluate(&q2, &witness).unwrap();
                assert_ne!(r1.tuples.contains(&tuple), r2.tuples.contains(&tuple));
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn cross_dialect_equivalence() {
        let sql = Query::Sql(
            parse_sql("SELECT DISTINCT R.A FROM R WHERE R.B IN (SELECT S.B FROM S)").unwrap(),
        );
        let trc = Query::Trc(
            parse_trc("{ q(A) | exists r in R, s in S [q.A = r.A and s.B = r.B] }").unwrap(),
        );
        let v = equivalent_bounded(&sql, &trc, &schema_rs(), &Bound::default()).unwrap();
        assert!(v.is_equivalent(), "{v:?}");
    }

    #[test]
    fn output_schema_mismatch_is_an_error() {
        let q1 = Query::Trc(parse_trc("{ q(A) | exists r in R [q.A = r.A] }").unwrap());
        let q2 = Query::Trc(
            parse_trc("{ q(A, B) | exists r in R [q.A = r.A and q.B = r.B] }").unwrap(),
        );
        assert!(equivalent_bounded(&q1, &q2, &schema_rs(), &Bound::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let q1 = Query::Trc(parse_trc("{ q(A) | exists r in R [q.A = r.A] }").unwrap());
        let q2 = Query::Trc(parse_trc("{ q(A) | exists r in R [q.A = r.A and r.B = r.B] }").unwrap());
        let b = Bound { random_trials: 10, ..Bound::default() };
        let v1 = equivalent_bounded(&q1, &q2, &schema_rs(), &b).unwrap();
        let v2 = equivalent_bounded(&q1, &q2, &schema_rs(), &b).unwrap();
        assert_eq!(v1.is_equivalent(), v2.is_equivalent());
        assert!(v1.is_equivalent());
    }
}
