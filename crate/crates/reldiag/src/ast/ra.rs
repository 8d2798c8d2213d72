//! Relational algebra expression trees for the union-free fragment,
//! optionally extended with the antijoin operator.
//!
//! The named perspective is used: every column of an intermediate result
//! carries an attribute name plus the base relation it came from, and
//! condition operands may qualify the attribute (`R.A`) when the plain name
//! is ambiguous.

use crate::ast::CompOp;
use crate::catalog::{Schema, Sort, Value};
use crate::span::Span;
use crate::{Error, Result};

/// A column reference in a condition or projection list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaColRef {
    pub rel: Option<String>,
    pub attr: String,
    pub span: Span,
}

impl RaColRef {
    pub fn plain(attr: &str) -> Self {
        RaColRef {
            rel: None,
            attr: attr.to_string(),
            span: Span::default(),
        }
    }

    pub fn qualified(rel: &str, attr: &str) -> Self {
        RaColRef {
            rel: Some(rel.to_string()),
            attr: attr.to_string(),
            span: Span::default(),
        }
    }
}

impl std::fmt::Display for RaColRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.rel {
            Some(r) => write!(f, "{}.{}", r, self.attr),
            None => write!(f, "{}", self.attr),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RaRhs {
    Col(RaColRef),
    Const(Value),
}

/// A simple condition `X op Y` where `X` is a column and `Y` a column or
/// constant. Selections carry conjunctions of these; no disjunction exists
/// in the fragment.
#[derive(Clone, Debug, PartialEq)]
pub struct RaCond {
    pub left: RaColRef,
    pub op: CompOp,
    pub right: RaRhs,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RaExpr {
    Relation {
        name: String,
        span: Span,
    },
    Project {
        cols: Vec<RaColRef>,
        input: Box<RaExpr>,
    },
    Select {
        conds: Vec<RaCond>,
        input: Box<RaExpr>,
    },
    Product {
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
    Join {
        conds: Vec<RaCond>,
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
    Minus {
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
    /// Attribute rename `rename[A->B]`.
    Rename {
        pairs: Vec<(String, String)>,
        input: Box<RaExpr>,
    },
    /// Antijoin `left ▷_conds right`; conditions must be equalities.
    Antijoin {
        conds: Vec<RaCond>,
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
}

impl RaExpr {
    pub fn relation(name: &str) -> RaExpr {
        RaExpr::Relation {
            name: name.to_string(),
            span: Span::default(),
        }
    }

    /// Base-relation leaves in expression order (the query signature).
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            RaExpr::Relation { name, .. } => out.push(name),
            RaExpr::Project { input, .. }
            | RaExpr::Select { input, .. }
            | RaExpr::Rename { input, .. } => input.collect_leaves(out),
            RaExpr::Product { left, right }
            | RaExpr::Join { left, right, .. }
            | RaExpr::Minus { left, right }
            | RaExpr::Antijoin { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

/// A column of an intermediate result: its visible attribute name, the base
/// relation qualifier it is reachable under, and its sort.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaCol {
    pub rel: Option<String>,
    pub attr: String,
    pub sort: Sort,
}

/// Compute the output columns of an expression, checking operator
/// preconditions along the way.
pub fn output_schema(expr: &RaExpr, schema: &Schema) -> Result<Vec<RaCol>> {
    match expr {
        RaExpr::Relation { name, .. } => {
            let decl = schema
                .relation(name)
                .ok_or_else(|| Error::Schema(format!("unknown relation {name}")))?;
            Ok(decl
                .attrs
                .iter()
                .map(|a| RaCol {
                    rel: Some(name.clone()),
                    attr: a.name.clone(),
                    sort: a.sort,
                })
                .collect())
        }
        RaExpr::Project { cols, input } => {
            let inner = output_schema(input, schema)?;
            cols.iter()
                .map(|c| resolve(&inner, c).cloned())
                .collect::<Result<Vec<_>>>()
        }
        RaExpr::Select { conds, input } => {
            let inner = output_schema(input, schema)?;
            for c in conds {
                check_cond(&inner, c)?;
            }
            Ok(inner)
        }
        RaExpr::Product { left, right } => {
            let mut cols = output_schema(left, schema)?;
            cols.extend(output_schema(right, schema)?);
            Ok(cols)
        }
        RaExpr::Join { conds, left, right } => {
            let l = output_schema(left, schema)?;
            let r = output_schema(right, schema)?;
            if conds.is_empty() {
                // Natural join: shared attribute names equate and collapse.
                let mut cols = l.clone();
                for col in &r {
                    if let Some(shared) = l.iter().find(|c| c.attr == col.attr) {
                        if shared.sort != col.sort {
                            return Err(Error::Schema(format!(
                                "natural join on {} compares {} with {}",
                                col.attr, shared.sort, col.sort
                            )));
                        }
                    } else {
                        cols.push(col.clone());
                    }
                }
                Ok(cols)
            } else {
                let mut cols = l;
                cols.extend(r);
                for c in conds {
                    check_cond(&cols, c)?;
                }
                Ok(cols)
            }
        }
        RaExpr::Minus { left, right } => {
            let l = output_schema(left, schema)?;
            let r = output_schema(right, schema)?;
            check_compatible(&l, &r, "minus")?;
            Ok(l)
        }
        RaExpr::Rename { pairs, input } => {
            let mut cols = output_schema(input, schema)?;
            for (old, new) in pairs {
                let matches: Vec<usize> = cols
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.attr == *old)
                    .map(|(i, _)| i)
                    .collect();
                match matches.as_slice() {
                    [i] => cols[*i].attr = new.clone(),
                    [] => {
                        return Err(Error::Schema(format!(
                            "rename: no column named {old}"
                        )))
                    }
                    _ => {
                        return Err(Error::Schema(format!(
                            "rename: column {old} is ambiguous"
                        )))
                    }
                }
            }
            Ok(cols)
        }
        RaExpr::Antijoin { conds, left, right } => {
            let l = output_schema(left, schema)?;
            let r = output_schema(right, schema)?;
            let mut both = l.clone();
            both.extend(r.clone());
            for c in conds {
                if c.op != CompOp::Eq {
                    return Err(Error::Schema(
                        "antijoin conditions must be equalities".into(),
                    ));
                }
                check_cond(&both, c)?;
            }
            Ok(l)
        }
    }
}

pub(crate) fn check_cond(cols: &[RaCol], cond: &RaCond) -> Result<()> {
    let left = resolve(cols, &cond.left)?;
    match &cond.right {
        RaRhs::Col(c) => {
            let right = resolve(cols, c)?;
            if left.sort != right.sort {
                return Err(Error::Schema(format!(
                    "condition {} {} {} compares {} with {}",
                    cond.left, cond.op, c, left.sort, right.sort
                )));
            }
        }
        RaRhs::Const(v) => {
            if left.sort != v.sort() {
                return Err(Error::Schema(format!(
                    "condition on {} compares {} with {}",
                    cond.left,
                    left.sort,
                    v.sort()
                )));
            }
        }
    }
    Ok(())
}

/// Column index pairs a natural join or antijoin relates: one per
/// attribute name the two sides share.
pub fn natural_pairs(left: &[RaCol], right: &[RaCol]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, l) in left.iter().enumerate() {
        if let Some(j) = right.iter().position(|r| r.attr == l.attr) {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Resolve a column reference: by qualifier and name when qualified, by
/// unique name otherwise.
pub fn resolve<'a>(cols: &'a [RaCol], r: &RaColRef) -> Result<&'a RaCol> {
    let matches: Vec<&RaCol> = cols
        .iter()
        .filter(|c| c.attr == r.attr && (r.rel.is_none() || c.rel == r.rel))
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Schema(format!("unknown column {r}"))),
        _ => Err(Error::Schema(format!("ambiguous column {r}"))),
    }
}

/// Position of a resolved column reference.
pub fn resolve_index(cols: &[RaCol], r: &RaColRef) -> Result<usize> {
    let matches: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.attr == r.attr && (r.rel.is_none() || c.rel == r.rel))
        .map(|(i, _)| i)
        .collect();
    match matches.as_slice() {
        [one] => Ok(*one),
        [] => Err(Error::Schema(format!("unknown column {r}"))),
        _ => Err(Error::Schema(format!("ambiguous column {r}"))),
    }
}

fn check_compatible(l: &[RaCol], r: &[RaCol], op: &str) -> Result<()> {
    if l.len() != r.len() {
        return Err(Error::Schema(format!(
            "{op} operands have arities {} and {}",
            l.len(),
            r.len()
        )));
    }
    for (a, b) in l.iter().zip(r) {
        if a.sort != b.sort {
            return Err(Error::Schema(format!(
                "{op} operands disagree on column sorts ({} vs {})",
                a.attr, b.attr
            )));
        }
    }
    Ok(())
}
