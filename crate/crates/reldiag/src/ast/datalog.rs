//! Non-recursive Datalog with negation and built-in comparisons.
//!
//! Anonymous `_` variables are expanded to fresh variables at parse time
//! (named `_1`, `_2`, ...); the printer re-collapses variables that occur
//! only once in their rule.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::CompOp;
use crate::catalog::Value;
use crate::span::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// A relational atom `R(t1, ..., tk)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
    pub span: Span,
}

/// A built-in comparison between terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub left: Term,
    pub op: CompOp,
    pub right: Term,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(Comparison),
}

/// One rule `H(x, ...) :- L1, ..., Ln.`
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl Rule {
    pub fn positive_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|l| match l {
            Literal::Pos(a) => Some(a),
            _ => None,
        })
    }

    pub fn negated_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|l| match l {
            Literal::Neg(a) => Some(a),
            _ => None,
        })
    }

    pub fn comparisons(&self) -> impl Iterator<Item = &Comparison> {
        self.body.iter().filter_map(|l| match l {
            Literal::Cmp(c) => Some(c),
            _ => None,
        })
    }

    /// Occurrence count of every variable in the rule (head and body).
    pub fn var_occurrences(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        let mut bump = |t: &Term| {
            if let Term::Var(v) = t {
                *counts.entry(v.clone()).or_insert(0) += 1;
            }
        };
        for t in &self.head.args {
            bump(t);
        }
        for lit in &self.body {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => a.args.iter().for_each(&mut bump),
                Literal::Cmp(c) => {
                    bump(&c.left);
                    bump(&c.right);
                }
            }
        }
        counts
    }
}

/// An ordered, non-recursive program. The head of the last rule is the
/// query predicate; earlier rules define intermediate IDB predicates.
#[derive(Clone, Debug, PartialEq)]
pub struct DatalogProgram {
    pub rules: Vec<Rule>,
}

impl DatalogProgram {
    /// Names heading at least one rule.
    pub fn idb_names(&self) -> BTreeSet<String> {
        self.rules.iter().map(|r| r.head.pred.clone()).collect()
    }

    /// The rule defining the query answer.
    pub fn query_rule(&self) -> Option<&Rule> {
        self.rules.last()
    }

    pub fn rule_for(&self, idb: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.head.pred == idb)
    }

    pub fn is_boolean(&self) -> bool {
        self.query_rule().map(|r| r.head.args.is_empty()).unwrap_or(false)
    }
}
