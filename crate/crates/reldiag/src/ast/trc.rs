//! Tuple relational calculus syntax.
//!
//! `TrcFormula` is a general formula tree: it can hold disjunctions and
//! arbitrarily nested quantifiers, so it also serves as the input type for
//! the disjunction-elimination rewrites. Membership in the non-disjunctive
//! fragment and canonical form are checked by [`crate::ast::fragment`].

use crate::ast::CompOp;
use crate::catalog::Value;
use crate::span::Span;

/// A reference to an attribute of a tuple variable, `r.A`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AttrRef {
    pub var: String,
    pub attr: String,
    pub span: Span,
}

impl AttrRef {
    pub fn new(var: &str, attr: &str) -> Self {
        AttrRef {
            var: var.to_string(),
            attr: attr.to_string(),
            span: Span::default(),
        }
    }
}

impl std::fmt::Display for AttrRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.var, self.attr)
    }
}

/// One side of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Attr(AttrRef),
    Const(Value),
}

impl Operand {
    pub fn as_attr(&self) -> Option<&AttrRef> {
        match self {
            Operand::Attr(a) => Some(a),
            Operand::Const(_) => None,
        }
    }
}

/// A comparison predicate. Guarded predicates always contain at least one
/// attribute operand; `1 = 1` parses but fails the guardedness check.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub left: Operand,
    pub op: CompOp,
    pub right: Operand,
    pub span: Span,
}

impl Predicate {
    pub fn eq(left: AttrRef, right: AttrRef) -> Self {
        Predicate {
            left: Operand::Attr(left),
            op: CompOp::Eq,
            right: Operand::Attr(right),
            span: Span::default(),
        }
    }
}

/// An existential quantifier binding, `exists r in R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantifier {
    pub var: String,
    pub rel: String,
    pub span: Span,
}

impl Quantifier {
    pub fn new(var: &str, rel: &str) -> Self {
        Quantifier {
            var: var.to_string(),
            rel: rel.to_string(),
            span: Span::default(),
        }
    }
}

/// A relational calculus formula.
#[derive(Clone, Debug, PartialEq)]
pub enum TrcFormula {
    /// Conjunction. An empty conjunction is `true`.
    And(Vec<TrcFormula>),
    /// Disjunction. Outside the non-disjunctive fragment; accepted by the
    /// parser so it can be rewritten away.
    Or(Vec<TrcFormula>),
    Not(Box<TrcFormula>),
    Exists(Vec<Quantifier>, Box<TrcFormula>),
    Pred(Predicate),
}

impl TrcFormula {
    /// Conjunction that flattens trivial cases.
    pub fn and(mut conjuncts: Vec<TrcFormula>) -> TrcFormula {
        if conjuncts.len() == 1 {
            conjuncts.pop().unwrap()
        } else {
            TrcFormula::And(conjuncts)
        }
    }

    pub fn contains_or(&self) -> bool {
        match self {
            TrcFormula::Or(_) => true,
            TrcFormula::And(fs) => fs.iter().any(|f| f.contains_or()),
            TrcFormula::Not(f) => f.contains_or(),
            TrcFormula::Exists(_, f) => f.contains_or(),
            TrcFormula::Pred(_) => false,
        }
    }
}

/// One output attribute with its equality linkage to a root-scope attribute.
/// A `None` source only occurs while the body still contains disjunction:
/// the linkage predicates then live inside the disjuncts and are resolved
/// by the disjunction-elimination rewrite.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputAttr {
    pub name: String,
    pub source: Option<AttrRef>,
}

/// The output table of a non-Boolean query, `{ q(A, B) | ... }`. Output
/// attributes may only be linked by equality to attributes of tuple
/// variables quantified outside all negations; the parser enforces this
/// structurally.
#[derive(Clone, Debug, PartialEq)]
pub struct TrcOutput {
    pub name: String,
    pub attrs: Vec<OutputAttr>,
}

/// A tuple relational calculus query. Boolean sentences have no output.
#[derive(Clone, Debug, PartialEq)]
pub struct TrcQuery {
    pub output: Option<TrcOutput>,
    pub body: TrcFormula,
}

impl TrcQuery {
    pub fn is_boolean(&self) -> bool {
        self.output.is_none()
    }

    /// Quantifiers in expression order (depth-first, source order).
    pub fn quantifiers(&self) -> Vec<&Quantifier> {
        let mut out = Vec::new();
        collect_quantifiers(&self.body, &mut out);
        out
    }
}

fn collect_quantifiers<'a>(f: &'a TrcFormula, out: &mut Vec<&'a Quantifier>) {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            for g in fs {
                collect_quantifiers(g, out);
            }
        }
        TrcFormula::Not(g) => collect_quantifiers(g, out),
        TrcFormula::Exists(qs, g) => {
            out.extend(qs.iter());
            collect_quantifiers(g, out);
        }
        TrcFormula::Pred(_) => {}
    }
}

/// A canonical negation scope: quantifiers at the head, then a conjunction
/// of predicates and negated child scopes. This is the view the diagram and
/// Datalog translators work on; [`ScopeTree::from_query`] fails on
/// non-canonical input.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeTree {
    pub quantifiers: Vec<Quantifier>,
    pub predicates: Vec<Predicate>,
    pub children: Vec<ScopeTree>,
}

impl ScopeTree {
    pub fn from_query(q: &TrcQuery) -> crate::Result<ScopeTree> {
        scope_of(&q.body)
    }

    /// Rebuild the formula this tree denotes.
    pub fn to_formula(&self) -> TrcFormula {
        let mut conjuncts: Vec<TrcFormula> = self
            .predicates
            .iter()
            .cloned()
            .map(TrcFormula::Pred)
            .collect();
        conjuncts.extend(
            self.children
                .iter()
                .map(|c| TrcFormula::Not(Box::new(c.to_formula()))),
        );
        let matrix = TrcFormula::and(conjuncts);
        if self.quantifiers.is_empty() {
            matrix
        } else {
            TrcFormula::Exists(self.quantifiers.clone(), Box::new(matrix))
        }
    }
}

fn scope_of(f: &TrcFormula) -> crate::Result<ScopeTree> {
    let (quantifiers, matrix) = match f {
        TrcFormula::Exists(qs, body) => (qs.clone(), body.as_ref()),
        other => (Vec::new(), other),
    };
    let mut scope = ScopeTree {
        quantifiers,
        predicates: Vec::new(),
        children: Vec::new(),
    };
    let conjuncts: Vec<&TrcFormula> = match matrix {
        TrcFormula::And(fs) => fs.iter().collect(),
        other => vec![other],
    };
    for c in conjuncts {
        match c {
            TrcFormula::Pred(p) => scope.predicates.push(p.clone()),
            TrcFormula::Not(inner) => scope.children.push(scope_of(inner)?),
            TrcFormula::Exists(qs, _) => {
                let span = qs.first().map(|q| q.span).unwrap_or_default();
                return Err(crate::Error::Fragment(format!(
                    "non-canonical query: quantifier at {span} is not at a scope head"
                )));
            }
            TrcFormula::Or(_) => {
                return Err(crate::Error::Fragment(
                    "disjunction is outside the non-disjunctive fragment".into(),
                ))
            }
            TrcFormula::And(_) => {
                return Err(crate::Error::Fragment(
                    "non-canonical query: nested conjunction".into(),
                ))
            }
        }
    }
    Ok(scope)
}
