//! Calculus concrete syntax.
//!
//! ```text
//! { q(A, B) | exists r in R, s in S [ q.A = r.A and not ( ... ) ] }
//! ```
//!
//! Boolean sentences drop the `{ q(...) | }` wrapper. `or` is accepted for
//! the disjunctive extension. Output attributes may only appear in root
//! equality predicates; the parser lifts those into the output structure.

use crate::ast::trc::{
    AttrRef, Operand, OutputAttr, Predicate, Quantifier, TrcFormula, TrcOutput, TrcQuery,
};
use crate::ast::CompOp;
use crate::catalog::Value;
use crate::parse::lexer::{value_text, Cursor, TokenKind};
use crate::parse::err_at;
use crate::span::Span;
use crate::Result;

pub fn parse_trc(text: &str) -> Result<TrcQuery> {
    let mut cur = Cursor::new(text)?;
    let query = if cur.eat(&TokenKind::LBrace) {
        let (name, _) = cur.expect_ident("output table name")?;
        cur.expect(TokenKind::LParen, "'('")?;
        let mut attr_names = Vec::new();
        loop {
            let (attr, span) = cur.expect_ident("output attribute")?;
            if attr_names.contains(&attr) {
                return Err(err_at(span, format!("duplicate output attribute {attr}")));
            }
            attr_names.push(attr);
            if !cur.eat(&TokenKind::Comma) {
                break;
            }
        }
        cur.expect(TokenKind::RParen, "')'")?;
        cur.expect(TokenKind::Pipe, "'|'")?;
        let body = parse_formula(&mut cur)?;
        cur.expect(TokenKind::RBrace, "'}'")?;
        extract_output(name, attr_names, body)?
    } else {
        let body = parse_formula(&mut cur)?;
        TrcQuery { output: None, body }
    };
    cur.expect_end()?;
    check_scoping(&query)?;
    Ok(query)
}

fn parse_formula(cur: &mut Cursor) -> Result<TrcFormula> {
    let mut terms = vec![parse_conjunction(cur)?];
    while cur.eat_kw("or", false) {
        terms.push(parse_conjunction(cur)?);
    }
    Ok(if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        TrcFormula::Or(terms)
    })
}

fn parse_conjunction(cur: &mut Cursor) -> Result<TrcFormula> {
    let mut terms = vec![parse_factor(cur)?];
    while cur.eat_kw("and", false) {
        terms.push(parse_factor(cur)?);
    }
    Ok(TrcFormula::and(terms))
}

fn parse_factor(cur: &mut Cursor) -> Result<TrcFormula> {
    if cur.eat_kw("not", false) {
        cur.expect(TokenKind::LParen, "'(' after not")?;
        let inner = parse_formula(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(TrcFormula::Not(Box::new(inner)));
    }
    if cur.eat_kw("exists", false) {
        let mut quantifiers = Vec::new();
        loop {
            let (var, vspan) = cur.expect_ident("tuple variable")?;
            cur.expect_kw("in", false)?;
            let (rel, _) = cur.expect_ident("relation name")?;
            quantifiers.push(Quantifier {
                var,
                rel,
                span: vspan,
            });
            if !cur.eat(&TokenKind::Comma) {
                break;
            }
            // A following `exists` keyword inside the list is permitted,
            // mirroring the written form "exists r in R, exists s in S".
            cur.eat_kw("exists", false);
        }
        cur.expect(TokenKind::LBracket, "'['")?;
        let body = if cur.eat(&TokenKind::RBracket) {
            TrcFormula::And(Vec::new())
        } else {
            let f = parse_formula(cur)?;
            cur.expect(TokenKind::RBracket, "']'")?;
            f
        };
        return Ok(TrcFormula::Exists(quantifiers, Box::new(body)));
    }
    if cur.eat(&TokenKind::LParen) {
        let inner = parse_formula(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(inner);
    }
    parse_predicate(cur).map(TrcFormula::Pred)
}

fn parse_predicate(cur: &mut Cursor) -> Result<Predicate> {
    let start = cur.here();
    let left = parse_operand(cur)?;
    let (op, _) = cur.expect_op()?;
    let right = parse_operand(cur)?;
    let span = start.merge(cur.here());
    // Keep attributes on the left where possible so the printed form reads
    // naturally; constant-constant predicates stay as written.
    let (left, op, right) = match (&left, &right) {
        (Operand::Const(_), Operand::Attr(_)) => (right, op.flip(), left),
        _ => (left, op, right),
    };
    Ok(Predicate {
        left,
        op,
        right,
        span,
    })
}

fn parse_operand(cur: &mut Cursor) -> Result<Operand> {
    let span = cur.here();
    match cur.next() {
        Some(t) => match t.kind {
            TokenKind::Ident(var) => {
                cur.expect(TokenKind::Dot, "'.' after tuple variable")?;
                let (attr, aspan) = cur.expect_ident("attribute name")?;
                Ok(Operand::Attr(AttrRef {
                    var,
                    attr,
                    span: t.span.merge(aspan),
                }))
            }
            TokenKind::Int(n) => Ok(Operand::Const(Value::Int(n))),
            TokenKind::Str(s) => Ok(Operand::Const(Value::Str(s))),
            _ => Err(err_at(span, "expected attribute reference or constant")),
        },
        None => Err(err_at(span, "expected operand")),
    }
}

/// Pull `q.X = r.A` linkage predicates out of the root region of the body.
/// Linkages sitting inside disjuncts stay in place (`source: None`) until
/// the elimination rewrite resolves them per union cell.
fn extract_output(name: String, attr_names: Vec<String>, body: TrcFormula) -> Result<TrcQuery> {
    let disjunctive = body.contains_or();
    let mut attrs: Vec<OutputAttr> = Vec::new();
    let body = extract_from(body, &name, &mut attrs)?;
    // Check completeness and order the attributes as declared.
    let mut ordered = Vec::new();
    for attr in &attr_names {
        match attrs.iter().find(|a| &a.name == attr) {
            Some(a) => ordered.push(a.clone()),
            None if disjunctive => ordered.push(OutputAttr {
                name: attr.clone(),
                source: None,
            }),
            None => {
                return Err(crate::Error::Fragment(format!(
                    "output attribute {attr} has no equality linkage in the root scope"
                )))
            }
        }
    }
    for a in &attrs {
        if !attr_names.contains(&a.name) {
            return Err(crate::Error::Fragment(format!(
                "predicate references undeclared output attribute {}.{}",
                name, a.name
            )));
        }
    }
    Ok(TrcQuery {
        output: Some(TrcOutput {
            name,
            attrs: ordered,
        }),
        body,
    })
}

/// Walk the root region (not crossing negations); collect and remove output
/// linkages. The first linkage per attribute defines the source; later ones
/// remain as ordinary join predicates between the sources.
fn extract_from(
    f: TrcFormula,
    out_name: &str,
    attrs: &mut Vec<OutputAttr>,
) -> Result<TrcFormula> {
    match f {
        TrcFormula::And(fs) => {
            let mut kept = Vec::new();
            for g in fs {
                match extract_from(g, out_name, attrs)? {
                    TrcFormula::And(inner) if inner.is_empty() => {}
                    other => kept.push(other),
                }
            }
            Ok(TrcFormula::And(kept))
        }
        TrcFormula::Or(fs) => {
            // Disjunctive branches keep their output references in place;
            // the elimination rewrite resolves them per union cell.
            Ok(TrcFormula::Or(fs))
        }
        TrcFormula::Exists(qs, g) => {
            let inner = extract_from(*g, out_name, attrs)?;
            Ok(TrcFormula::Exists(qs, Box::new(inner)))
        }
        TrcFormula::Not(g) => {
            ensure_no_output_refs(&g, out_name)?;
            Ok(TrcFormula::Not(g))
        }
        TrcFormula::Pred(p) => {
            let refs_out = |o: &Operand| o.as_attr().map(|a| a.var == out_name).unwrap_or(false);
            if !refs_out(&p.left) && !refs_out(&p.right) {
                return Ok(TrcFormula::Pred(p));
            }
            if p.op != CompOp::Eq {
                return Err(err_at(
                    p.span,
                    "output attributes may only be linked by equality",
                ));
            }
            let (out_ref, source) = match (p.left.as_attr(), p.right.as_attr()) {
                (Some(l), Some(r)) if l.var == out_name && r.var != out_name => (l, r),
                (Some(l), Some(r)) if r.var == out_name && l.var != out_name => (r, l),
                _ => {
                    return Err(err_at(
                        p.span,
                        "output attributes must be linked to a tuple variable attribute",
                    ))
                }
            };
            if let Some(existing) = attrs.iter().find(|a| a.name == out_ref.attr) {
                // A second linkage becomes a plain join between the sources.
                let first = existing.source.clone().expect("extracted linkage");
                return Ok(TrcFormula::Pred(Predicate::eq(first, source.clone())));
            }
            attrs.push(OutputAttr {
                name: out_ref.attr.clone(),
                source: Some(source.clone()),
            });
            Ok(TrcFormula::And(Vec::new()))
        }
    }
}

fn ensure_no_output_refs(f: &TrcFormula, out_name: &str) -> Result<()> {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => {
            fs.iter().try_for_each(|g| ensure_no_output_refs(g, out_name))
        }
        TrcFormula::Not(g) | TrcFormula::Exists(_, g) => ensure_no_output_refs(g, out_name),
        TrcFormula::Pred(p) => {
            for o in [&p.left, &p.right] {
                if let Some(a) = o.as_attr() {
                    if a.var == out_name {
                        return Err(err_at(
                            a.span,
                            "output attributes may not be referenced inside a negation",
                        ));
                    }
                }
            }
            Ok(())
        }
    }
}

/// Every attribute reference must resolve to a quantifier in scope, and no
/// variable may be bound twice.
fn check_scoping(q: &TrcQuery) -> Result<()> {
    let mut bound = std::collections::BTreeMap::new();
    let free = q.output.as_ref().map(|o| o.name.clone());
    crate::ast::fragment::validate_scoping_only(&q.body, &mut bound, free.as_deref())?;
    if let Some(out) = &q.output {
        for a in &out.attrs {
            if let Some(source) = &a.source {
                if !bound.contains_key(&source.var) {
                    return Err(err_at(
                        source.span,
                        format!("unscoped variable {}", source.var),
                    ));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_trc(q: &TrcQuery) -> String {
    match &q.output {
        None => format_formula(&q.body),
        Some(out) => {
            let attr_list = out
                .attrs
                .iter()
                .map(|a| a.name.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            let linkage: Vec<String> = out
                .attrs
                .iter()
                .filter_map(|a| {
                    a.source
                        .as_ref()
                        .map(|s| format!("{}.{} = {}", out.name, a.name, s))
                })
                .collect();
            let body = splice_linkage(&q.body, &linkage);
            format!("{{ {}({}) | {} }}", out.name, attr_list, body)
        }
    }
}

/// Reinsert the output linkage predicates at the head of the root matrix.
fn splice_linkage(body: &TrcFormula, linkage: &[String]) -> String {
    match body {
        TrcFormula::Exists(qs, inner) => {
            let mut parts = linkage.to_vec();
            let rest = format_formula(inner);
            if !rest.is_empty() {
                parts.push(rest);
            }
            format!("{}[{}]", format_quantifiers(qs), parts.join(" and "))
        }
        other => {
            let mut parts = linkage.to_vec();
            let rest = format_formula(other);
            if !rest.is_empty() {
                parts.push(rest);
            }
            parts.join(" and ")
        }
    }
}

fn format_quantifiers(qs: &[Quantifier]) -> String {
    let list = qs
        .iter()
        .map(|q| format!("{} in {}", q.var, q.rel))
        .collect::<Vec<_>>()
        .join(", ");
    format!("exists {list} ")
}

fn format_formula(f: &TrcFormula) -> String {
    match f {
        TrcFormula::And(fs) => fs
            .iter()
            .map(format_conjunct)
            .collect::<Vec<_>>()
            .join(" and "),
        TrcFormula::Or(fs) => fs
            .iter()
            .map(|g| match g {
                TrcFormula::Or(_) => format!("({})", format_formula(g)),
                _ => format_conjunct(g),
            })
            .collect::<Vec<_>>()
            .join(" or "),
        TrcFormula::Not(g) => format!("not ({})", format_formula(g)),
        TrcFormula::Exists(qs, g) => {
            format!("{}[{}]", format_quantifiers(qs), format_formula(g))
        }
        TrcFormula::Pred(p) => format_pred(p),
    }
}

fn format_conjunct(f: &TrcFormula) -> String {
    match f {
        TrcFormula::Or(_) => format!("({})", format_formula(f)),
        _ => format_formula(f),
    }
}

fn format_pred(p: &Predicate) -> String {
    format!(
        "{} {} {}",
        format_operand(&p.left),
        p.op,
        format_operand(&p.right)
    )
}

fn format_operand(o: &Operand) -> String {
    match o {
        Operand::Attr(a) => a.to_string(),
        Operand::Const(v) => value_text(v),
    }
}

/// Zero every span so parsed and synthesized trees compare structurally.
pub fn strip_spans(q: &mut TrcQuery) {
    if let Some(out) = &mut q.output {
        for a in &mut out.attrs {
            if let Some(source) = &mut a.source {
                source.span = Span::default();
            }
        }
    }
    strip_formula(&mut q.body);
}

fn strip_formula(f: &mut TrcFormula) {
    match f {
        TrcFormula::And(fs) | TrcFormula::Or(fs) => fs.iter_mut().for_each(strip_formula),
        TrcFormula::Not(g) => strip_formula(g),
        TrcFormula::Exists(qs, g) => {
            for q in qs {
                q.span = Span::default();
            }
            strip_formula(g);
        }
        TrcFormula::Pred(p) => {
            p.span = Span::default();
            if let Operand::Attr(a) = &mut p.left {
                a.span = Span::default();
            }
            if let Operand::Attr(a) = &mut p.right {
                a.span = Span::default();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(text: &str) {
        let q = parse_trc(text).unwrap();
        let printed = print_trc(&q);
        let mut q2 = parse_trc(&printed).unwrap();
        let mut q1 = q.clone();
        strip_spans(&mut q1);
        strip_spans(&mut q2);
        assert_eq!(q1, q2, "round trip failed for {text} -> {printed}");
    }

    #[test]
    fn minimal_query_parses() {
        let q = parse_trc("{ q(A) | exists r in R [q.A = r.A] }").unwrap();
        let out = q.output.as_ref().unwrap();
        assert_eq!(out.name, "q");
        assert_eq!(out.attrs.len(), 1);
        assert_eq!(out.attrs[0].source.as_ref().unwrap().var, "r");
        assert_eq!(q.quantifiers().len(), 1);
    }

    #[test]
    fn division_round_trips() {
        round_trip(
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [not (exists r2 in R [r2.B = s.B and r2.A = r.A])])] }",
        );
    }

    #[test]
    fn boolean_sentence_round_trips() {
        round_trip(
            "not (exists s in Sailor [not (exists b in Boat, r in Reserves [b.color = 'red' and r.bid = b.bid and r.sid = s.sid])])",
        );
    }

    #[test]
    fn disjunction_parses() {
        let q = parse_trc("exists r in R [r.A = 1 or r.A = 2]").unwrap();
        assert!(q.body.contains_or());
        round_trip("exists r in R [r.A = 1 or r.A = 2]");
    }

    #[test]
    fn missing_linkage_is_rejected() {
        assert!(parse_trc("{ q(A) | exists r in R [r.A = 1] }").is_err());
    }

    #[test]
    fn output_in_negation_is_rejected() {
        assert!(
            parse_trc("{ q(A) | exists r in R [q.A = r.A and not (exists s in S [s.B = q.A])] }")
                .is_err()
        );
    }

    #[test]
    fn inequality_output_linkage_is_rejected() {
        assert!(parse_trc("{ q(A) | exists r in R [q.A > r.A] }").is_err());
    }

    #[test]
    fn constant_flips_to_the_right() {
        let q = parse_trc("exists r in R [5 < r.A]").unwrap();
        match &q.body {
            TrcFormula::Exists(_, inner) => match inner.as_ref() {
                TrcFormula::Pred(p) => {
                    assert!(matches!(p.left, Operand::Attr(_)));
                    assert_eq!(p.op, crate::ast::CompOp::Gt);
                }
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_binding_is_rejected() {
        assert!(parse_trc("exists r in R [r.A = 1 and not (exists r in R [r.A = 2])]").is_err());
    }

    #[test]
    fn syntax_error_carries_span() {
        let err = parse_trc("{ q(A) | exists r in [q.A = r.A] }").unwrap_err();
        match err {
            crate::Error::Parse { span, .. } => assert!(span.start > 0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
