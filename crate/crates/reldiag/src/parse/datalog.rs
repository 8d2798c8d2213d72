//! Datalog concrete syntax.
//!
//! ```text
//! I(x) :- R(x, _), S(y), not R(x, y).
//! Q(x) :- R(x, _), not I(x).
//! ```
//!
//! Each `_` expands to a fresh variable at parse time; the printer collapses
//! variables that occur exactly once in a rule's positive atoms back to `_`.

use crate::ast::datalog::{Atom, Comparison, DatalogProgram, Literal, Rule, Term};
use crate::catalog::Value;
use crate::parse::err_at;
use crate::parse::lexer::{value_text, Cursor, TokenKind};
use crate::Result;

pub fn parse_datalog(text: &str) -> Result<DatalogProgram> {
    let mut cur = Cursor::new(text)?;
    let mut rules = Vec::new();
    let mut anon = AnonCounter::default();
    while !cur.at_end() {
        rules.push(parse_rule(&mut cur, &mut anon)?);
    }
    if rules.is_empty() {
        return Err(err_at(Default::default(), "empty program"));
    }
    Ok(DatalogProgram { rules })
}

#[derive(Default)]
struct AnonCounter(usize);

impl AnonCounter {
    fn fresh(&mut self) -> String {
        self.0 += 1;
        format!("_{}", self.0)
    }
}

fn parse_rule(cur: &mut Cursor, anon: &mut AnonCounter) -> Result<Rule> {
    let span = cur.here();
    let head = parse_atom(cur, anon)?;
    cur.expect(TokenKind::ColonDash, "':-'")?;
    let mut body = Vec::new();
    loop {
        body.push(parse_literal(cur, anon)?);
        if !cur.eat(&TokenKind::Comma) {
            break;
        }
    }
    cur.expect(TokenKind::Dot, "'.' terminating the rule")?;
    Ok(Rule { head, body, span })
}

fn parse_literal(cur: &mut Cursor, anon: &mut AnonCounter) -> Result<Literal> {
    if cur.eat_kw("not", false) {
        return Ok(Literal::Neg(parse_atom(cur, anon)?));
    }
    // An atom starts with an identifier followed by '('; a bare identifier
    // is a zero-ary atom. Anything else is a comparison.
    if matches!(cur.peek(), Some(t) if matches!(t.kind, TokenKind::Ident(_)))
        && (matches!(cur.peek2(), Some(t) if t.kind == TokenKind::LParen)
            || matches!(cur.peek2(), Some(t) if t.kind == TokenKind::Comma || t.kind == TokenKind::Dot))
    {
        // Identifier followed by '(' is an atom; followed by ',' or '.' it
        // is a zero-ary atom.
        return Ok(Literal::Pos(parse_atom(cur, anon)?));
    }
    let span = cur.here();
    let left = parse_term(cur, anon)?;
    let (op, _) = cur.expect_op()?;
    let right = parse_term(cur, anon)?;
    Ok(Literal::Cmp(Comparison {
        left,
        op,
        right,
        span,
    }))
}

fn parse_atom(cur: &mut Cursor, anon: &mut AnonCounter) -> Result<Atom> {
    let (pred, span) = cur.expect_ident("predicate name")?;
    let mut args = Vec::new();
    if cur.eat(&TokenKind::LParen) {
        if !cur.eat(&TokenKind::RParen) {
            loop {
                args.push(parse_term(cur, anon)?);
                if !cur.eat(&TokenKind::Comma) {
                    break;
                }
            }
            cur.expect(TokenKind::RParen, "')'")?;
        }
    }
    Ok(Atom { pred, args, span })
}

fn parse_term(cur: &mut Cursor, anon: &mut AnonCounter) -> Result<Term> {
    let span = cur.here();
    match cur.next() {
        Some(t) => match t.kind {
            TokenKind::Ident(name) if name == "_" => Ok(Term::Var(anon.fresh())),
            TokenKind::Ident(name) => Ok(Term::Var(name)),
            TokenKind::Int(n) => Ok(Term::Const(Value::Int(n))),
            TokenKind::Str(s) => Ok(Term::Const(Value::Str(s))),
            _ => Err(err_at(span, "expected variable, '_' or constant")),
        },
        None => Err(err_at(span, "expected term")),
    }
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_datalog(p: &DatalogProgram) -> String {
    let mut out = String::new();
    for rule in &p.rules {
        print_rule(rule, &mut out);
        out.push('\n');
    }
    out
}

fn print_rule(rule: &Rule, out: &mut String) {
    let occurrences = rule.var_occurrences();
    let collapse = |t: &Term, in_positive: bool| -> String {
        match t {
            Term::Var(v) if in_positive && occurrences.get(v) == Some(&1) => "_".to_string(),
            Term::Var(v) => v.clone(),
            Term::Const(v) => value_text(v),
        }
    };
    let atom = |a: &Atom, in_positive: bool, out: &mut String| {
        out.push_str(&a.pred);
        if !a.args.is_empty() {
            out.push('(');
            let args: Vec<String> = a.args.iter().map(|t| collapse(t, in_positive)).collect();
            out.push_str(&args.join(", "));
            out.push(')');
        }
    };
    atom(&rule.head, false, out);
    out.push_str(" :- ");
    for (i, lit) in rule.body.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match lit {
            Literal::Pos(a) => atom(a, true, out),
            Literal::Neg(a) => {
                out.push_str("not ");
                atom(a, false, out);
            }
            Literal::Cmp(c) => {
                out.push_str(&collapse(&c.left, false));
                out.push(' ');
                out.push_str(&c.op.to_string());
                out.push(' ');
                out.push_str(&collapse(&c.right, false));
            }
        }
    }
    out.push('.');
}

/// Rename single-occurrence variables in positive atoms to the `_N` names
/// the parser would assign, so printing and re-parsing is the identity on
/// synthesized programs.
pub fn normalize_anon_vars(p: &mut DatalogProgram) {
    let mut counter = 0usize;
    for rule in &mut p.rules {
        let occurrences = rule.var_occurrences();
        let mut mapping = std::collections::BTreeMap::new();
        for lit in &mut rule.body {
            if let Literal::Pos(a) = lit {
                for t in &mut a.args {
                    if let Term::Var(v) = t {
                        if occurrences.get(v) == Some(&1) {
                            counter += 1;
                            let fresh = format!("_{counter}");
                            mapping.insert(v.clone(), fresh.clone());
                            *t = Term::Var(fresh);
                        }
                    }
                }
            }
        }
    }
}

pub fn strip_spans(p: &mut DatalogProgram) {
    for rule in &mut p.rules {
        rule.span = Default::default();
        rule.head.span = Default::default();
        for lit in &mut rule.body {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => a.span = Default::default(),
                Literal::Cmp(c) => c.span = Default::default(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(text: &str) {
        let mut q = parse_datalog(text).unwrap();
        normalize_anon_vars(&mut q);
        let printed = print_datalog(&q);
        let mut q2 = parse_datalog(&printed).unwrap();
        strip_spans(&mut q2);
        let mut q1 = q.clone();
        strip_spans(&mut q1);
        assert_eq!(q1, q2, "round trip failed:\n{text}\n->\n{printed}");
    }

    #[test]
    fn single_rule_with_negation() {
        let p = parse_datalog("Q(x,y) :- R(x,y), not S(y).").unwrap();
        assert_eq!(p.rules.len(), 1);
        let rule = &p.rules[0];
        assert_eq!(rule.head.pred, "Q");
        assert_eq!(rule.positive_atoms().count(), 1);
        assert_eq!(rule.negated_atoms().count(), 1);
    }

    #[test]
    fn division_program() {
        let p = parse_datalog("I(x) :- R(x,_), S(y), not R(x,y).\nQ(x) :- R(x,_), not I(x).")
            .unwrap();
        assert_eq!(p.rules.len(), 2);
        // Anonymous variables became fresh names.
        let first = &p.rules[0];
        let args: Vec<_> = first.positive_atoms().flat_map(|a| a.args.clone()).collect();
        assert!(args.iter().any(|t| matches!(t, Term::Var(v) if v.starts_with('_'))));
        round_trip("I(x) :- R(x,_), S(y), not R(x,y).\nQ(x) :- R(x,_), not I(x).");
    }

    #[test]
    fn anonymous_collapse_on_print() {
        let p = parse_datalog("Q(x) :- R(x, z).").unwrap();
        // z occurs once, so it prints as _
        assert_eq!(print_datalog(&p).trim(), "Q(x) :- R(x, _).");
    }

    #[test]
    fn builtins_and_constants() {
        round_trip("Q(x) :- R(x,y), S(x), T(_), y > 5.");
        round_trip("I(s) :- Reserves(s,b), Boat(b,'red').");
    }

    #[test]
    fn zero_ary_heads() {
        let p = parse_datalog("I(s) :- Sailor(s, x), not Good(s).\nQ :- not I().").unwrap();
        assert!(p.is_boolean());
        round_trip("Q :- not I().");
    }

    #[test]
    fn missing_comma_is_rejected() {
        assert!(parse_datalog("Q(x) :- R(x) S(x).").is_err());
    }
}
