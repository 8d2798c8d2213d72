//! Algebra concrete syntax in functional prefix form, which needs no
//! precedence rules:
//!
//! ```text
//! minus(project[A](R), project[A](minus(times(project[A](R), S), R)))
//! select[B > 5 and A = C](R)
//! antijoin[R.A = S.A](R, S)
//! ```
//!
//! `join[]` and `antijoin[]` with an empty condition list are natural:
//! the conditions are equalities over the attribute names shared by both
//! sides, and a natural `join[]` collapses the shared columns.

use crate::ast::ra::{RaColRef, RaCond, RaExpr, RaRhs};
use crate::catalog::Value;
use crate::parse::err_at;
use crate::parse::lexer::{value_text, Cursor, TokenKind};
use crate::span::Span;
use crate::Result;

pub fn parse_ra(text: &str) -> Result<RaExpr> {
    let mut cur = Cursor::new(text)?;
    let e = parse_expr(&mut cur)?;
    cur.expect_end()?;
    Ok(e)
}

fn parse_expr(cur: &mut Cursor) -> Result<RaExpr> {
    let span = cur.here();
    if cur.eat(&TokenKind::LParen) {
        let e = parse_expr(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(e);
    }
    let (word, wspan) = cur.expect_ident("expression")?;
    match word.as_str() {
        "project" => {
            cur.expect(TokenKind::LBracket, "'['")?;
            let mut cols = vec![parse_colref(cur)?];
            while cur.eat(&TokenKind::Comma) {
                cols.push(parse_colref(cur)?);
            }
            cur.expect(TokenKind::RBracket, "']'")?;
            let input = parse_parenthesized(cur)?;
            Ok(RaExpr::Project {
                cols,
                input: Box::new(input),
            })
        }
        "select" => {
            let conds = parse_cond_list(cur, false)?;
            let input = parse_parenthesized(cur)?;
            Ok(RaExpr::Select {
                conds,
                input: Box::new(input),
            })
        }
        "times" => {
            let (left, right) = parse_pair(cur)?;
            Ok(RaExpr::Product {
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        "join" => {
            let conds = parse_cond_list(cur, true)?;
            let (left, right) = parse_pair(cur)?;
            Ok(RaExpr::Join {
                conds,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        "minus" => {
            let (left, right) = parse_pair(cur)?;
            Ok(RaExpr::Minus {
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        "rename" => {
            cur.expect(TokenKind::LBracket, "'['")?;
            let mut pairs = Vec::new();
            loop {
                let (old, _) = cur.expect_ident("attribute name")?;
                cur.expect(TokenKind::Arrow, "'->'")?;
                let (new, _) = cur.expect_ident("attribute name")?;
                pairs.push((old, new));
                if !cur.eat(&TokenKind::Comma) {
                    break;
                }
            }
            cur.expect(TokenKind::RBracket, "']'")?;
            let input = parse_parenthesized(cur)?;
            Ok(RaExpr::Rename {
                pairs,
                input: Box::new(input),
            })
        }
        "antijoin" => {
            let conds = parse_cond_list(cur, true)?;
            let (left, right) = parse_pair(cur)?;
            Ok(RaExpr::Antijoin {
                conds,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => {
            let _ = span;
            Ok(RaExpr::Relation {
                name: word,
                span: wspan,
            })
        }
    }
}

fn parse_parenthesized(cur: &mut Cursor) -> Result<RaExpr> {
    cur.expect(TokenKind::LParen, "'('")?;
    let e = parse_expr(cur)?;
    cur.expect(TokenKind::RParen, "')'")?;
    Ok(e)
}

fn parse_pair(cur: &mut Cursor) -> Result<(RaExpr, RaExpr)> {
    cur.expect(TokenKind::LParen, "'('")?;
    let left = parse_expr(cur)?;
    cur.expect(TokenKind::Comma, "','")?;
    let right = parse_expr(cur)?;
    cur.expect(TokenKind::RParen, "')'")?;
    Ok((left, right))
}

fn parse_cond_list(cur: &mut Cursor, allow_empty: bool) -> Result<Vec<RaCond>> {
    cur.expect(TokenKind::LBracket, "'['")?;
    let mut conds = Vec::new();
    if cur.eat(&TokenKind::RBracket) {
        if allow_empty {
            return Ok(conds);
        }
        return Err(err_at(cur.here(), "selection requires at least one condition"));
    }
    loop {
        conds.push(parse_cond(cur)?);
        if !cur.eat_kw("and", false) {
            break;
        }
    }
    cur.expect(TokenKind::RBracket, "']'")?;
    Ok(conds)
}

fn parse_cond(cur: &mut Cursor) -> Result<RaCond> {
    let span = cur.here();
    let left = parse_colref(cur)?;
    let (op, _) = cur.expect_op()?;
    let right = match cur.peek().map(|t| t.kind.clone()) {
        Some(TokenKind::Int(n)) => {
            cur.next();
            RaRhs::Const(Value::Int(n))
        }
        Some(TokenKind::Str(s)) => {
            cur.next();
            RaRhs::Const(Value::Str(s))
        }
        _ => RaRhs::Col(parse_colref(cur)?),
    };
    Ok(RaCond {
        left,
        op,
        right,
        span,
    })
}

fn parse_colref(cur: &mut Cursor) -> Result<RaColRef> {
    let (first, span) = cur.expect_ident("column reference")?;
    if cur.eat(&TokenKind::Dot) {
        let (attr, aspan) = cur.expect_ident("attribute name")?;
        Ok(RaColRef {
            rel: Some(first),
            attr,
            span: span.merge(aspan),
        })
    } else {
        Ok(RaColRef {
            rel: None,
            attr: first,
            span,
        })
    }
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_ra(e: &RaExpr) -> String {
    let mut out = String::new();
    print_expr(e, &mut out);
    out
}

fn print_expr(e: &RaExpr, out: &mut String) {
    match e {
        RaExpr::Relation { name, .. } => out.push_str(name),
        RaExpr::Project { cols, input } => {
            out.push_str("project[");
            out.push_str(
                &cols
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            out.push_str("](");
            print_expr(input, out);
            out.push(')');
        }
        RaExpr::Select { conds, input } => {
            out.push_str("select[");
            print_conds(conds, out);
            out.push_str("](");
            print_expr(input, out);
            out.push(')');
        }
        RaExpr::Product { left, right } => print_binary("times", &[], left, right, out),
        RaExpr::Join { conds, left, right } => print_binary("join", conds, left, right, out),
        RaExpr::Minus { left, right } => print_binary("minus", &[], left, right, out),
        RaExpr::Rename { pairs, input } => {
            out.push_str("rename[");
            out.push_str(
                &pairs
                    .iter()
                    .map(|(a, b)| format!("{a}->{b}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            out.push_str("](");
            print_expr(input, out);
            out.push(')');
        }
        RaExpr::Antijoin { conds, left, right } => {
            print_binary("antijoin", conds, left, right, out)
        }
    }
}

fn print_binary(name: &str, conds: &[RaCond], left: &RaExpr, right: &RaExpr, out: &mut String) {
    out.push_str(name);
    if name != "times" && name != "minus" {
        out.push('[');
        print_conds(conds, out);
        out.push(']');
    }
    out.push('(');
    print_expr(left, out);
    out.push_str(", ");
    print_expr(right, out);
    out.push(')');
}

fn print_conds(conds: &[RaCond], out: &mut String) {
    let rendered: Vec<String> = conds
        .iter()
        .map(|c| {
            let rhs = match &c.right {
                RaRhs::Col(r) => r.to_string(),
                RaRhs::Const(v) => value_text(v),
            };
            format!("{} {} {}", c.left, c.op, rhs)
        })
        .collect();
    out.push_str(&rendered.join(" and "));
}

pub fn strip_spans(e: &mut RaExpr) {
    match e {
        RaExpr::Relation { span, .. } => *span = Span::default(),
        RaExpr::Project { cols, input } => {
            for c in cols {
                c.span = Span::default();
            }
            strip_spans(input);
        }
        RaExpr::Select { conds, input } => {
            strip_conds(conds);
            strip_spans(input);
        }
        RaExpr::Product { left, right } | RaExpr::Minus { left, right } => {
            strip_spans(left);
            strip_spans(right);
        }
        RaExpr::Join { conds, left, right } | RaExpr::Antijoin { conds, left, right } => {
            strip_conds(conds);
            strip_spans(left);
            strip_spans(right);
        }
        RaExpr::Rename { input, .. } => strip_spans(input),
    }
}

fn strip_conds(conds: &mut [RaCond]) {
    for c in conds {
        c.span = Span::default();
        c.left.span = Span::default();
        if let RaRhs::Col(r) = &mut c.right {
            r.span = Span::default();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(text: &str) {
        let e = parse_ra(text).unwrap();
        let printed = print_ra(&e);
        let mut e2 = parse_ra(&printed).unwrap();
        let mut e1 = e.clone();
        strip_spans(&mut e1);
        strip_spans(&mut e2);
        assert_eq!(e1, e2, "round trip failed: {text} -> {printed}");
    }

    #[test]
    fn division_expression() {
        let e = parse_ra("minus(project[A](R), project[A](minus(times(project[A](R), S), R)))")
            .unwrap();
        assert_eq!(e.leaves(), vec!["R", "R", "S", "R"]);
        round_trip("minus(project[A](R), project[A](minus(times(project[A](R), S), R)))");
    }

    #[test]
    fn selection_and_rename() {
        round_trip("project[A](join[](select[B > 5](R), rename[A->C](T)))");
        round_trip("select[S.A < R.A](times(R, S))");
    }

    #[test]
    fn antijoins() {
        round_trip("antijoin[R.B = S.B](R, S)");
        round_trip("antijoin[](project[A](R), project[A](antijoin[](times(project[A](R), S), R)))");
    }

    #[test]
    fn empty_selection_is_rejected() {
        assert!(parse_ra("select[](R)").is_err());
    }
}
