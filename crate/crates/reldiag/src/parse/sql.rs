//! SQL concrete syntax for the guarded fragment, with the `OR`/`UNION`
//! extension. Keywords are case-insensitive; the outermost non-Boolean
//! query must carry `DISTINCT` (set semantics).

use crate::ast::sql::{
    ColRef, FromItem, Quant, SelectCols, SelectQuery, SqlOperand, SqlPred, SqlQuery,
};
use crate::catalog::Value;
use crate::parse::err_at;
use crate::parse::lexer::{value_text, Cursor, TokenKind};
use crate::span::Span;
use crate::Result;

pub fn parse_sql(text: &str) -> Result<SqlQuery> {
    let mut cur = Cursor::new(text)?;
    let q = parse_query(&mut cur, true)?;
    cur.expect_end()?;
    Ok(q)
}

fn parse_query(cur: &mut Cursor, top: bool) -> Result<SqlQuery> {
    let mut parts = vec![parse_query_part(cur, top)?];
    while cur.eat_kw("union", true) {
        parts.push(parse_query_part(cur, top)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        SqlQuery::Union(parts)
    })
}

fn parse_query_part(cur: &mut Cursor, top: bool) -> Result<SqlQuery> {
    if cur.eat(&TokenKind::LParen) {
        let q = parse_query(cur, top)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(q);
    }
    let select_span = cur.expect_kw("select", true)?;

    // Boolean heads.
    if cur.is_kw("not", true) && cur.is_kw2("exists", true) {
        cur.eat_kw("not", true);
        cur.eat_kw("exists", true);
        cur.expect(TokenKind::LParen, "'('")?;
        let inner = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlQuery::SelectExists {
            negated: true,
            query: Box::new(inner),
            span: select_span,
        });
    }
    if cur.is_kw("exists", true) {
        cur.eat_kw("exists", true);
        cur.expect(TokenKind::LParen, "'('")?;
        let inner = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlQuery::SelectExists {
            negated: false,
            query: Box::new(inner),
            span: select_span,
        });
    }
    if cur.is_kw("not", true) {
        cur.eat_kw("not", true);
        cur.expect(TokenKind::LParen, "'(' after NOT")?;
        let pred = parse_pred(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlQuery::SelectNot(pred, select_span));
    }

    let sq = parse_select_body(cur, select_span)?;
    if top && !sq.distinct {
        return Err(err_at(
            select_span,
            "the main query requires DISTINCT under set semantics",
        ));
    }
    Ok(SqlQuery::Select(sq))
}

/// Parse a subquery including its `SELECT` keyword.
fn parse_select(cur: &mut Cursor) -> Result<SelectQuery> {
    let span = cur.expect_kw("select", true)?;
    parse_select_body(cur, span)
}

fn parse_select_body(cur: &mut Cursor, span: Span) -> Result<SelectQuery> {
    let distinct = cur.eat_kw("distinct", true);
    let columns = if cur.eat(&TokenKind::Star) {
        SelectCols::Star
    } else {
        let mut cols = vec![parse_colref(cur)?];
        while cur.eat(&TokenKind::Comma) {
            cols.push(parse_colref(cur)?);
        }
        SelectCols::List(cols)
    };
    cur.expect_kw("from", true)?;
    let mut from = Vec::new();
    loop {
        let (table, tspan) = cur.expect_ident("table name")?;
        let alias = if cur.eat_kw("as", true) {
            Some(cur.expect_ident("alias")?.0)
        } else if matches!(cur.peek(), Some(t) if is_plain_ident(&t.kind)) {
            Some(cur.expect_ident("alias")?.0)
        } else {
            None
        };
        from.push(FromItem {
            table,
            alias,
            span: tspan,
        });
        if !cur.eat(&TokenKind::Comma) {
            break;
        }
    }
    let where_clause = if cur.eat_kw("where", true) {
        Some(parse_pred(cur)?)
    } else {
        None
    };
    Ok(SelectQuery {
        distinct,
        columns,
        from,
        where_clause,
        span,
    })
}

/// An identifier that is not one of the clause keywords, so it can serve as
/// an implicit alias.
fn is_plain_ident(kind: &TokenKind) -> bool {
    match kind {
        TokenKind::Ident(s) => !["where", "union", "as", "and", "or", "on"]
            .iter()
            .any(|k| s.eq_ignore_ascii_case(k)),
        _ => false,
    }
}

fn parse_pred(cur: &mut Cursor) -> Result<SqlPred> {
    let mut terms = vec![parse_pred_conj(cur)?];
    while cur.eat_kw("or", true) {
        terms.push(parse_pred_conj(cur)?);
    }
    Ok(if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        SqlPred::Or(terms)
    })
}

fn parse_pred_conj(cur: &mut Cursor) -> Result<SqlPred> {
    let mut terms = vec![parse_pred_term(cur)?];
    while cur.eat_kw("and", true) {
        terms.push(parse_pred_term(cur)?);
    }
    Ok(SqlPred::and(terms))
}

fn parse_pred_term(cur: &mut Cursor) -> Result<SqlPred> {
    let span = cur.here();
    if cur.is_kw("not", true) && cur.is_kw2("exists", true) {
        cur.eat_kw("not", true);
        cur.eat_kw("exists", true);
        cur.expect(TokenKind::LParen, "'('")?;
        let q = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::Exists {
            negated: true,
            query: Box::new(q),
            span,
        });
    }
    if cur.eat_kw("exists", true) {
        cur.expect(TokenKind::LParen, "'('")?;
        let q = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::Exists {
            negated: false,
            query: Box::new(q),
            span,
        });
    }
    if cur.eat_kw("not", true) {
        cur.expect(TokenKind::LParen, "'(' after NOT")?;
        let inner = parse_pred(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::Not(Box::new(inner), span));
    }
    if cur.eat(&TokenKind::LParen) {
        let inner = parse_pred(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(inner);
    }

    // Comparison, IN, or quantified subquery; all start with a column.
    let col = parse_colref(cur)?;
    if cur.is_kw("not", true) && cur.is_kw2("in", true) {
        cur.eat_kw("not", true);
        cur.eat_kw("in", true);
        cur.expect(TokenKind::LParen, "'('")?;
        let q = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::In {
            negated: true,
            col,
            query: Box::new(q),
            span,
        });
    }
    if cur.eat_kw("in", true) {
        cur.expect(TokenKind::LParen, "'('")?;
        let q = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::In {
            negated: false,
            col,
            query: Box::new(q),
            span,
        });
    }
    let (op, _) = cur.expect_op()?;
    if cur.is_kw("all", true) || cur.is_kw("any", true) {
        let quant = if cur.eat_kw("all", true) {
            Quant::All
        } else {
            cur.eat_kw("any", true);
            Quant::Any
        };
        cur.expect(TokenKind::LParen, "'('")?;
        let q = parse_select(cur)?;
        cur.expect(TokenKind::RParen, "')'")?;
        return Ok(SqlPred::Quantified {
            col,
            op,
            quant,
            query: Box::new(q),
            span,
        });
    }
    let right = parse_sql_operand(cur)?;
    Ok(SqlPred::Cmp {
        left: col,
        op,
        right,
        span,
    })
}

fn parse_colref(cur: &mut Cursor) -> Result<ColRef> {
    let (first, span) = cur.expect_ident("column reference")?;
    if cur.eat(&TokenKind::Dot) {
        let (col, cspan) = cur.expect_ident("column name")?;
        Ok(ColRef {
            table: Some(first),
            column: col,
            span: span.merge(cspan),
        })
    } else {
        Ok(ColRef {
            table: None,
            column: first,
            span,
        })
    }
}

fn parse_sql_operand(cur: &mut Cursor) -> Result<SqlOperand> {
    let span = cur.here();
    match cur.next() {
        Some(t) => match t.kind {
            TokenKind::Ident(name) => {
                if cur.eat(&TokenKind::Dot) {
                    let (col, cspan) = cur.expect_ident("column name")?;
                    Ok(SqlOperand::Col(ColRef {
                        table: Some(name),
                        column: col,
                        span: t.span.merge(cspan),
                    }))
                } else {
                    Ok(SqlOperand::Col(ColRef {
                        table: None,
                        column: name,
                        span: t.span,
                    }))
                }
            }
            TokenKind::Int(n) => Ok(SqlOperand::Const(Value::Int(n))),
            TokenKind::Str(s) => Ok(SqlOperand::Const(Value::Str(s))),
            _ => Err(err_at(span, "expected column or constant")),
        },
        None => Err(err_at(span, "expected comparison operand")),
    }
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_sql(q: &SqlQuery) -> String {
    let mut out = String::new();
    print_query(q, 0, &mut out);
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push(' ');
    }
}

fn print_query(q: &SqlQuery, depth: usize, out: &mut String) {
    match q {
        SqlQuery::Select(sq) => print_select(sq, depth, out),
        SqlQuery::SelectNot(p, _) => {
            indent(depth, out);
            out.push_str("SELECT NOT (");
            print_pred(p, depth + 1, true, out);
            out.push(')');
        }
        SqlQuery::SelectExists { negated, query, .. } => {
            indent(depth, out);
            out.push_str("SELECT ");
            if *negated {
                out.push_str("NOT ");
            }
            out.push_str("EXISTS (\n");
            print_select(query, depth + 1, out);
            out.push(')');
        }
        SqlQuery::Union(parts) => {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str("\nUNION\n");
                }
                indent(depth, out);
                out.push('(');
                // Union members print on their own lines inside parens.
                let mut inner = String::new();
                print_query(p, depth, &mut inner);
                out.push_str(inner.trim_start());
                out.push(')');
            }
        }
    }
}

fn print_select(sq: &SelectQuery, depth: usize, out: &mut String) {
    indent(depth, out);
    out.push_str("SELECT ");
    if sq.distinct {
        out.push_str("DISTINCT ");
    }
    match &sq.columns {
        SelectCols::Star => out.push('*'),
        SelectCols::List(cols) => {
            let rendered: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
            out.push_str(&rendered.join(", "));
        }
    }
    out.push('\n');
    indent(depth, out);
    out.push_str("FROM ");
    let from: Vec<String> = sq
        .from
        .iter()
        .map(|f| match &f.alias {
            Some(a) => format!("{} AS {}", f.table, a),
            None => f.table.clone(),
        })
        .collect();
    out.push_str(&from.join(", "));
    if let Some(w) = &sq.where_clause {
        out.push('\n');
        indent(depth, out);
        out.push_str("WHERE ");
        print_pred(w, depth, true, out);
    }
}

fn print_pred(p: &SqlPred, depth: usize, top: bool, out: &mut String) {
    match p {
        SqlPred::And(ps) => {
            for (i, q) in ps.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    indent(depth, out);
                    out.push_str("AND ");
                }
                print_pred(q, depth, false, out);
            }
        }
        SqlPred::Or(ps) => {
            if !top {
                out.push('(');
            }
            for (i, q) in ps.iter().enumerate() {
                if i > 0 {
                    out.push_str(" OR ");
                }
                print_pred(q, depth, false, out);
            }
            if !top {
                out.push(')');
            }
        }
        SqlPred::Cmp { left, op, right, .. } => {
            out.push_str(&left.to_string());
            out.push(' ');
            out.push_str(&op.to_string());
            out.push(' ');
            match right {
                SqlOperand::Col(c) => out.push_str(&c.to_string()),
                SqlOperand::Const(v) => out.push_str(&value_text(v)),
            }
        }
        SqlPred::Not(inner, _) => {
            out.push_str("NOT (");
            print_pred(inner, depth + 1, true, out);
            out.push(')');
        }
        SqlPred::Exists { negated, query, .. } => {
            if *negated {
                out.push_str("NOT ");
            }
            out.push_str("EXISTS (\n");
            print_select(query, depth + 1, out);
            out.push(')');
        }
        SqlPred::In { negated, col, query, .. } => {
            out.push_str(&col.to_string());
            if *negated {
                out.push_str(" NOT");
            }
            out.push_str(" IN (\n");
            print_select(query, depth + 1, out);
            out.push(')');
        }
        SqlPred::Quantified { col, op, quant, query, .. } => {
            out.push_str(&format!("{col} {op} "));
            out.push_str(match quant {
                Quant::All => "ALL",
                Quant::Any => "ANY",
            });
            out.push_str(" (\n");
            print_select(query, depth + 1, out);
            out.push(')');
        }
    }
}

/// Zero spans for structural comparison; keyword case and layout never
/// survive printing anyway.
pub fn strip_spans(q: &mut SqlQuery) {
    match q {
        SqlQuery::Select(sq) => strip_select(sq),
        SqlQuery::SelectNot(p, span) => {
            *span = Span::default();
            strip_pred(p);
        }
        SqlQuery::SelectExists { query, span, .. } => {
            *span = Span::default();
            strip_select(query);
        }
        SqlQuery::Union(parts) => parts.iter_mut().for_each(strip_spans),
    }
}

fn strip_select(sq: &mut SelectQuery) {
    sq.span = Span::default();
    if let SelectCols::List(cols) = &mut sq.columns {
        for c in cols {
            c.span = Span::default();
        }
    }
    for f in &mut sq.from {
        f.span = Span::default();
    }
    if let Some(w) = &mut sq.where_clause {
        strip_pred(w);
    }
}

fn strip_pred(p: &mut SqlPred) {
    match p {
        SqlPred::And(ps) | SqlPred::Or(ps) => ps.iter_mut().for_each(strip_pred),
        SqlPred::Cmp { left, right, span, .. } => {
            left.span = Span::default();
            *span = Span::default();
            if let SqlOperand::Col(c) = right {
                c.span = Span::default();
            }
        }
        SqlPred::Not(inner, span) => {
            *span = Span::default();
            strip_pred(inner);
        }
        SqlPred::Exists { query, span, .. } => {
            *span = Span::default();
            strip_select(query);
        }
        SqlPred::In { col, query, span, .. } => {
            col.span = Span::default();
            *span = Span::default();
            strip_select(query);
        }
        SqlPred::Quantified { col, query, span, .. } => {
            col.span = Span::default();
            *span = Span::default();
            strip_select(query);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(text: &str) {
        let q = parse_sql(text).unwrap();
        let printed = print_sql(&q);
        let mut q2 = parse_sql(&printed).unwrap_or_else(|e| panic!("reparse of {printed}: {e}"));
        let mut q1 = q.clone();
        strip_spans(&mut q1);
        strip_spans(&mut q2);
        assert_eq!(q1, q2, "round trip failed:\n{text}\n->\n{printed}");
    }

    #[test]
    fn division_with_nested_not_exists() {
        let text = "SELECT DISTINCT R.A\nFROM R\nWHERE not exists\n (SELECT *\n FROM S\n WHERE not exists\n  (SELECT *\n  FROM R AS R2\n  WHERE R2.B = S.B\n  AND R2.A = R.A))";
        let q = parse_sql(text).unwrap();
        match &q {
            SqlQuery::Select(sq) => {
                assert!(sq.distinct);
                assert_eq!(sq.from.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        round_trip(text);
    }

    #[test]
    fn membership_and_quantified_subqueries() {
        round_trip("SELECT DISTINCT R.A FROM R WHERE R.B IN (SELECT S.B FROM S)");
        round_trip("SELECT DISTINCT R.A FROM R WHERE R.B NOT IN (SELECT S.B FROM S)");
        round_trip("SELECT DISTINCT R.A FROM R WHERE R.B >= ALL (SELECT S.B FROM S)");
        round_trip("SELECT DISTINCT R.A FROM R WHERE R.B = ANY (SELECT S.B FROM S)");
        round_trip("SELECT DISTINCT R.A FROM R WHERE NOT (R.B < ANY (SELECT S.B FROM S))");
    }

    #[test]
    fn boolean_heads() {
        round_trip("SELECT NOT EXISTS (SELECT * FROM Sailor AS s WHERE s.sid = 1)");
        round_trip("SELECT EXISTS (SELECT * FROM R)");
        round_trip(
            "SELECT NOT (NOT EXISTS (SELECT * FROM R WHERE R.A = 1) AND NOT EXISTS (SELECT * FROM R AS R2 WHERE R2.A = 2))",
        );
    }

    #[test]
    fn disjunction_and_union_extension() {
        round_trip("SELECT DISTINCT R.A FROM R, S, T WHERE R.B > 5 AND (R.A = S.A OR R.A = T.A)");
        round_trip("(SELECT DISTINCT R.A FROM R) UNION (SELECT DISTINCT S.A FROM S)");
    }

    #[test]
    fn missing_distinct_on_main_query_is_rejected() {
        assert!(parse_sql("SELECT R.A FROM R").is_err());
        // Subqueries do not need DISTINCT.
        assert!(parse_sql("SELECT DISTINCT R.A FROM R WHERE EXISTS (SELECT * FROM S)").is_ok());
    }

    #[test]
    fn implicit_alias() {
        let q = parse_sql("SELECT DISTINCT s.sid FROM Sailor s").unwrap();
        match q {
            SqlQuery::Select(sq) => assert_eq!(sq.from[0].alias.as_deref(), Some("s")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn case_insensitive_keywords() {
        round_trip("select distinct R.A from R where R.B = 5");
    }
}
