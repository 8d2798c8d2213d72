//! Shared lexer for the query dialects.

use crate::ast::CompOp;
use crate::catalog::Value;
use crate::span::Span;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Str(String),
    Op(CompOp),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Pipe,
    Dot,
    Comma,
    Star,
    ColonDash,
    Arrow,
    Period, // rule terminator '.' is context dependent; see Dot
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Tokenize. `--` starts a line comment in every dialect.
pub fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    macro_rules! span {
        ($start:expr, $end:expr, $scol:expr) => {
            Span::new($start, $end, line, $scol)
        };
    }
    while i < bytes.len() {
        let c = bytes[i] as char;
        let scol = col;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '-' if i + 1 < bytes.len() && bytes[i + 1] == b'-' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '-' if i + 1 < bytes.len() && bytes[i + 1] == b'>' => {
                tokens.push(Token { kind: TokenKind::Arrow, span: span!(i, i + 2, scol) });
                i += 2;
                col += 2;
            }
            '-' if i + 1 < bytes.len() && (bytes[i + 1] as char).is_ascii_digit() => {
                let start = i;
                i += 1;
                col += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let n: i64 = text[start..i].parse().map_err(|_| Error::Parse {
                    message: format!("invalid integer {}", &text[start..i]),
                    span: span!(start, i, scol),
                })?;
                tokens.push(Token { kind: TokenKind::Int(n), span: span!(start, i, scol) });
            }
            ':' if i + 1 < bytes.len() && bytes[i + 1] == b'-' => {
                tokens.push(Token { kind: TokenKind::ColonDash, span: span!(i, i + 2, scol) });
                i += 2;
                col += 2;
            }
            '{' => { tokens.push(Token { kind: TokenKind::LBrace, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '}' => { tokens.push(Token { kind: TokenKind::RBrace, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '(' => { tokens.push(Token { kind: TokenKind::LParen, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            ')' => { tokens.push(Token { kind: TokenKind::RParen, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '[' => { tokens.push(Token { kind: TokenKind::LBracket, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            ']' => { tokens.push(Token { kind: TokenKind::RBracket, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '|' => { tokens.push(Token { kind: TokenKind::Pipe, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            ',' => { tokens.push(Token { kind: TokenKind::Comma, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '.' => { tokens.push(Token { kind: TokenKind::Dot, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '*' => { tokens.push(Token { kind: TokenKind::Star, span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '=' => { tokens.push(Token { kind: TokenKind::Op(CompOp::Eq), span: span!(i, i + 1, scol) }); i += 1; col += 1; }
            '!' if i + 1 < bytes.len() && bytes[i + 1] == b'=' => {
                tokens.push(Token { kind: TokenKind::Op(CompOp::Ne), span: span!(i, i + 2, scol) });
                i += 2;
                col += 2;
            }
            '<' => {
                let (kind, len) = if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    (TokenKind::Op(CompOp::Le), 2)
                } else if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    // <> normalizes to != at lexing time
                    (TokenKind::Op(CompOp::Ne), 2)
                } else {
                    (TokenKind::Op(CompOp::Lt), 1)
                };
                tokens.push(Token { kind, span: span!(i, i + len, scol) });
                i += len;
                col += len as u32;
            }
            '>' => {
                let (kind, len) = if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    (TokenKind::Op(CompOp::Ge), 2)
                } else {
                    (TokenKind::Op(CompOp::Gt), 1)
                };
                tokens.push(Token { kind, span: span!(i, i + len, scol) });
                i += len;
                col += len as u32;
            }
            '\'' | '"' => {
                let quote = c;
                let start = i;
                i += 1;
                col += 1;
                let mut s = String::new();
                let mut closed = false;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d == quote {
                        i += 1;
                        col += 1;
                        closed = true;
                        break;
                    }
                    if d == '\\' && i + 1 < bytes.len() {
                        i += 1;
                        col += 1;
                        match bytes[i] as char {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            other => s.push(other),
                        }
                    } else {
                        if d == '\n' {
                            line += 1;
                            col = 0;
                        }
                        s.push(d);
                    }
                    i += 1;
                    col += 1;
                }
                if !closed {
                    return Err(Error::Parse {
                        message: "unterminated string literal".into(),
                        span: span!(start, i, scol),
                    });
                }
                tokens.push(Token { kind: TokenKind::Str(s), span: span!(start, i, scol) });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let n: i64 = text[start..i].parse().map_err(|_| Error::Parse {
                    message: format!("invalid integer {}", &text[start..i]),
                    span: span!(start, i, scol),
                })?;
                tokens.push(Token { kind: TokenKind::Int(n), span: span!(start, i, scol) });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    span: span!(start, i, scol),
                });
            }
            other => {
                return Err(Error::Parse {
                    message: format!("unexpected character {other:?}"),
                    span: span!(i, i + 1, scol),
                })
            }
        }
    }
    Ok(tokens)
}

/// Token stream with one-token lookahead helpers.
pub struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    end: Span,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Cursor> {
        let tokens = lex(text)?;
        let end = tokens
            .last()
            .map(|t| Span::new(t.span.end, t.span.end, t.span.line, t.span.column))
            .unwrap_or_default();
        Ok(Cursor { tokens, pos: 0, end })
    }

    pub fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    pub fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    pub fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.end)
    }

    /// Consume an identifier equal to `kw` (case-insensitive when asked).
    pub fn eat_kw(&mut self, kw: &str, ci: bool) -> bool {
        if self.is_kw(kw, ci) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn is_kw(&self, kw: &str, ci: bool) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(s), .. })
            if (ci && s.eq_ignore_ascii_case(kw)) || (!ci && s == kw))
    }

    pub fn is_kw2(&self, kw: &str, ci: bool) -> bool {
        matches!(self.peek2(), Some(Token { kind: TokenKind::Ident(s), .. })
            if (ci && s.eq_ignore_ascii_case(kw)) || (!ci && s == kw))
    }

    pub fn expect_kw(&mut self, kw: &str, ci: bool) -> Result<Span> {
        let span = self.here();
        if self.eat_kw(kw, ci) {
            Ok(span)
        } else {
            Err(Error::Parse {
                message: format!("expected keyword {kw}"),
                span,
            })
        }
    }

    pub fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Span> {
        let span = self.here();
        if self.eat(&kind) {
            Ok(span)
        } else {
            Err(Error::Parse {
                message: format!("expected {what}"),
                span,
            })
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Span)> {
        let span = self.here();
        match self.next() {
            Some(Token { kind: TokenKind::Ident(s), span }) => Ok((s, span)),
            _ => Err(Error::Parse {
                message: format!("expected {what}"),
                span,
            }),
        }
    }

    pub fn expect_end(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(Error::Parse {
                message: "unexpected trailing input".into(),
                span: t.span,
            }),
        }
    }

    pub fn expect_op(&mut self) -> Result<(CompOp, Span)> {
        let span = self.here();
        match self.next() {
            Some(Token { kind: TokenKind::Op(op), span }) => Ok((op, span)),
            _ => Err(Error::Parse {
                message: "expected comparison operator".into(),
                span,
            }),
        }
    }
}

/// Quote a string constant for query text output (single quotes).
pub fn quote_str(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Render a value in query syntax.
pub fn value_text(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Str(s) => quote_str(s),
    }
}
