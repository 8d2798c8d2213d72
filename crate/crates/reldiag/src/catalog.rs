//! Relation schemas and finite database instances.
//!
//! Databases use set semantics under binary logic: no duplicate tuples and
//! no null values. Values come in two sorts (integer and string), each with
//! a total order, so comparison predicates are well-defined within a sort.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The two value sorts. Comparisons across sorts are rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Int,
    Str,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "int"),
            Sort::Str => write!(f, "str"),
        }
    }
}

/// A scalar constant. Integers order numerically, strings lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Str(_) => Sort::Str,
        }
    }

    /// Compare two values of the same sort; errors on a cross-sort comparison.
    pub fn compare(&self, other: &Value) -> Result<std::cmp::Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Ok(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
            _ => Err(Error::CrossSortComparison {
                left: self.sort(),
                right: other.sort(),
            }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        '\n' => write!(f, "\\n")?,
                        '\t' => write!(f, "\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
        }
    }
}

/// One attribute of a relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub sort: Sort,
}

/// A named relation with an ordered attribute list (arity >= 1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDecl {
    pub name: String,
    pub attrs: Vec<Attribute>,
}

impl RelationDecl {
    pub fn arity(&self) -> usize {
        self.attrs.len()
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.attrs.iter().map(|a| a.sort).collect()
    }
}

/// A set of relation declarations. Declaration order is preserved so that
/// printed output and enumeration are deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    relations: Vec<RelationDecl>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn add_relation(&mut self, name: &str, attrs: Vec<(&str, Sort)>) -> Result<()> {
        self.add_decl(RelationDecl {
            name: name.to_string(),
            attrs: attrs
                .into_iter()
                .map(|(n, s)| Attribute {
                    name: n.to_string(),
                    sort: s,
                })
                .collect(),
        })
    }

    pub fn add_decl(&mut self, decl: RelationDecl) -> Result<()> {
        if decl.attrs.is_empty() {
            return Err(Error::Schema(format!(
                "relation {} must have arity >= 1",
                decl.name
            )));
        }
        if self.relation(&decl.name).is_some() {
            return Err(Error::Schema(format!(
                "duplicate relation name {}",
                decl.name
            )));
        }
        let mut seen = BTreeSet::new();
        for a in &decl.attrs {
            if !seen.insert(a.name.clone()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute {} in relation {}",
                    a.name, decl.name
                )));
            }
        }
        self.relations.push(decl);
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationDecl> {
        self.relations.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Look up an attribute's sort, erroring on unknown names.
    pub fn attr_sort(&self, rel: &str, attr: &str) -> Result<Sort> {
        let decl = self
            .relation(rel)
            .ok_or_else(|| Error::Schema(format!("unknown relation {rel}")))?;
        decl.attrs
            .iter()
            .find(|a| a.name == attr)
            .map(|a| a.sort)
            .ok_or_else(|| Error::Schema(format!("relation {rel} has no attribute {attr}")))
    }
}

/// An immutable finite database instance over a schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    pub schema: Schema,
    tuples: BTreeMap<String, BTreeSet<Vec<Value>>>,
}

impl Database {
    /// An empty instance: every relation of the schema present with no tuples.
    pub fn empty(schema: Schema) -> Self {
        let tuples = schema
            .relations()
            .map(|r| (r.name.clone(), BTreeSet::new()))
            .collect();
        Database { schema, tuples }
    }

    /// Insert a tuple, checking arity and sorts. Duplicate inserts are no-ops.
    pub fn insert(&mut self, rel: &str, tuple: Vec<Value>) -> Result<()> {
        let decl = self
            .schema
            .relation(rel)
            .ok_or_else(|| Error::Schema(format!("unknown relation {rel}")))?;
        if tuple.len() != decl.arity() {
            return Err(Error::Schema(format!(
                "arity mismatch for {}: expected {}, got {}",
                rel,
                decl.arity(),
                tuple.len()
            )));
        }
        for (v, a) in tuple.iter().zip(&decl.attrs) {
            if v.sort() != a.sort {
                return Err(Error::Schema(format!(
                    "sort mismatch for {}.{}: expected {}, got {}",
                    rel, a.name, a.sort, v.sort()
                )));
            }
        }
        self.tuples.get_mut(rel).unwrap().insert(tuple);
        Ok(())
    }

    pub fn tuples(&self, rel: &str) -> &BTreeSet<Vec<Value>> {
        static EMPTY: std::sync::OnceLock<BTreeSet<Vec<Value>>> = std::sync::OnceLock::new();
        self.tuples
            .get(rel)
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    pub fn len(&self, rel: &str) -> usize {
        self.tuples(rel).len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.values().all(|t| t.is_empty())
    }

    /// All values of the given sort appearing in any tuple.
    pub fn active_domain(&self, sort: Sort) -> BTreeSet<Value> {
        let mut dom = BTreeSet::new();
        for set in self.tuples.values() {
            for tuple in set {
                for v in tuple {
                    if v.sort() == sort {
                        dom.insert(v.clone());
                    }
                }
            }
        }
        dom
    }
}

/// Module-level alias for [`Database::active_domain`].
pub fn active_domain(db: &Database, sort: Sort) -> BTreeSet<Value> {
    db.active_domain(sort)
}

/// Parse the line-oriented database file format.
///
/// Header lines declare relations (`relation R(A:int, B:str)`), data lines
/// list tuples (`R(1, "red")`), `#` begins a comment. Duplicate rows are
/// silently de-duplicated (set semantics); a `null` literal is an error.
pub fn load_database(text: &str) -> Result<Database> {
    let mut schema = Schema::new();
    let mut rows: Vec<(String, Vec<Value>, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("relation ") {
            schema.add_decl(parse_relation_decl(rest.trim(), lineno + 1)?)?;
        } else {
            rows.push(parse_data_line(line, lineno + 1).map(|(r, t)| (r, t, lineno + 1))?);
        }
    }
    let mut db = Database::empty(schema);
    for (rel, tuple, lineno) in rows {
        db.insert(&rel, tuple)
            .map_err(|e| Error::Schema(format!("line {lineno}: {e}")))?;
    }
    Ok(db)
}

/// Render a database in the file format with canonical row ordering,
/// so that `load_database(save_database(db)) == db`.
pub fn save_database(db: &Database) -> String {
    let mut out = String::new();
    for rel in db.schema.relations() {
        out.push_str("relation ");
        out.push_str(&rel.name);
        out.push('(');
        for (i, a) in rel.attrs.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{}:{}", a.name, a.sort));
        }
        out.push_str(")\n");
    }
    for rel in db.schema.relations() {
        for tuple in db.tuples(&rel.name) {
            out.push_str(&rel.name);
            out.push('(');
            for (i, v) in tuple.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&v.to_string());
            }
            out.push_str(")\n");
        }
    }
    out
}

fn strip_comment(line: &str) -> &str {
    // A # inside a string literal does not start a comment.
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            '\\' if in_str => escaped = !escaped,
            '"' if !escaped => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => escaped = false,
        }
    }
    line
}

fn parse_relation_decl(text: &str, lineno: usize) -> Result<RelationDecl> {
    let err = |msg: &str| Error::Schema(format!("line {lineno}: {msg}"));
    let open = text.find('(').ok_or_else(|| err("expected '('"))?;
    let name = text[..open].trim().to_string();
    if name.is_empty() {
        return Err(err("missing relation name"));
    }
    let close = text.rfind(')').ok_or_else(|| err("expected ')'"))?;
    let mut attrs = Vec::new();
    for part in text[open + 1..close].split(',') {
        let part = part.trim();
        let (attr, sort) = part
            .split_once(':')
            .ok_or_else(|| err(&format!("expected attr:sort, got {part}")))?;
        let sort = match sort.trim() {
            "int" => Sort::Int,
            "str" => Sort::Str,
            other => return Err(err(&format!("unknown sort {other}"))),
        };
        attrs.push(Attribute {
            name: attr.trim().to_string(),
            sort,
        });
    }
    Ok(RelationDecl { name, attrs })
}

fn parse_data_line(line: &str, lineno: usize) -> Result<(String, Vec<Value>)> {
    let err = |msg: String| Error::Schema(format!("line {lineno}: {msg}"));
    let open = line
        .find('(')
        .ok_or_else(|| err("expected '(' in data line".into()))?;
    let rel = line[..open].trim().to_string();
    let close = line
        .rfind(')')
        .ok_or_else(|| err("expected ')' in data line".into()))?;
    let body = &line[open + 1..close];
    let mut values = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (value, remainder) = parse_value(rest, lineno)?;
        values.push(value);
        rest = remainder.trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
            if rest.is_empty() {
                return Err(err("trailing comma".into()));
            }
        } else if !rest.is_empty() {
            return Err(err(format!("unexpected input {rest}")));
        }
    }
    Ok((rel, values))
}

fn parse_value(text: &str, lineno: usize) -> Result<(Value, &str)> {
    let err = |msg: String| Error::Schema(format!("line {lineno}: {msg}"));
    if let Some(rest) = text.strip_prefix('"') {
        let mut s = String::new();
        let mut chars = rest.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, 'n')) => s.push('\n'),
                    Some((_, 't')) => s.push('\t'),
                    Some((_, c2)) => s.push(c2),
                    None => return Err(err("dangling escape".into())),
                },
                '"' => return Ok((Value::Str(s), &rest[i + 1..])),
                c => s.push(c),
            }
        }
        Err(err("unterminated string".into()))
    } else {
        let end = text
            .find(|c: char| c == ',' || c.is_whitespace())
            .unwrap_or(text.len());
        let token = &text[..end];
        if token.eq_ignore_ascii_case("null") {
            return Err(Error::NullValue { line: lineno });
        }
        let n: i64 = token
            .parse()
            .map_err(|_| err(format!("expected integer or string, got {token}")))?;
        Ok((Value::Int(n), &text[end..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_rows_are_deduplicated() {
        let db = load_database("relation R(A:int, B:int)\nR(1, 2)\nR(1, 2)\n").unwrap();
        assert_eq!(db.len("R"), 1);
    }

    #[test]
    fn schema_only_file_gives_empty_relations() {
        let db = load_database("relation R(A:int, B:int)\nrelation S(B:int)\n").unwrap();
        assert!(db.is_empty());
        assert_eq!(db.tuples("R").len(), 0);
        assert_eq!(db.tuples("S").len(), 0);
    }

    #[test]
    fn null_literal_is_rejected() {
        let res = load_database("relation R(A:int, B:int)\nR(1, null)\n");
        assert!(matches!(res, Err(Error::NullValue { .. })));
    }

    #[test]
    fn arity_and_sort_mismatches_are_rejected() {
        assert!(load_database("relation R(A:int)\nR(1, 2)\n").is_err());
        assert!(load_database("relation R(A:int)\nR(\"x\")\n").is_err());
        assert!(load_database("R(1)\n").is_err());
    }

    #[test]
    fn active_domain_matches_naive_scan() {
        let db = load_database(
            "relation R(A:int, B:int)\nrelation S(B:int)\nR(1, 5)\nS(7)\n",
        )
        .unwrap();
        let dom = active_domain(&db, Sort::Int);
        let expected: BTreeSet<Value> = [1, 5, 7].into_iter().map(Value::Int).collect();
        assert_eq!(dom, expected);
        assert!(active_domain(&db, Sort::Str).is_empty());
    }

    #[test]
    fn empty_database_has_empty_domain() {
        let db = Database::empty(Schema::new());
        assert!(db.active_domain(Sort::Int).is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let text = "relation R(A:int, B:str)\nR(1, \"red\")\nR(2, \"a\\\"b\")\n";
        let db = load_database(text).unwrap();
        let saved = save_database(&db);
        let reloaded = load_database(&saved).unwrap();
        assert_eq!(db, reloaded);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let db = load_database(
            "# a comment\nrelation R(A:int, B:str)\n\nR(1, \"re#d\") # trailing\n",
        )
        .unwrap();
        assert_eq!(db.len("R"), 1);
        assert!(db
            .tuples("R")
            .contains(&vec![Value::Int(1), Value::Str("re#d".into())]));
    }

    #[test]
    fn cross_sort_comparison_errors() {
        let a = Value::Int(1);
        let b = Value::Str("1".into());
        assert!(a.compare(&b).is_err());
    }
}
