//! The five-step translations between calculus queries and diagrams.
//!
//! Forward: negation scopes become nested canvas partitions, quantified
//! tables become table boxes, selection predicates become in-place cells,
//! join predicates become edges placed (and guarded) in the deeper scope,
//! and the output table links to root-partition attributes. The reverse
//! direction inverts each step; composing the two is the identity up to
//! variable renaming, conjunct reordering, and operand flipping.

use std::collections::BTreeMap;

use crate::ast::trc::{
    AttrRef, Operand, OutputAttr, Predicate, Quantifier, ScopeTree, TrcOutput, TrcQuery,
};
use crate::catalog::Schema;
use crate::diagram::{
    AttributeCell, Diagram, JoinEdge, OutputAttrNode, OutputNode, Partition, Selection, TableNode,
    UnionCell,
};
use crate::translate::TranslationTrace;
use crate::{Dialect, Error, Query, Result};

pub fn trc_to_diagram(q: &TrcQuery, schema: &Schema) -> Result<(Diagram, TranslationTrace)> {
    let report = crate::ast::fragment::classify(&Query::Trc(q.clone()), schema);
    if !report.non_disjunctive || !report.guarded || !report.safe {
        let msg = report
            .violations
            .first()
            .map(|v| v.message.clone())
            .unwrap_or_default();
        return Err(Error::Fragment(msg));
    }
    let canonical = crate::ast::fragment::canonicalize_trc(q)?;
    let scope = ScopeTree::from_query(&canonical)?;
    let mut trace = TranslationTrace::new(Dialect::Trc, Dialect::Diagram);

    let mut builder = CellBuilder::default();
    builder.walk_scope(&scope, None)?;
    trace.push(
        "created canvas partitions from the negation hierarchy",
        builder.cell.partitions.iter().map(|p| p.id.clone()).collect(),
    );
    trace.push(
        "placed one table per quantified tuple variable",
        builder.cell.tables.iter().map(|t| t.id.clone()).collect(),
    );
    trace.push(
        format!("placed {} selection predicate cells", builder.selections),
        vec![],
    );
    trace.push(
        format!("placed {} join predicate edges", builder.cell.edges.len()),
        vec![],
    );

    if let Some(out) = &canonical.output {
        let mut attrs = Vec::new();
        for a in &out.attrs {
            let source = a.source.as_ref().ok_or_else(|| {
                Error::Fragment("unsafe output linkage: unresolved output attribute".into())
            })?;
            let link = builder.endpoint_for(&source.var, &source.attr)?;
            attrs.push(OutputAttrNode {
                name: a.name.clone(),
                link,
            });
        }
        builder.cell.output = Some(OutputNode {
            name: out.name.clone(),
            attrs,
        });
        trace.push("connected the output table to root attributes", vec![]);
    } else {
        trace.push("Boolean sentence: no output table", vec![]);
    }

    let diagram = Diagram::single(builder.cell);
    let validity = crate::diagram::validate(&diagram, schema);
    if !validity.ok() {
        return Err(Error::InvalidDiagram(validity.violations[0].message.clone()));
    }
    // Tables were created in quantifier order, so the correspondence is the
    // identity on signatures.
    trace.correspondence = Some((0..builder.var_table.len()).collect());
    Ok((diagram, trace))
}

#[derive(Default)]
struct CellBuilder {
    cell: UnionCell,
    /// Tuple variable -> table index in `cell.tables`.
    var_table: BTreeMap<String, usize>,
    var_order: Vec<String>,
    selections: usize,
}

impl CellBuilder {
    fn walk_scope(&mut self, scope: &ScopeTree, parent: Option<&str>) -> Result<()> {
        let pid = format!("q{}", self.cell.partitions.len());
        self.cell.partitions.push(Partition {
            id: pid.clone(),
            parent: parent.map(str::to_string),
        });
        for q in &scope.quantifiers {
            let tid = format!("t{}", self.cell.tables.len());
            self.var_table.insert(q.var.clone(), self.cell.tables.len());
            self.var_order.push(q.var.clone());
            self.cell.tables.push(TableNode {
                id: tid,
                rel: q.rel.clone(),
                partition: pid.clone(),
                cells: Vec::new(),
            });
        }
        for p in &scope.predicates {
            self.place_predicate(p)?;
        }
        for child in &scope.children {
            self.walk_scope(child, Some(&pid))?;
        }
        Ok(())
    }

    fn place_predicate(&mut self, p: &Predicate) -> Result<()> {
        match (&p.left, &p.right) {
            (Operand::Attr(l), Operand::Attr(r)) => {
                let from = self.endpoint_for(&l.var, &l.attr)?;
                let to = self.endpoint_for(&r.var, &r.attr)?;
                self.cell.edges.push(JoinEdge {
                    from,
                    to,
                    op: p.op,
                });
                Ok(())
            }
            (Operand::Attr(a), Operand::Const(v)) => {
                let table = *self
                    .var_table
                    .get(&a.var)
                    .ok_or_else(|| Error::Translate(format!("unscoped variable {}", a.var)))?;
                self.cell.tables[table].cells.push(AttributeCell {
                    attr: a.attr.clone(),
                    sel: Some(Selection {
                        op: p.op,
                        value: v.clone(),
                    }),
                });
                self.selections += 1;
                Ok(())
            }
            (Operand::Const(v), Operand::Attr(a)) => {
                // Keep the attribute side as the cell, flipping the operator.
                self.place_predicate(&Predicate {
                    left: Operand::Attr(a.clone()),
                    op: p.op.flip(),
                    right: Operand::Const(v.clone()),
                    span: p.span,
                })
            }
            (Operand::Const(_), Operand::Const(_)) => Err(Error::Fragment(
                "a predicate between two constants is unguarded".into(),
            )),
        }
    }

    /// The selection-free cell of an attribute, created on demand: an
    /// attribute with k selections appears in k cells, plus one more when
    /// it also serves as a join or output endpoint.
    fn endpoint_for(&mut self, var: &str, attr: &str) -> Result<(String, usize)> {
        let table = *self
            .var_table
            .get(var)
            .ok_or_else(|| Error::Translate(format!("unscoped variable {var}")))?;
        let node = &mut self.cell.tables[table];
        let index = node
            .cells
            .iter()
            .position(|c| c.attr == attr && c.sel.is_none())
            .unwrap_or_else(|| {
                node.cells.push(AttributeCell {
                    attr: attr.to_string(),
                    sel: None,
                });
                node.cells.len() - 1
            });
        Ok((node.id.clone(), index))
    }
}

/// Reverse translation for a single-cell diagram.
pub fn diagram_to_trc(d: &Diagram, schema: &Schema) -> Result<(TrcQuery, TranslationTrace)> {
    let report = crate::diagram::validate(d, schema);
    if !report.ok() {
        return Err(Error::InvalidDiagram(report.violations[0].message.clone()));
    }
    if d.cells.len() != 1 {
        return Err(Error::Translate(
            "diagram has union cells; translate each cell separately".into(),
        ));
    }
    let mut trace = TranslationTrace::new(Dialect::Diagram, Dialect::Trc);
    let q = cell_to_trc(&d.cells[0], schema, &mut trace)?;
    // One quantifier was created per table, scope by scope in table order.
    trace.correspondence = Some(compute_cell_correspondence(&d.cells[0]));
    Ok((q, trace))
}

/// Translate every union cell; the diagram's semantics is the union of the
/// cell answers over identical output schemas.
pub fn union_to_trc(d: &Diagram, schema: &Schema) -> Result<Vec<TrcQuery>> {
    let report = crate::diagram::validate(d, schema);
    if !report.ok() {
        return Err(Error::InvalidDiagram(report.violations[0].message.clone()));
    }
    d.cells
        .iter()
        .map(|cell| {
            let mut trace = TranslationTrace::new(Dialect::Diagram, Dialect::Trc);
            cell_to_trc(cell, schema, &mut trace)
        })
        .collect()
}

fn cell_to_trc(
    cell: &UnionCell,
    schema: &Schema,
    trace: &mut TranslationTrace,
) -> Result<TrcQuery> {
    let root = cell
        .root_id()
        .ok_or_else(|| Error::InvalidDiagram("no root partition".into()))?
        .to_string();
    trace.push("determined the nested scopes of negation", vec![root.clone()]);

    // Step 2: one existentially-quantified tuple variable per table, named
    // after the relation and numbered on repetition.
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &cell.tables {
        *counts.entry(t.rel.as_str()).or_insert(0) += 1;
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut var_of: BTreeMap<&str, String> = BTreeMap::new();
    for t in &cell.tables {
        let n = seen.entry(t.rel.as_str()).or_insert(0);
        *n += 1;
        let base = t.rel.to_lowercase();
        let var = if counts[t.rel.as_str()] > 1 && *n > 1 {
            format!("{base}{n}")
        } else {
            base
        };
        var_of.insert(t.id.as_str(), var);
    }
    trace.push(
        "quantified one tuple variable per table",
        cell.tables.iter().map(|t| var_of[t.id.as_str()].clone()).collect(),
    );

    // Partition -> scope skeletons.
    let mut scopes: BTreeMap<&str, ScopeTree> = BTreeMap::new();
    for p in &cell.partitions {
        scopes.insert(
            p.id.as_str(),
            ScopeTree {
                quantifiers: Vec::new(),
                predicates: Vec::new(),
                children: Vec::new(),
            },
        );
    }
    for t in &cell.tables {
        scopes
            .get_mut(t.partition.as_str())
            .expect("validated partition")
            .quantifiers
            .push(Quantifier::new(&var_of[t.id.as_str()], &t.rel));
    }

    // Step 3: selection cells become selection predicates in the table's
    // own scope.
    let mut selections = 0;
    for t in &cell.tables {
        for c in &t.cells {
            if let Some(sel) = &c.sel {
                scopes
                    .get_mut(t.partition.as_str())
                    .unwrap()
                    .predicates
                    .push(Predicate {
                        left: Operand::Attr(AttrRef::new(&var_of[t.id.as_str()], &c.attr)),
                        op: sel.op,
                        right: Operand::Const(sel.value.clone()),
                        span: Default::default(),
                    });
                selections += 1;
            }
        }
    }
    trace.push(format!("placed {selections} selection predicates"), vec![]);

    // Step 4: join edges become predicates in the deeper endpoint's scope.
    let depth: BTreeMap<&str, usize> = {
        let parent: BTreeMap<&str, Option<&str>> = cell
            .partitions
            .iter()
            .map(|p| (p.id.as_str(), p.parent.as_deref()))
            .collect();
        cell.partitions
            .iter()
            .map(|p| {
                let mut d = 0;
                let mut cur = p.id.as_str();
                while let Some(Some(up)) = parent.get(cur) {
                    d += 1;
                    cur = up;
                }
                (p.id.as_str(), d)
            })
            .collect()
    };
    for e in &cell.edges {
        let from_t = cell.table(&e.from.0).expect("validated");
        let to_t = cell.table(&e.to.0).expect("validated");
        let pred = Predicate {
            left: Operand::Attr(AttrRef::new(
                &var_of[from_t.id.as_str()],
                &from_t.cells[e.from.1].attr,
            )),
            op: e.op,
            right: Operand::Attr(AttrRef::new(
                &var_of[to_t.id.as_str()],
                &to_t.cells[e.to.1].attr,
            )),
            span: Default::default(),
        };
        let target = if depth[from_t.partition.as_str()] >= depth[to_t.partition.as_str()] {
            from_t.partition.as_str()
        } else {
            to_t.partition.as_str()
        };
        scopes.get_mut(target).unwrap().predicates.push(pred);
    }
    trace.push(
        format!("placed {} join predicates in their guarding scopes", cell.edges.len()),
        vec![],
    );

    // Assemble the scope tree bottom-up: deepest partitions first so every
    // child is complete before it moves into its parent. Siblings keep
    // their list order.
    let mut order: Vec<&crate::diagram::Partition> = cell.partitions.iter().collect();
    order.sort_by_key(|p| std::cmp::Reverse(depth[p.id.as_str()]));
    for p in order {
        if let Some(parent) = &p.parent {
            let child = scopes.remove(p.id.as_str()).unwrap();
            let siblings_before = cell
                .partitions
                .iter()
                .take_while(|s| s.id != p.id)
                .filter(|s| s.parent.as_deref() == Some(parent.as_str()))
                .count();
            let target = scopes.get_mut(parent.as_str()).expect("validated parent");
            let at = siblings_before.min(target.children.len());
            target.children.insert(at, child);
        }
    }
    let tree = scopes.remove(root.as_str()).expect("root scope");

    // Step 5: output table.
    let output = match &cell.output {
        None => {
            trace.push("Boolean sentence: no output table", vec![]);
            None
        }
        Some(out) => {
            let attrs = out
                .attrs
                .iter()
                .map(|a| {
                    let t = cell.table(&a.link.0).expect("validated");
                    OutputAttr {
                        name: a.name.clone(),
                        source: Some(AttrRef::new(
                            &var_of[t.id.as_str()],
                            &t.cells[a.link.1].attr,
                        )),
                    }
                })
                .collect();
            trace.push("read off the output table linkage", vec![]);
            Some(TrcOutput {
                name: out.name.clone(),
                attrs,
            })
        }
    };

    let q = TrcQuery {
        output,
        body: tree.to_formula(),
    };
    crate::ast::fragment::validate_trc(&q, schema)?;
    Ok(q)
}

/// Diagram signature order is the table list; the produced query quantifies
/// scope by scope in partition-tree pre-order, tables of one scope in list
/// order.
fn compute_cell_correspondence(cell: &UnionCell) -> Vec<usize> {
    let mut quantifier_order: Vec<usize> = Vec::new();
    fn visit(cell: &UnionCell, pid: &str, out: &mut Vec<usize>) {
        for (i, t) in cell.tables.iter().enumerate() {
            if t.partition == pid {
                out.push(i);
            }
        }
        for p in &cell.partitions {
            if p.parent.as_deref() == Some(pid) {
                visit(cell, &p.id, out);
            }
        }
    }
    if let Some(root) = cell.root_id() {
        visit(cell, root, &mut quantifier_order);
    }
    let mut corr = vec![0; quantifier_order.len()];
    for (target_pos, source_index) in quantifier_order.iter().enumerate() {
        corr[*source_index] = target_pos;
    }
    corr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Sort;
    use crate::parse::{parse_trc, print_trc};

    fn schema_rs() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    #[test]
    fn identity_query_becomes_one_table() {
        let q = parse_trc("{ q(A, B) | exists r in R [q.A = r.A and q.B = r.B] }").unwrap();
        let (d, trace) = trc_to_diagram(&q, &schema_rs()).unwrap();
        let cell = &d.cells[0];
        assert_eq!(cell.partitions.len(), 1);
        assert_eq!(cell.tables.len(), 1);
        assert!(cell.output.is_some());
        assert_eq!(trace.correspondence, Some(vec![0]));
    }

    #[test]
    fn division_round_trips() {
        let text = "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [not (exists r2 in R [r2.B = s.B and r2.A = r.A])])] }";
        let q = parse_trc(text).unwrap();
        let (d, _) = trc_to_diagram(&q, &schema_rs()).unwrap();
        let cell = &d.cells[0];
        assert_eq!(cell.partitions.len(), 3);
        assert_eq!(cell.tables.len(), 3);
        let (q2, _) = diagram_to_trc(&d, &schema_rs()).unwrap();
        // Same scope structure and signature after the round trip.
        let sig1: Vec<String> = q.quantifiers().iter().map(|x| x.rel.clone()).collect();
        let sig2: Vec<String> = q2.quantifiers().iter().map(|x| x.rel.clone()).collect();
        assert_eq!(sig1, sig2);
        let printed = print_trc(&q2);
        assert!(printed.contains("not (exists"), "{printed}");
    }

    #[test]
    fn double_negation_keeps_empty_partition() {
        let q = parse_trc("exists r in R [not (not (exists s in S [s.B = r.B]))]").unwrap();
        let (d, _) = trc_to_diagram(&q, &schema_rs()).unwrap();
        let cell = &d.cells[0];
        assert_eq!(cell.partitions.len(), 3);
        // The middle partition holds no tables.
        let empty = cell
            .partitions
            .iter()
            .filter(|p| cell.tables.iter().all(|t| t.partition != p.id))
            .count();
        assert_eq!(empty, 1);
        let (q2, _) = diagram_to_trc(&d, &schema_rs()).unwrap();
        let printed = print_trc(&q2);
        assert!(printed.contains("not (not ("), "{printed}");
    }

    #[test]
    fn selection_and_join_cells_follow_the_k_plus_one_rule() {
        let q = parse_trc(
            "{ q(C) | exists r in R, r2 in R [q.C = r2.B and r.A = r2.A and r2.B > 1 and r2.B < 3] }",
        )
        .unwrap();
        let (d, _) = trc_to_diagram(&q, &schema_rs()).unwrap();
        let cell = &d.cells[0];
        let t1 = &cell.tables[1];
        // B appears twice with selections plus once selection-free (output
        // link + join endpoint share the free cell).
        let b_cells: Vec<_> = t1.cells.iter().filter(|c| c.attr == "B").collect();
        assert_eq!(b_cells.len(), 3);
        assert_eq!(b_cells.iter().filter(|c| c.sel.is_some()).count(), 2);
    }

    #[test]
    fn boolean_sentence_has_no_output() {
        let q = parse_trc(
            "not (exists r in R [not (exists s in S [s.B = r.B])])",
        )
        .unwrap();
        let (d, _) = trc_to_diagram(&q, &schema_rs()).unwrap();
        assert!(d.cells[0].output.is_none());
        assert!(d.is_boolean());
        let (q2, _) = diagram_to_trc(&d, &schema_rs()).unwrap();
        assert!(q2.is_boolean());
    }
}
