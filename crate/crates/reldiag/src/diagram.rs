//! The diagram intermediate representation: nested canvas partitions, table
//! nodes with attribute cells, join edges, output tables, and union cells.
//!
//! Geometry is deliberately absent from the IR; layout lives in
//! [`crate::render`]. Serialization is a versioned JSON document.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::CompOp;
use crate::catalog::{Schema, Value};
use crate::{Error, Result};

/// A node of the canvas-partition tree. Every non-root partition denotes one
/// negation; nesting depth encodes the negation hierarchy. Double negations
/// are preserved as empty intermediate partitions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

/// One attribute row of a table node. An attribute with k selection
/// predicates appears in k cells; a joining attribute gets one extra
/// selection-free cell holding the edge endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeCell {
    pub attr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sel: Option<Selection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub op: CompOp,
    pub value: Value,
}

/// A table box placed in exactly one canvas partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableNode {
    pub id: String,
    pub rel: String,
    pub partition: String,
    pub cells: Vec<AttributeCell>,
}

/// An endpoint is a table id plus a cell index within that table.
pub type Endpoint = (String, usize);

/// A join predicate drawn as a line. The operator reads from -> to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinEdge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub op: CompOp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputAttrNode {
    pub name: String,
    pub link: Endpoint,
}

/// The output table of a non-Boolean cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputNode {
    pub name: String,
    pub attrs: Vec<OutputAttrNode>,
}

/// One union cell: a complete single-query diagram.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnionCell {
    pub partitions: Vec<Partition>,
    pub tables: Vec<TableNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<JoinEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputNode>,
}

impl UnionCell {
    pub fn root_id(&self) -> Option<&str> {
        self.partitions
            .iter()
            .find(|p| p.parent.is_none())
            .map(|p| p.id.as_str())
    }

    pub fn table(&self, id: &str) -> Option<&TableNode> {
        self.tables.iter().find(|t| t.id == id)
    }
}

/// A complete diagram: one cell for a plain query, several for a union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagram {
    pub v: u32,
    #[serde(rename = "schema-ref", default, skip_serializing_if = "Option::is_none")]
    pub schema_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub cells: Vec<UnionCell>,
}

impl Diagram {
    pub fn single(cell: UnionCell) -> Diagram {
        let output = cell.output.as_ref().map(|o| o.name.clone());
        Diagram {
            v: 1,
            schema_ref: None,
            output,
            cells: vec![cell],
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.output.is_none()
    }
}

/// Parse the versioned JSON document format.
pub fn from_json(text: &str) -> Result<Diagram> {
    let d: Diagram = serde_json::from_str(text)
        .map_err(|e| Error::InvalidDiagram(format!("cannot decode diagram JSON: {e}")))?;
    if d.v != 1 {
        return Err(Error::InvalidDiagram(format!(
            "unsupported diagram format version {}",
            d.v
        )));
    }
    Ok(d)
}

/// Serialize with sorted keys so identical diagrams produce identical bytes.
pub fn to_json(d: &Diagram) -> String {
    let value = serde_json::to_value(d).expect("diagram serialization cannot fail");
    serde_json::to_string_pretty(&value).expect("JSON printing cannot fail")
}

/// One violated validity condition.
#[derive(Clone, Debug, Serialize)]
pub struct ValidityViolation {
    /// Condition number (1-5 for single cells, 6 for union cells).
    pub condition: u32,
    pub message: String,
    /// Ids of the offending elements.
    pub elements: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidityReport {
    pub violations: Vec<ValidityViolation>,
}

impl ValidityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, condition: u32, message: String, elements: Vec<String>) {
        self.violations.push(ValidityViolation {
            condition,
            message,
            elements,
        });
    }
}

/// Check the validity conditions:
/// 1. the negation boxes partition the canvas (they form a tree);
/// 2. every table resides in exactly one partition;
/// 3. every leaf partition contains at least one table;
/// 4. joins only connect attributes in the same partition or along an
///    ancestor/descendant chain;
/// 5. each output attribute links to exactly one attribute of a table in
///    the root partition;
/// 6. the output tables of multiple union cells have the same name and the
///    same attribute set.
pub fn validate(d: &Diagram, schema: &Schema) -> ValidityReport {
    let mut report = ValidityReport::default();
    if d.cells.is_empty() {
        report.push(1, "diagram has no cells".into(), vec![]);
        return report;
    }
    for (i, cell) in d.cells.iter().enumerate() {
        validate_cell(cell, schema, i, &mut report);
    }

    // Condition 6 (union cells).
    let mut outputs: Vec<(usize, &OutputNode)> = Vec::new();
    for (i, cell) in d.cells.iter().enumerate() {
        if let Some(o) = &cell.output {
            outputs.push((i, o));
        }
    }
    if d.cells.len() > 1 && outputs.len() != d.cells.len() {
        report.push(
            6,
            "every union cell must have an output table".into(),
            vec![],
        );
    }
    if let Some((_, first)) = outputs.first() {
        let name = &first.name;
        let attr_set: BTreeSet<&str> = first.attrs.iter().map(|a| a.name.as_str()).collect();
        for (i, o) in &outputs[1..] {
            let other: BTreeSet<&str> = o.attrs.iter().map(|a| a.name.as_str()).collect();
            if o.name != *name || other != attr_set {
                report.push(
                    6,
                    format!("output table of cell {i} differs in name or attribute set"),
                    vec![o.name.clone()],
                );
            }
        }
        if let Some(top) = &d.output {
            if top != name {
                report.push(
                    6,
                    format!(
                        "diagram output name {top} does not match cell output {name}"
                    ),
                    vec![],
                );
            }
        }
    }
    report
}

fn validate_cell(cell: &UnionCell, schema: &Schema, index: usize, report: &mut ValidityReport) {
    let cell_tag = format!("cell {index}");

    // Condition 1: partitions form a tree.
    let mut ids = BTreeSet::new();
    for p in &cell.partitions {
        if !ids.insert(p.id.as_str()) {
            report.push(
                1,
                format!("{cell_tag}: duplicate partition id {}", p.id),
                vec![p.id.clone()],
            );
        }
    }
    let roots: Vec<&Partition> = cell.partitions.iter().filter(|p| p.parent.is_none()).collect();
    if roots.len() != 1 {
        report.push(
            1,
            format!("{cell_tag}: expected exactly one root partition, found {}", roots.len()),
            roots.iter().map(|p| p.id.clone()).collect(),
        );
        return;
    }
    let mut parent: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for p in &cell.partitions {
        parent.insert(p.id.as_str(), p.parent.as_deref());
    }
    for p in &cell.partitions {
        if let Some(par) = &p.parent {
            if !parent.contains_key(par.as_str()) {
                report.push(
                    1,
                    format!("{cell_tag}: partition {} has unknown parent {par}", p.id),
                    vec![p.id.clone()],
                );
            }
        }
        // Cycle check: walk up with a step bound.
        let mut cur = p.id.as_str();
        for step in 0..=cell.partitions.len() {
            match parent.get(cur).copied().flatten() {
                Some(up) => {
                    if step == cell.partitions.len() {
                        report.push(
                            1,
                            format!("{cell_tag}: partition {} sits in a parent cycle", p.id),
                            vec![p.id.clone()],
                        );
                        return;
                    }
                    cur = up;
                }
                None => break,
            }
        }
    }

    // Condition 2: tables are discernible and live in one existing partition.
    let mut table_ids = BTreeSet::new();
    for t in &cell.tables {
        if !table_ids.insert(t.id.as_str()) {
            report.push(
                2,
                format!("{cell_tag}: table id {} appears more than once", t.id),
                vec![t.id.clone()],
            );
        }
        if !parent.contains_key(t.partition.as_str()) {
            report.push(
                2,
                format!("{cell_tag}: table {} sits in unknown partition {}", t.id, t.partition),
                vec![t.id.clone(), t.partition.clone()],
            );
        }
        match schema.relation(&t.rel) {
            None => report.push(
                2,
                format!("{cell_tag}: table {} references unknown relation {}", t.id, t.rel),
                vec![t.id.clone()],
            ),
            Some(decl) => {
                for c in &t.cells {
                    if decl.attr_index(&c.attr).is_none() {
                        report.push(
                            2,
                            format!(
                                "{cell_tag}: relation {} has no attribute {}",
                                t.rel, c.attr
                            ),
                            vec![t.id.clone()],
                        );
                    } else if let Some(sel) = &c.sel {
                        let sort = decl.attrs[decl.attr_index(&c.attr).unwrap()].sort;
                        if sel.value.sort() != sort {
                            report.push(
                                2,
                                format!(
                                    "{cell_tag}: selection on {}.{} compares {} with {}",
                                    t.rel,
                                    c.attr,
                                    sort,
                                    sel.value.sort()
                                ),
                                vec![t.id.clone()],
                            );
                        }
                    }
                }
            }
        }
    }

    // Condition 3: every leaf partition holds a table.
    let mut has_child: BTreeSet<&str> = BTreeSet::new();
    for p in &cell.partitions {
        if let Some(par) = &p.parent {
            has_child.insert(par.as_str());
        }
    }
    let mut populated: BTreeSet<&str> = BTreeSet::new();
    for t in &cell.tables {
        populated.insert(t.partition.as_str());
    }
    for p in &cell.partitions {
        if !has_child.contains(p.id.as_str()) && !populated.contains(p.id.as_str()) {
            report.push(
                3,
                format!("{cell_tag}: leaf partition {} contains no table", p.id),
                vec![p.id.clone()],
            );
        }
    }

    // Condition 4: edges stay on ancestor/descendant chains.
    let depth_chain = |start: &str| -> Vec<String> {
        let mut chain = vec![start.to_string()];
        let mut cur = start;
        while let Some(Some(up)) = parent.get(cur) {
            chain.push(up.to_string());
            cur = up;
        }
        chain
    };
    for (i, e) in cell.edges.iter().enumerate() {
        let resolve = |ep: &Endpoint| -> Option<&TableNode> {
            cell.table(&ep.0).filter(|t| ep.1 < t.cells.len())
        };
        let (from, to) = (resolve(&e.from), resolve(&e.to));
        match (from, to) {
            (Some(ft), Some(tt)) => {
                let fchain = depth_chain(&ft.partition);
                let tchain = depth_chain(&tt.partition);
                let related = fchain.contains(&tt.partition) || tchain.contains(&ft.partition);
                if !related {
                    report.push(
                        4,
                        format!(
                            "{cell_tag}: edge {i} joins sibling partitions {} and {}",
                            ft.partition, tt.partition
                        ),
                        vec![ft.id.clone(), tt.id.clone()],
                    );
                }
            }
            _ => report.push(
                4,
                format!("{cell_tag}: edge {i} has a dangling endpoint"),
                vec![e.from.0.clone(), e.to.0.clone()],
            ),
        }
    }

    // Condition 5: output links point at root-partition attributes.
    if let Some(out) = &cell.output {
        let root = roots[0].id.as_str();
        if out.attrs.is_empty() {
            report.push(
                5,
                format!("{cell_tag}: output table {} has no attributes", out.name),
                vec![out.name.clone()],
            );
        }
        for a in &out.attrs {
            match cell.table(&a.link.0) {
                Some(t) if a.link.1 < t.cells.len() => {
                    if t.partition != root {
                        report.push(
                            5,
                            format!(
                                "{cell_tag}: output attribute {} links into partition {}, not the root",
                                a.name, t.partition
                            ),
                            vec![t.id.clone()],
                        );
                    }
                }
                _ => report.push(
                    5,
                    format!("{cell_tag}: output attribute {} has a dangling link", a.name),
                    vec![a.link.0.clone()],
                ),
            }
        }
    }
}

/// Canonicalize the non-semantic freedoms: flip asymmetric edges so the
/// operator is one of `<`, `<=`, `!=`, `=`, and order edges and output
/// attributes deterministically. Idempotent; validity-preserving.
pub fn normalize(d: &Diagram, schema: &Schema) -> Result<Diagram> {
    let report = validate(d, schema);
    if !report.ok() {
        return Err(Error::InvalidDiagram(format!(
            "cannot normalize an invalid diagram: {}",
            report.violations[0].message
        )));
    }
    let mut d = d.clone();
    for cell in &mut d.cells {
        for e in &mut cell.edges {
            if matches!(e.op, CompOp::Gt | CompOp::Ge) {
                std::mem::swap(&mut e.from, &mut e.to);
                e.op = e.op.flip();
            }
        }
        cell.edges.sort_by(|a, b| {
            (&a.from.0, a.from.1, &a.to.0, a.to.1, a.op).cmp(&(&b.from.0, b.from.1, &b.to.0, b.to.1, b.op))
        });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Sort;

    fn schema() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    fn minimal_cell() -> UnionCell {
        UnionCell {
            partitions: vec![Partition { id: "q0".into(), parent: None }],
            tables: vec![TableNode {
                id: "t0".into(),
                rel: "R".into(),
                partition: "q0".into(),
                cells: vec![AttributeCell { attr: "A".into(), sel: None }],
            }],
            edges: vec![],
            output: Some(OutputNode {
                name: "Q".into(),
                attrs: vec![OutputAttrNode { name: "A".into(), link: ("t0".into(), 0) }],
            }),
        }
    }

    #[test]
    fn minimal_diagram_is_valid() {
        let d = Diagram::single(minimal_cell());
        assert!(validate(&d, &schema()).ok());
    }

    #[test]
    fn empty_canvas_violates_condition_3() {
        let d = Diagram {
            v: 1,
            schema_ref: None,
            output: None,
            cells: vec![UnionCell {
                partitions: vec![Partition { id: "q0".into(), parent: None }],
                tables: vec![],
                edges: vec![],
                output: None,
            }],
        };
        let report = validate(&d, &schema());
        assert!(report.violations.iter().any(|v| v.condition == 3));
    }

    #[test]
    fn sibling_join_violates_condition_4() {
        let mut cell = minimal_cell();
        cell.partitions.push(Partition { id: "q1".into(), parent: Some("q0".into()) });
        cell.partitions.push(Partition { id: "q2".into(), parent: Some("q0".into()) });
        cell.tables.push(TableNode {
            id: "t1".into(),
            rel: "R".into(),
            partition: "q1".into(),
            cells: vec![AttributeCell { attr: "B".into(), sel: None }],
        });
        cell.tables.push(TableNode {
            id: "t2".into(),
            rel: "S".into(),
            partition: "q2".into(),
            cells: vec![AttributeCell { attr: "B".into(), sel: None }],
        });
        cell.edges.push(JoinEdge { from: ("t1".into(), 0), to: ("t2".into(), 0), op: CompOp::Eq });
        let d = Diagram::single(cell);
        let report = validate(&d, &schema());
        assert!(report.violations.iter().any(|v| v.condition == 4));
    }

    #[test]
    fn normalize_flips_descending_operators() {
        let mut cell = minimal_cell();
        cell.tables.push(TableNode {
            id: "t1".into(),
            rel: "S".into(),
            partition: "q0".into(),
            cells: vec![AttributeCell { attr: "B".into(), sel: None }],
        });
        cell.edges.push(JoinEdge { from: ("t0".into(), 0), to: ("t1".into(), 0), op: CompOp::Gt });
        let d = Diagram::single(cell);
        let n = normalize(&d, &schema()).unwrap();
        let e = &n.cells[0].edges[0];
        assert_eq!(e.op, CompOp::Lt);
        assert_eq!(e.from.0, "t1");
        // Idempotent down to bytes.
        let again = normalize(&n, &schema()).unwrap();
        assert_eq!(to_json(&n), to_json(&again));
    }

    #[test]
    fn json_round_trip() {
        let d = Diagram::single(minimal_cell());
        let text = to_json(&d);
        let back = from_json(&text).unwrap();
        assert_eq!(d, back);
    }
}
