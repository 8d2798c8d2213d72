//! Translations between Datalog programs and calculus queries.
//!
//! Datalog to calculus inlines the rule hierarchy into nested negation
//! scopes: positive atoms quantify tables, shared variables become equality
//! predicates, negated atoms open child scopes. The reverse direction emits
//! one rule per negation scope, inside out. A nested scope whose parameter
//! is passed straight through to a deeper scope or only reaches local
//! tables through a built-in is unsafe as a rule; the repair quantifies an
//! extra copy of the outer table that carries the parameter, which costs
//! the pattern (the trace then drops its correspondence).

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::datalog::{Atom, Comparison, DatalogProgram, Literal, Rule, Term};
use crate::ast::trc::{
    AttrRef, Operand, OutputAttr, Predicate, Quantifier, ScopeTree, TrcOutput, TrcQuery,
};
use crate::ast::CompOp;
use crate::catalog::Schema;
use crate::translate::TranslationTrace;
use crate::{Dialect, Error, Query, Result};

// ---------------------------------------------------------------------------
// Datalog -> TRC (pattern-preserving)

pub fn datalog_to_trc(p: &DatalogProgram, schema: &Schema) -> Result<(TrcQuery, TranslationTrace)> {
    let report = crate::ast::fragment::classify(&Query::Datalog(p.clone()), schema);
    if !report.ok() {
        return Err(Error::Fragment(report.violations[0].message.clone()));
    }
    let query_rule = p
        .query_rule()
        .ok_or_else(|| Error::Translate("empty program".into()))?;
    for r in &p.rules {
        for lit in &r.body {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if a.pred == query_rule.head.pred {
                    return Err(Error::Translate(
                        "the query predicate may not occur in a body".into(),
                    ));
                }
            }
        }
    }
    let mut trace = TranslationTrace::new(Dialect::Datalog, Dialect::Trc);

    // Signature indices in program order.
    let idbs = p.idb_names();
    let mut sig_index = BTreeMap::new();
    let mut counter = 0usize;
    for (ri, rule) in p.rules.iter().enumerate() {
        for (li, lit) in rule.body.iter().enumerate() {
            if let Literal::Pos(a) | Literal::Neg(a) = lit {
                if !idbs.contains(&a.pred) {
                    sig_index.insert((ri, li), counter);
                    counter += 1;
                }
            }
        }
    }

    let mut ctx = DlCtx {
        program: p,
        schema,
        idbs: &idbs,
        sig_index: &sig_index,
        used_vars: BTreeSet::new(),
        prov_of_var: BTreeMap::new(),
        inlined_rules: 0,
    };
    let rule_index = p.rules.len() - 1;
    let (scope, head_vals) = ctx.build_scope(rule_index, &BTreeMap::new())?;
    trace.push(
        format!(
            "inlined {} intermediate predicates into nested negation scopes",
            ctx.inlined_rules
        ),
        vec![],
    );

    let output = if query_rule.head.args.is_empty() {
        None
    } else {
        let mut used_names = BTreeSet::new();
        let attrs = query_rule
            .head
            .args
            .iter()
            .zip(&head_vals)
            .map(|(term, val)| {
                let source = match val {
                    Operand::Attr(a) => a.clone(),
                    Operand::Const(_) => {
                        return Err(Error::Translate(
                            "constant head arguments are not supported".into(),
                        ))
                    }
                };
                let base = match term {
                    Term::Var(_) => source.attr.clone(),
                    Term::Const(_) => {
                        return Err(Error::Translate(
                            "constant head arguments are not supported".into(),
                        ))
                    }
                };
                let mut name = base.clone();
                let mut i = 1;
                while used_names.contains(&name) {
                    i += 1;
                    name = format!("{base}{i}");
                }
                used_names.insert(name.clone());
                Ok(OutputAttr {
                    name,
                    source: Some(source),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(TrcOutput {
            name: ctx.fresh_var("q"),
            attrs,
        })
    };
    trace.push("linked the head variables to the output table", vec![]);

    let q = TrcQuery {
        output,
        body: scope.to_formula(),
    };
    crate::ast::fragment::validate_trc(&q, schema)?;

    // Correspondence: program-order signature index -> quantifier position.
    let mut corr = vec![usize::MAX; counter];
    for (pos, quant) in q.quantifiers().iter().enumerate() {
        if let Some(idx) = ctx.prov_of_var.get(&quant.var) {
            corr[*idx] = pos;
        }
    }
    trace.correspondence = if corr.iter().all(|&i| i != usize::MAX) {
        Some(corr)
    } else {
        None
    };
    Ok((q, trace))
}

struct DlCtx<'a> {
    program: &'a DatalogProgram,
    schema: &'a Schema,
    idbs: &'a BTreeSet<String>,
    sig_index: &'a BTreeMap<(usize, usize), usize>,
    used_vars: BTreeSet<String>,
    /// Tuple variable -> signature index of the atom it came from.
    prov_of_var: BTreeMap<String, usize>,
    inlined_rules: usize,
}

impl<'a> DlCtx<'a> {
    fn fresh_var(&mut self, base: &str) -> String {
        let base: String = base
            .chars()
            .next()
            .map(|c| c.to_lowercase().to_string())
            .unwrap_or_else(|| "v".into());
        let mut candidate = base.clone();
        let mut i = 1;
        while self.used_vars.contains(&candidate) {
            i += 1;
            candidate = format!("{base}{i}");
        }
        self.used_vars.insert(candidate.clone());
        candidate
    }

    /// Translate one rule into a scope. `params` binds the rule's head
    /// variables to operands of the caller. Returns the scope and the
    /// operand each head argument denotes.
    fn build_scope(
        &mut self,
        rule_index: usize,
        params: &BTreeMap<String, Operand>,
    ) -> Result<(ScopeTree, Vec<Operand>)> {
        let rule = &self.program.rules[rule_index];
        let mut binding: BTreeMap<String, Operand> = params.clone();
        let mut scope = ScopeTree {
            quantifiers: Vec::new(),
            predicates: Vec::new(),
            children: Vec::new(),
        };

        // Positive atoms first: they bind variables.
        for (li, lit) in rule.body.iter().enumerate() {
            let Literal::Pos(atom) = lit else { continue };
            if self.idbs.contains(&atom.pred) {
                self.inline_positive_idb(atom, &mut binding, &mut scope)?;
            } else {
                let decl = self
                    .schema
                    .relation(&atom.pred)
                    .ok_or_else(|| Error::Schema(format!("unknown relation {}", atom.pred)))?
                    .clone();
                let var = self.fresh_var(&atom.pred);
                if let Some(idx) = self.sig_index.get(&(rule_index, li)) {
                    self.prov_of_var.insert(var.clone(), *idx);
                }
                scope.quantifiers.push(Quantifier::new(&var, &atom.pred));
                for (term, attr) in atom.args.iter().zip(&decl.attrs) {
                    let here = AttrRef::new(&var, &attr.name);
                    self.bind_term(term, here, &mut binding, &mut scope.predicates);
                }
            }
        }
        // Built-in comparisons.
        for cmp in rule.comparisons() {
            scope.predicates.push(self.comparison_pred(cmp, &binding)?);
        }
        // Negated atoms open child scopes.
        for (li, lit) in rule.body.iter().enumerate() {
            let Literal::Neg(atom) = lit else { continue };
            if self.idbs.contains(&atom.pred) {
                let callee_index = self
                    .program
                    .rules
                    .iter()
                    .position(|r| r.head.pred == atom.pred)
                    .expect("classified program");
                let callee = &self.program.rules[callee_index];
                let mut callee_params = BTreeMap::new();
                for (term, head_term) in atom.args.iter().zip(&callee.head.args) {
                    let value = self.operand_of(term, &binding)?;
                    if let Term::Var(hv) = head_term {
                        callee_params.insert(hv.clone(), value);
                    }
                }
                self.inlined_rules += 1;
                let (child, _) = self.build_scope(callee_index, &callee_params)?;
                scope.children.push(child);
            } else {
                let decl = self
                    .schema
                    .relation(&atom.pred)
                    .ok_or_else(|| Error::Schema(format!("unknown relation {}", atom.pred)))?
                    .clone();
                let var = self.fresh_var(&atom.pred);
                if let Some(idx) = self.sig_index.get(&(rule_index, li)) {
                    self.prov_of_var.insert(var.clone(), *idx);
                }
                let mut child = ScopeTree {
                    quantifiers: vec![Quantifier::new(&var, &atom.pred)],
                    predicates: Vec::new(),
                    children: Vec::new(),
                };
                for (term, attr) in atom.args.iter().zip(&decl.attrs) {
                    let here = AttrRef::new(&var, &attr.name);
                    match term {
                        Term::Const(c) => child.predicates.push(Predicate {
                            left: Operand::Attr(here),
                            op: CompOp::Eq,
                            right: Operand::Const(c.clone()),
                            span: Default::default(),
                        }),
                        Term::Var(v) => match binding.get(v) {
                            Some(outer) => child.predicates.push(Predicate {
                                left: Operand::Attr(here),
                                op: CompOp::Eq,
                                right: outer.clone(),
                                span: Default::default(),
                            }),
                            // An anonymous variable in a negated atom adds
                            // no predicate.
                            None => {}
                        },
                    }
                }
                scope.children.push(child);
            }
        }

        let head_vals = rule
            .head
            .args
            .iter()
            .map(|t| self.operand_of(t, &binding))
            .collect::<Result<Vec<_>>>()?;
        Ok((scope, head_vals))
    }

    fn inline_positive_idb(
        &mut self,
        atom: &Atom,
        binding: &mut BTreeMap<String, Operand>,
        scope: &mut ScopeTree,
    ) -> Result<()> {
        let callee_index = self
            .program
            .rules
            .iter()
            .position(|r| r.head.pred == atom.pred)
            .expect("classified program");
        self.inlined_rules += 1;
        let (inner, head_vals) = self.build_scope(callee_index, &BTreeMap::new())?;
        scope.quantifiers.extend(inner.quantifiers);
        scope.predicates.extend(inner.predicates);
        scope.children.extend(inner.children);
        for (term, val) in atom.args.iter().zip(head_vals) {
            match (term, val) {
                (Term::Var(v), val) => match binding.get(v) {
                    Some(bound) => scope.predicates.push(equality(bound.clone(), val)?),
                    None => {
                        binding.insert(v.clone(), val);
                    }
                },
                (Term::Const(c), val) => {
                    scope
                        .predicates
                        .push(equality(val, Operand::Const(c.clone()))?)
                }
            }
        }
        Ok(())
    }

    fn bind_term(
        &mut self,
        term: &Term,
        here: AttrRef,
        binding: &mut BTreeMap<String, Operand>,
        preds: &mut Vec<Predicate>,
    ) {
        match term {
            Term::Const(c) => preds.push(Predicate {
                left: Operand::Attr(here),
                op: CompOp::Eq,
                right: Operand::Const(c.clone()),
                span: Default::default(),
            }),
            Term::Var(v) => match binding.get(v) {
                Some(bound) => preds.push(Predicate {
                    left: Operand::Attr(here),
                    op: CompOp::Eq,
                    right: bound.clone(),
                    span: Default::default(),
                }),
                None => {
                    binding.insert(v.clone(), Operand::Attr(here));
                }
            },
        }
    }

    fn comparison_pred(
        &self,
        cmp: &Comparison,
        binding: &BTreeMap<String, Operand>,
    ) -> Result<Predicate> {
        let left = self.operand_of(&cmp.left, binding)?;
        let right = self.operand_of(&cmp.right, binding)?;
        // Keep an attribute on the left when possible.
        let (left, op, right) = match (&left, &right) {
            (Operand::Const(_), Operand::Attr(_)) => (right, cmp.op.flip(), left),
            _ => (left, cmp.op, right),
        };
        Ok(Predicate {
            left,
            op,
            right,
            span: Default::default(),
        })
    }

    fn operand_of(&self, t: &Term, binding: &BTreeMap<String, Operand>) -> Result<Operand> {
        match t {
            Term::Const(c) => Ok(Operand::Const(c.clone())),
            Term::Var(v) => binding
                .get(v)
                .cloned()
                .ok_or_else(|| Error::Translate(format!("variable {v} is not bound"))),
        }
    }
}

fn equality(a: Operand, b: Operand) -> Result<Predicate> {
    if matches!((&a, &b), (Operand::Const(_), Operand::Const(_))) {
        return Err(Error::Translate(
            "constant-to-constant linkage is unguarded".into(),
        ));
    }
    // Attribute on the left.
    let (left, right) = match (&a, &b) {
        (Operand::Const(_), Operand::Attr(_)) => (b, a),
        _ => (a, b),
    };
    Ok(Predicate {
        left,
        op: CompOp::Eq,
        right,
        span: Default::default(),
    })
}

// ---------------------------------------------------------------------------
// TRC -> Datalog (pattern-preserving unless the safety repair fires)

pub fn trc_to_datalog(q: &TrcQuery, schema: &Schema) -> Result<(DatalogProgram, TranslationTrace)> {
    let mut trace = TranslationTrace::new(Dialect::Trc, Dialect::Datalog);
    let canonical = crate::ast::fragment::canonicalize_trc(q)?;
    let report = crate::ast::fragment::classify(&Query::Trc(canonical.clone()), schema);
    if !report.ok() {
        return Err(Error::Fragment(report.violations[0].message.clone()));
    }
    let scope = ScopeTree::from_query(&canonical)?;

    // Map each tuple variable to its relation and its signature position.
    let var_rel: BTreeMap<String, String> =
        crate::ast::fragment::validate_trc(&canonical, schema)?;
    let var_sig: BTreeMap<String, usize> = canonical
        .quantifiers()
        .iter()
        .enumerate()
        .map(|(i, q)| (q.var.clone(), i))
        .collect();

    let mut builder = RuleBuilder {
        schema,
        var_rel: &var_rel,
        var_sig: &var_sig,
        rules: Vec::new(),
        atom_prov: Vec::new(),
        idb_counter: 0,
        guards_inserted: 0,
        taken_preds: schema.relations().map(|r| r.name.clone()).collect(),
    };
    let root_params: Vec<AttrRef> = match &canonical.output {
        Some(out) => out
            .attrs
            .iter()
            .map(|a| a.source.clone().ok_or_else(|| {
                Error::Translate("unresolved output linkage".into())
            }))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let query_name = builder.fresh_pred("Q");
    builder.emit_scope(&scope, &root_params, &query_name)?;

    trace.push(
        format!("emitted one rule per negation scope, inside out ({})", builder.rules.len()),
        vec![],
    );
    if builder.guards_inserted > 0 {
        trace.push(
            format!(
                "inserted {} guard tables to make nested rules safe",
                builder.guards_inserted
            ),
            vec![],
        );
    }

    let mut program = DatalogProgram {
        rules: builder.rules,
    };
    crate::parse::normalize_anon_vars(&mut program);
    let check = crate::ast::fragment::classify(&Query::Datalog(program.clone()), schema);
    if !check.ok() {
        return Err(Error::Translate(format!(
            "produced an invalid program: {}",
            check.violations[0].message
        )));
    }

    // Correspondence: quantifier DFS position -> atom position in program
    // order, absent when guards grew the signature.
    if builder.guards_inserted == 0 {
        let mut corr = vec![usize::MAX; var_sig.len()];
        for (program_pos, src) in builder.atom_prov.iter().enumerate() {
            if let Some(trc_pos) = src {
                corr[*trc_pos] = program_pos;
            }
        }
        if corr.iter().all(|&i| i != usize::MAX) {
            trace.correspondence = Some(corr);
        }
    }
    Ok((program, trace))
}

struct RuleBuilder<'a> {
    schema: &'a Schema,
    var_rel: &'a BTreeMap<String, String>,
    var_sig: &'a BTreeMap<String, usize>,
    rules: Vec<Rule>,
    /// Signature provenance of every emitted EDB atom, in program order.
    atom_prov: Vec<Option<usize>>,
    idb_counter: usize,
    guards_inserted: usize,
    taken_preds: BTreeSet<String>,
}

/// A node of the per-rule unification structure.
#[derive(Clone, Debug, Default)]
struct UnionFind {
    parent: Vec<usize>,
    constant: Vec<Option<crate::catalog::Value>>,
}

impl UnionFind {
    fn fresh(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.constant.push(None);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        // Keep the smaller root so naming follows first appearance.
        let (keep, merge) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[merge] = keep;
        if self.constant[keep].is_none() {
            self.constant[keep] = self.constant[merge].clone();
        }
    }

    fn set_const(&mut self, x: usize, v: crate::catalog::Value) {
        let r = self.find(x);
        self.constant[r] = Some(v);
    }
}

impl<'a> RuleBuilder<'a> {
    fn fresh_pred(&mut self, base: &str) -> String {
        let mut candidate = base.to_string();
        let mut i = 1;
        while self.taken_preds.contains(&candidate) {
            i += 1;
            candidate = format!("{base}{i}");
        }
        self.taken_preds.insert(candidate.clone());
        candidate
    }

    /// Emit the rule for one scope (children first) and return its name.
    /// `params` lists the outer attribute references the scope needs, in
    /// head-argument order.
    fn emit_scope(&mut self, scope: &ScopeTree, params: &[AttrRef], name: &str) -> Result<()> {
        // Children first, in postorder, with their own parameter lists.
        let mut child_calls = Vec::new();
        for child in &scope.children {
            let child_params = scope_params(child, scope);
            self.idb_counter += 1;
            let child_name = self.fresh_pred(&format!("I{}", self.idb_counter));
            self.emit_scope(child, &child_params, &child_name)?;
            child_calls.push((child_name, child_params));
        }

        let local_vars: BTreeSet<&str> =
            scope.quantifiers.iter().map(|q| q.var.as_str()).collect();

        // Unification nodes: one per atom position, one per parameter.
        let mut uf = UnionFind::default();
        let mut pos_node: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut atoms: Vec<(String, Vec<usize>, Option<usize>)> = Vec::new();
        for q in &scope.quantifiers {
            let decl = self
                .schema
                .relation(&q.rel)
                .ok_or_else(|| Error::Schema(format!("unknown relation {}", q.rel)))?;
            let nodes: Vec<usize> = decl
                .attrs
                .iter()
                .map(|a| {
                    let n = uf.fresh();
                    pos_node.insert((q.var.clone(), a.name.clone()), n);
                    n
                })
                .collect();
            atoms.push((q.rel.clone(), nodes, self.var_sig.get(&q.var).copied()));
        }
        let mut param_node: BTreeMap<(String, String), usize> = BTreeMap::new();
        for p in params {
            param_node
                .entry((p.var.clone(), p.attr.clone()))
                .or_insert_with(|| uf.fresh());
        }

        let node_of = |r: &AttrRef,
                       uf: &mut UnionFind,
                       pos_node: &BTreeMap<(String, String), usize>,
                       param_node: &mut BTreeMap<(String, String), usize>|
         -> Result<usize> {
            if local_vars.contains(r.var.as_str()) {
                pos_node
                    .get(&(r.var.clone(), r.attr.clone()))
                    .copied()
                    .ok_or_else(|| {
                        Error::Translate(format!("unknown attribute {}.{}", r.var, r.attr))
                    })
            } else {
                Ok(*param_node
                    .entry((r.var.clone(), r.attr.clone()))
                    .or_insert_with(|| uf.fresh()))
            }
        };

        // Predicates: equalities unify, everything else becomes a built-in.
        let mut builtins: Vec<(usize, CompOp, BuiltinRhs)> = Vec::new();
        for p in &scope.predicates {
            match (&p.left, &p.right) {
                (Operand::Attr(l), Operand::Attr(r)) => {
                    let ln = node_of(l, &mut uf, &pos_node, &mut param_node)?;
                    let rn = node_of(r, &mut uf, &pos_node, &mut param_node)?;
                    if p.op == CompOp::Eq {
                        uf.union(ln, rn);
                    } else {
                        builtins.push((ln, p.op, BuiltinRhs::Node(rn)));
                    }
                }
                (Operand::Attr(l), Operand::Const(v)) => {
                    let ln = node_of(l, &mut uf, &pos_node, &mut param_node)?;
                    if p.op == CompOp::Eq {
                        uf.set_const(ln, v.clone());
                    } else {
                        builtins.push((ln, p.op, BuiltinRhs::Const(v.clone())));
                    }
                }
                (Operand::Const(v), Operand::Attr(r)) => {
                    let rn = node_of(r, &mut uf, &pos_node, &mut param_node)?;
                    if p.op == CompOp::Eq {
                        uf.set_const(rn, v.clone());
                    } else {
                        builtins.push((rn, p.op.flip(), BuiltinRhs::Const(v.clone())));
                    }
                }
                (Operand::Const(_), Operand::Const(_)) => {
                    return Err(Error::Fragment(
                        "a predicate between two constants is unguarded".into(),
                    ))
                }
            }
        }

        // Child call arguments.
        let mut call_args: Vec<(String, Vec<usize>)> = Vec::new();
        for (child_name, child_params) in &child_calls {
            let args = child_params
                .iter()
                .map(|r| node_of(r, &mut uf, &pos_node, &mut param_node))
                .collect::<Result<Vec<_>>>()?;
            call_args.push((child_name.clone(), args));
        }

        // Safety repair: every parameter must share a class with an atom
        // position; otherwise quantify the outer table that carries it.
        let positional: BTreeSet<usize> = {
            let nodes: Vec<usize> = pos_node.values().copied().collect();
            nodes.into_iter().map(|n| uf.find(n)).collect()
        };
        for p in params {
            let n = param_node[&(p.var.clone(), p.attr.clone())];
            if !positional.contains(&uf.find(n)) {
                let rel = self.var_rel.get(&p.var).ok_or_else(|| {
                    Error::Translate(format!("unscoped variable {}", p.var))
                })?;
                let decl = self.schema.relation(rel).expect("validated");
                let nodes: Vec<usize> = decl
                    .attrs
                    .iter()
                    .map(|a| {
                        let node = uf.fresh();
                        if a.name == p.attr {
                            uf.union(node, n);
                        }
                        node
                    })
                    .collect();
                atoms.push((rel.clone(), nodes, None));
                self.guards_inserted += 1;
            }
        }

        // Name the classes in order of first appearance across atoms, then
        // parameters.
        let mut names: BTreeMap<usize, String> = BTreeMap::new();
        let mut next_name = 0usize;
        let mut name_of = |root: usize, names: &mut BTreeMap<usize, String>| -> String {
            names
                .entry(root)
                .or_insert_with(|| {
                    let name = var_name(next_name);
                    next_name += 1;
                    name
                })
                .clone()
        };
        let term_of = |root: usize,
                       uf: &mut UnionFind,
                       names: &mut BTreeMap<usize, String>,
                       name_of: &mut dyn FnMut(usize, &mut BTreeMap<usize, String>) -> String|
         -> Term {
            match &uf.constant[root] {
                Some(v) => Term::Const(v.clone()),
                None => Term::Var(name_of(root, names)),
            }
        };

        let mut body: Vec<Literal> = Vec::new();
        for (rel, nodes, prov) in &atoms {
            let args = nodes
                .iter()
                .map(|&n| {
                    let root = uf.find(n);
                    term_of(root, &mut uf, &mut names, &mut name_of)
                })
                .collect();
            self.atom_prov.push(*prov);
            body.push(Literal::Pos(Atom {
                pred: rel.clone(),
                args,
                span: Default::default(),
            }));
        }
        for (node, op, rhs) in &builtins {
            let root = uf.find(*node);
            let left = term_of(root, &mut uf, &mut names, &mut name_of);
            let right = match rhs {
                BuiltinRhs::Const(v) => Term::Const(v.clone()),
                BuiltinRhs::Node(n) => {
                    let root = uf.find(*n);
                    term_of(root, &mut uf, &mut names, &mut name_of)
                }
            };
            body.push(Literal::Cmp(Comparison {
                left,
                op: *op,
                right,
                span: Default::default(),
            }));
        }
        for (child_name, args) in &call_args {
            let args = args
                .iter()
                .map(|&n| {
                    let root = uf.find(n);
                    term_of(root, &mut uf, &mut names, &mut name_of)
                })
                .collect();
            body.push(Literal::Neg(Atom {
                pred: child_name.clone(),
                args,
                span: Default::default(),
            }));
        }

        let head_args = params
            .iter()
            .map(|p| {
                let n = param_node[&(p.var.clone(), p.attr.clone())];
                let root = uf.find(n);
                term_of(root, &mut uf, &mut names, &mut name_of)
            })
            .collect();
        self.rules.push(Rule {
            head: Atom {
                pred: name.to_string(),
                args: head_args,
                span: Default::default(),
            },
            body,
            span: Default::default(),
        });
        Ok(())
    }
}

enum BuiltinRhs {
    Node(usize),
    Const(crate::catalog::Value),
}

fn var_name(i: usize) -> String {
    const NAMES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];
    if i < NAMES.len() {
        NAMES[i].to_string()
    } else {
        format!("{}{}", NAMES[i % NAMES.len()], i / NAMES.len() + 1)
    }
}

/// The outer attribute references a scope needs from its parent, in order
/// of first appearance: its own outward predicates plus everything its
/// children need that it cannot supply.
fn scope_params(scope: &ScopeTree, _parent: &ScopeTree) -> Vec<AttrRef> {
    let local: BTreeSet<&str> = scope.quantifiers.iter().map(|q| q.var.as_str()).collect();
    let mut out: Vec<AttrRef> = Vec::new();
    let mut push = |r: &AttrRef, out: &mut Vec<AttrRef>| {
        if !local.contains(r.var.as_str())
            && !out.iter().any(|o| o.var == r.var && o.attr == r.attr)
        {
            out.push(r.clone());
        }
    };
    for p in &scope.predicates {
        if let Operand::Attr(a) = &p.left {
            push(a, &mut out);
        }
        if let Operand::Attr(a) = &p.right {
            push(a, &mut out);
        }
    }
    for child in &scope.children {
        for r in scope_params(child, scope) {
            push(&r, &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Sort;
    use crate::eval::{equivalent_bounded, Bound};
    use crate::parse::{parse_datalog, parse_trc, print_datalog, print_trc};

    fn schema_rs() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int), ("B", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("B", Sort::Int)]).unwrap();
        s
    }

    fn schema_unary() -> Schema {
        let mut s = Schema::new();
        s.add_relation("R", vec![("A", Sort::Int)]).unwrap();
        s.add_relation("S", vec![("A", Sort::Int)]).unwrap();
        s
    }

    #[test]
    fn single_negation_rule_to_trc() {
        let schema = schema_unary();
        let p = parse_datalog("Q(x) :- R(x), not S(x).").unwrap();
        let (q, trace) = datalog_to_trc(&p, &schema).unwrap();
        assert_eq!(trace.correspondence, Some(vec![0, 1]));
        let expected =
            parse_trc("{ q(A) | exists r in R [q.A = r.A and not (exists s in S [s.A = r.A])] }")
                .unwrap();
        let v = equivalent_bounded(
            &Query::Trc(q.clone()),
            &Query::Trc(expected),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent(), "{}", print_trc(&q));
    }

    #[test]
    fn division_program_to_trc_matches_division2() {
        let schema = schema_rs();
        let p = parse_datalog("I(x) :- R(x,_), S(y), not R(x,y).\nQ(x) :- R(x,_), not I(x).")
            .unwrap();
        let (q, trace) = datalog_to_trc(&p, &schema).unwrap();
        // Signature (R, S, R, R): pattern-preserving.
        assert!(trace.correspondence.is_some());
        assert_eq!(q.quantifiers().len(), 4);
        let division2 = parse_trc(
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S, r3 in R [r3.A = r.A and not (exists r2 in R [r2.B = s.B and r2.A = r3.A])])] }",
        )
        .unwrap();
        let v = equivalent_bounded(
            &Query::Trc(q.clone()),
            &Query::Trc(division2),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent(), "{}", print_trc(&q));
    }

    #[test]
    fn division1_to_datalog_inserts_guard() {
        let schema = schema_rs();
        let q = parse_trc(
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [not (exists r2 in R [r2.B = s.B and r2.A = r.A])])] }",
        )
        .unwrap();
        let (p, trace) = trc_to_datalog(&q, &schema).unwrap();
        assert_eq!(p.rules.len(), 3, "{}", print_datalog(&p));
        // The middle rule needs the guard, so the translation is not
        // pattern-preserving and the program has 4 EDB atoms.
        assert!(trace.correspondence.is_none());
        let edb_atoms: usize = p
            .rules
            .iter()
            .map(|r| {
                r.body
                    .iter()
                    .filter(|l| {
                        matches!(l, Literal::Pos(a) | Literal::Neg(a) if schema.relation(&a.pred).is_some())
                    })
                    .count()
            })
            .sum();
        assert_eq!(edb_atoms, 4, "{}", print_datalog(&p));
        let v = equivalent_bounded(
            &Query::Trc(q),
            &Query::Datalog(p.clone()),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent(), "{}", print_datalog(&p));
    }

    #[test]
    fn builtin_case_gets_guard_with_comparison() {
        let schema = schema_unary();
        let q = parse_trc(
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [s.A < r.A])] }",
        )
        .unwrap();
        let (p, trace) = trc_to_datalog(&q, &schema).unwrap();
        assert!(trace.correspondence.is_none());
        assert_eq!(p.rules.len(), 2, "{}", print_datalog(&p));
        let printed = print_datalog(&p);
        // The nested rule gained R as a guard and keeps the comparison.
        assert!(printed.contains("R("), "{printed}");
        assert!(printed.contains('<') || printed.contains('>'), "{printed}");
        let v = equivalent_bounded(
            &Query::Trc(q),
            &Query::Datalog(p.clone()),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent(), "{printed}");
    }

    #[test]
    fn safe_single_scope_is_preserving() {
        let schema = schema_rs();
        let q = parse_trc("{ q(A) | exists r in R, s in S [q.A = r.A and r.B = s.B] }").unwrap();
        let (p, trace) = trc_to_datalog(&q, &schema).unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(trace.correspondence, Some(vec![0, 1]));
        let v = equivalent_bounded(
            &Query::Trc(q),
            &Query::Datalog(p),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent());
    }

    #[test]
    fn round_trip_through_datalog() {
        let schema = schema_rs();
        let q = parse_trc(
            "{ q(A) | exists r in R [q.A = r.A and not (exists s in S [s.B = r.B])] }",
        )
        .unwrap();
        let (p, _) = trc_to_datalog(&q, &schema).unwrap();
        let (q2, _) = datalog_to_trc(&p, &schema).unwrap();
        let v = equivalent_bounded(
            &Query::Trc(q),
            &Query::Trc(q2),
            &schema,
            &Bound { random_trials: 20, ..Bound::default() },
        )
        .unwrap();
        assert!(v.is_equivalent());
    }
}
