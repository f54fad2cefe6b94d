//! Query graph: one vertex per plain pattern plus singleton vertices for
//! constant reach endpoints and unbound-variable vertices; equi-join edges
//! for shared variables and reach edges for `*`, `+` and `?` atoms.

use std::fmt::Write as _;

use super::{Modifier, Node, Query, Var, VarKind};
use crate::error::{Error, Result};
use crate::rdf::{Dictionary, Term, TermId};

pub type VarId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub var: Var,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Var(VarId),
    /// `TermId::ABSENT` for constants missing from the data.
    Const(TermId),
}

impl Slot {
    pub fn var(self) -> Option<VarId> {
        match self {
            Slot::Var(v) => Some(v),
            Slot::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Pattern { pattern: usize, s: Slot, p: TermId, o: Slot },
    /// A one-row relation binding a hidden variable to a constant.
    Singleton { var: VarId, value: TermId },
    /// A variable bound only by reach patterns; ranges over the union of
    /// V^p of those patterns' properties.
    Unbound { var: VarId, properties: Vec<TermId> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QVertex {
    pub kind: VertexKind,
    /// Distinct variables in schema order.
    pub vars: Vec<VarId>,
    pub label: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct EquiEdge {
    pub a: usize,
    pub b: usize,
    pub var: VarId,
}

/// A reachability condition `source ~p~> target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachPred {
    pub source: VarId,
    pub target: VarId,
    pub property: TermId,
    pub property_term: Term,
    pub modifier: Modifier,
    /// Index of the rewritten pattern it came from.
    pub pattern: usize,
}

/// Connects a vertex housing a predicate's source variable with one
/// housing its target variable; both may be the same vertex.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ReachEdge {
    pub source_vertex: usize,
    pub target_vertex: usize,
    pub pred: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    pub vars: Vec<VarInfo>,
    pub vertices: Vec<QVertex>,
    pub equi: Vec<EquiEdge>,
    pub preds: Vec<ReachPred>,
    pub reach: Vec<ReachEdge>,
    /// User variables in output order.
    pub projection: Vec<VarId>,
}

impl QueryGraph {
    pub fn build(query: &Query, dict: &Dictionary) -> Result<Self> {
        Self::build_with(query, |t| dict.lookup(t))
    }

    /// Builds with an arbitrary constant resolver; unresolved constants
    /// become `TermId::ABSENT` and match nothing.
    pub fn build_with(query: &Query, resolve: impl Fn(&Term) -> Option<TermId>) -> Result<Self> {
        let resolve = |t: &Term| resolve(t).unwrap_or(TermId::ABSENT);
        let mut vars: Vec<VarInfo> = Vec::new();
        let var_id = |v: &Var, vars: &mut Vec<VarInfo>| -> VarId {
            match vars.iter().position(|x| &x.var == v) {
                Some(i) => i,
                None => {
                    vars.push(VarInfo { var: v.clone() });
                    vars.len() - 1
                }
            }
        };
        let slot = |n: &Node, vars: &mut Vec<VarInfo>| match n {
            Node::Var(v) => Slot::Var(var_id(v, vars)),
            Node::Const(t) => Slot::Const(resolve(t)),
        };

        let mut vertices = Vec::new();
        for (i, p) in query.patterns.iter().enumerate() {
            if p.atom.modifier.is_reach() {
                continue;
            }
            let s = slot(&p.subject, &mut vars);
            let o = slot(&p.object, &mut vars);
            let mut vs: Vec<VarId> = [s.var(), o.var()].into_iter().flatten().collect();
            vs.dedup();
            vertices.push(QVertex {
                kind: VertexKind::Pattern { pattern: i, s, p: resolve(&p.atom.property), o },
                vars: vs,
                label: p.to_string(),
            });
        }
        let plain_vars: Vec<VarId> = vertices.iter().flat_map(|v: &QVertex| v.vars.clone()).collect();

        let mut preds = Vec::new();
        let mut hidden = 0usize;
        for (i, p) in query.patterns.iter().enumerate() {
            if !p.atom.modifier.is_reach() {
                continue;
            }
            if let (Node::Var(a), Node::Var(b)) = (&p.subject, &p.object) {
                if a == b {
                    return Err(Error::Unsupported(format!("reach pattern with identical endpoints: {p}")));
                }
            }
            let property = resolve(&p.atom.property);
            let mut endpoint = |n: &Node, vars: &mut Vec<VarInfo>, vertices: &mut Vec<QVertex>| -> VarId {
                match n {
                    Node::Const(t) => {
                        let v = var_id(&Var::hidden(hidden), vars);
                        hidden += 1;
                        vertices.push(QVertex {
                            kind: VertexKind::Singleton { var: v, value: resolve(t) },
                            vars: vec![v],
                            label: t.to_string(),
                        });
                        v
                    }
                    Node::Var(x) => {
                        let v = var_id(x, vars);
                        if !plain_vars.contains(&v) {
                            let existing = vertices.iter_mut().find(|q| {
                                matches!(q.kind, VertexKind::Unbound { var, .. } if var == v)
                            });
                            match existing {
                                Some(q) => {
                                    if let VertexKind::Unbound { properties, .. } = &mut q.kind {
                                        if !properties.contains(&property) {
                                            properties.push(property);
                                        }
                                    }
                                }
                                None => vertices.push(QVertex {
                                    kind: VertexKind::Unbound { var: v, properties: vec![property] },
                                    vars: vec![v],
                                    label: x.to_string(),
                                }),
                            }
                        }
                        v
                    }
                }
            };
            let source = endpoint(&p.subject, &mut vars, &mut vertices);
            let target = endpoint(&p.object, &mut vars, &mut vertices);
            preds.push(ReachPred {
                source,
                target,
                property,
                property_term: p.atom.property.clone(),
                modifier: p.atom.modifier,
                pattern: i,
            });
        }
        if vertices.is_empty() {
            return Err(Error::Unsupported("empty group pattern".into()));
        }

        let mut equi = Vec::new();
        for a in 0..vertices.len() {
            for b in a + 1..vertices.len() {
                for &v in &vertices[a].vars {
                    if vertices[b].vars.contains(&v) {
                        equi.push(EquiEdge { a, b, var: v });
                    }
                }
            }
        }
        let housing = |v: VarId| -> Vec<usize> {
            (0..vertices.len()).filter(|&i| vertices[i].vars.contains(&v)).collect()
        };
        let mut reach = Vec::new();
        for (pi, p) in preds.iter().enumerate() {
            for &a in &housing(p.source) {
                for &b in &housing(p.target) {
                    reach.push(ReachEdge { source_vertex: a, target_vertex: b, pred: pi });
                }
            }
        }
        let projection = query
            .projection
            .iter()
            .map(|v| vars.iter().position(|x| &x.var == v).expect("projected variable registered"))
            .collect();
        let g = QueryGraph { vars, vertices, equi, preds, reach, projection };
        if !g.is_connected() {
            return Err(Error::DisconnectedQuery);
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn var(&self, v: VarId) -> &Var {
        &self.vars[v].var
    }

    pub fn is_user_var(&self, v: VarId) -> bool {
        self.vars[v].var.kind == VarKind::User
    }

    /// Bitmask adjacency over vertices (self-loops ignored).
    pub fn neighbours(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.vertices.len()];
        let edges = self
            .equi
            .iter()
            .map(|e| (e.a, e.b))
            .chain(self.reach.iter().map(|e| (e.source_vertex, e.target_vertex)));
        for (a, b) in edges {
            if a != b {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        let edges = self
            .equi
            .iter()
            .map(|e| (e.a, e.b))
            .chain(self.reach.iter().map(|e| (e.source_vertex, e.target_vertex)));
        for (a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        (0..n).all(|i| find(&mut parent, i) == root)
    }

    /// Graphviz rendering: equi-join edges undirected, reach edges directed.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph query {\n  node [shape=box];\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = match v.kind {
                VertexKind::Pattern { .. } => "",
                VertexKind::Singleton { .. } => ", shape=ellipse",
                VertexKind::Unbound { .. } => ", shape=ellipse, style=dashed",
            };
            let _ = writeln!(s, "  v{i} [label=\"R{i}: {}\"{shape}];", escape(&v.label));
        }
        for e in &self.equi {
            let _ = writeln!(s, "  v{} -> v{} [dir=none, label=\"{}\"];", e.a, e.b, escape(&self.var(e.var).to_string()));
        }
        for e in &self.reach {
            let p = &self.preds[e.pred];
            let _ = writeln!(
                s,
                "  v{} -> v{} [style=bold, label=\"{}{}\"];",
                e.source_vertex,
                e.target_vertex,
                escape(&p.property_term.to_string()),
                p.modifier.symbol()
            );
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
