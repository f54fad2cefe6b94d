//! Cost-based join ordering over the query graph.
//!
//! Plans are enumerated bottom-up over connected vertex subsets. For every
//! subset the cheapest plan per output layout ([`Props`]) is kept, so a
//! pricier plan that is already sharded on the right key survives to the
//! next level. Above [`DP_VERTEX_LIMIT`] vertices a greedy pairwise merge
//! takes over.

mod cost;
mod explain;

use std::collections::HashMap;

pub use cost::{
    residual_factor, CostModel, EquiCond, JoinAlt, JoinMethod, LeafVariant, Props, ReachCond, Side,
    MAX_EXHAUSTIVE_ORDER,
};

use crate::error::{Error, Result};
use crate::query::{QueryGraph, VarId};
use crate::stats::StatsCatalog;

pub const DP_VERTEX_LIMIT: usize = 12;
pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub enum PlanNode {
    Leaf(LeafVariant),
    Join { alt: JoinAlt, left: Box<Plan>, right: Box<Plan> },
}

/// A physical plan node with its estimates and output layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    /// Post-order number, unique within the plan.
    pub id: usize,
    pub vertices: u64,
    pub schema: Vec<VarId>,
    pub cost: f64,
    pub card: f64,
    pub props: Props,
    pub node: PlanNode,
}

impl Plan {
    pub fn children(&self) -> Option<(&Plan, &Plan)> {
        match &self.node {
            PlanNode::Leaf(_) => None,
            PlanNode::Join { left, right, .. } => Some((left, right)),
        }
    }

    /// Nodes in post-order.
    pub fn nodes(&self) -> Vec<&Plan> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Plan, out: &mut Vec<&'a Plan>) {
            if let Some((l, r)) = p.children() {
                walk(l, out);
                walk(r, out);
            }
            out.push(p);
        }
        walk(self, &mut out);
        out
    }

    pub fn join_count(&self) -> usize {
        self.nodes().iter().filter(|n| n.children().is_some()).count()
    }

    /// Reach predicates applied anywhere in the plan, per node.
    pub fn reach_conditions(&self) -> Vec<(usize, &[ReachCond])> {
        self.nodes()
            .into_iter()
            .map(|n| match &n.node {
                PlanNode::Leaf(l) => (n.id, l.filters.as_slice()),
                PlanNode::Join { alt, .. } => (n.id, alt.reach.as_slice()),
            })
            .filter(|(_, c)| !c.is_empty())
            .collect()
    }

    pub fn explain(&self, graph: &QueryGraph) -> String {
        explain::text(self, graph)
    }

    pub fn to_dot(&self, graph: &QueryGraph) -> String {
        explain::dot(self, graph)
    }
}

#[derive(Clone, Debug)]
enum Build {
    Leaf(LeafVariant),
    Join { left: (u64, usize), right: (u64, usize), alt: JoinAlt },
}

#[derive(Clone, Debug)]
struct Cand {
    cost: f64,
    card: f64,
    props: Props,
    build: Build,
}

/// Best candidate per output layout for each vertex subset.
#[derive(Default)]
struct Table {
    entries: HashMap<u64, Vec<Cand>>,
}

impl Table {
    fn insert(&mut self, set: u64, c: Cand) {
        let list = self.entries.entry(set).or_default();
        match list.iter_mut().find(|x| x.props == c.props) {
            Some(x) if c.cost < x.cost => *x = c,
            Some(_) => {}
            None => list.push(c),
        }
    }

    fn add_leaves(&mut self, model: &CostModel, v: usize) {
        for lv in model.leaf_variants(v) {
            self.insert(1 << v, Cand { cost: lv.cost, card: lv.card, props: lv.props, build: Build::Leaf(lv) });
        }
    }

    /// Tries every candidate pair of `l` and `r` as a join into `l | r`.
    fn join(&mut self, model: &CostModel, l: u64, r: u64) {
        let (Some(lc), Some(rc)) = (self.entries.get(&l), self.entries.get(&r)) else { return };
        let mut found = Vec::new();
        for (i, a) in lc.iter().enumerate() {
            for (j, b) in rc.iter().enumerate() {
                let ls = Side { set: l, card: a.card, props: a.props };
                let rs = Side { set: r, card: b.card, props: b.props };
                for alt in model.join_alternatives(&ls, &rs) {
                    let cost = model.combine(a.cost, b.cost, &alt);
                    found.push(Cand {
                        cost,
                        card: alt.card,
                        props: alt.props,
                        build: Build::Join { left: (l, i), right: (r, j), alt },
                    });
                }
            }
        }
        for c in found {
            self.insert(l | r, c);
        }
    }

    fn best(&self, set: u64) -> Option<usize> {
        let list = self.entries.get(&set)?;
        let mut best: Option<usize> = None;
        for (i, c) in list.iter().enumerate() {
            if best.is_none_or(|b| c.cost < list[b].cost) {
                best = Some(i);
            }
        }
        best
    }

    fn materialize(&self, model: &CostModel, set: u64, idx: usize) -> Plan {
        let c = &self.entries[&set][idx];
        match &c.build {
            Build::Leaf(lv) => Plan {
                id: 0,
                vertices: set,
                schema: model.graph.vertices[lv.vertex].vars.clone(),
                cost: c.cost,
                card: c.card,
                props: c.props,
                node: PlanNode::Leaf(lv.clone()),
            },
            Build::Join { left, right, alt } => {
                let l = self.materialize(model, left.0, left.1);
                let r = self.materialize(model, right.0, right.1);
                let mut schema = l.schema.clone();
                schema.extend(r.schema.iter().filter(|v| !l.schema.contains(v)));
                Plan {
                    id: 0,
                    vertices: set,
                    schema,
                    cost: c.cost,
                    card: c.card,
                    props: c.props,
                    node: PlanNode::Join { alt: alt.clone(), left: Box::new(l), right: Box::new(r) },
                }
            }
        }
    }
}

fn number(plan: &mut Plan, next: &mut usize) {
    if let PlanNode::Join { left, right, .. } = &mut plan.node {
        number(left, next);
        number(right, next);
    }
    plan.id = *next;
    *next += 1;
}

fn check_shape(graph: &QueryGraph) -> Result<()> {
    if graph.vertices.is_empty() {
        return Err(Error::NoPlan);
    }
    if graph.vertices.len() > 64 || graph.vars.len() > 64 {
        return Err(Error::Unsupported("queries are limited to 64 patterns and 64 variables".into()));
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedQuery);
    }
    Ok(())
}

/// Picks the cheapest plan: exact enumeration up to [`DP_VERTEX_LIMIT`]
/// vertices, greedy merging beyond.
pub fn optimize(graph: &QueryGraph, catalog: &StatsCatalog, k: usize, gamma: f64) -> Result<Plan> {
    check_shape(graph)?;
    let model = CostModel::new(graph, catalog, k.max(1), gamma);
    let mut plan = if graph.vertices.len() <= DP_VERTEX_LIMIT { dynamic(&model)? } else { greedy(&model)? };
    number(&mut plan, &mut 0);
    Ok(plan)
}

/// Exact enumeration regardless of size; exposed for testing.
pub fn optimize_exact(graph: &QueryGraph, catalog: &StatsCatalog, k: usize, gamma: f64) -> Result<Plan> {
    check_shape(graph)?;
    let model = CostModel::new(graph, catalog, k.max(1), gamma);
    let mut plan = dynamic(&model)?;
    number(&mut plan, &mut 0);
    Ok(plan)
}

/// Greedy merging regardless of size; exposed for testing.
pub fn optimize_greedy(graph: &QueryGraph, catalog: &StatsCatalog, k: usize, gamma: f64) -> Result<Plan> {
    check_shape(graph)?;
    let model = CostModel::new(graph, catalog, k.max(1), gamma);
    let mut plan = greedy(&model)?;
    number(&mut plan, &mut 0);
    Ok(plan)
}

fn connected_subset(adj: &[u64], set: u64) -> bool {
    let start = set & set.wrapping_neg();
    let mut seen = start;
    let mut frontier = start;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adj[v] & set & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == set
}

fn dynamic(model: &CostModel) -> Result<Plan> {
    let n = model.graph.vertices.len();
    if n > 30 {
        return Err(Error::Unsupported(format!("exact enumeration over {n} vertices")));
    }
    let adj = model.graph.neighbours();
    let mut table = Table::default();
    for v in 0..n {
        table.add_leaves(model, v);
    }
    let full: u64 = (1u64 << n) - 1;
    let mut by_size: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
    for set in 1..=full {
        if set.count_ones() >= 2 && connected_subset(&adj, set) {
            by_size[set.count_ones() as usize].push(set);
        }
    }
    for sets in by_size.iter().skip(2) {
        for &set in sets {
            // submasks in increasing order
            let mut l = set & set.wrapping_neg();
            while l != set {
                let r = set ^ l;
                if table.entries.contains_key(&l) && table.entries.contains_key(&r) && model.connected(l, r) {
                    table.join(model, l, r);
                }
                l = l.wrapping_sub(set) & set;
            }
        }
    }
    let best = table.best(full).ok_or(Error::NoPlan)?;
    Ok(table.materialize(model, full, best))
}

fn greedy(model: &CostModel) -> Result<Plan> {
    let n = model.graph.vertices.len();
    let mut table = Table::default();
    let mut trees: Vec<u64> = Vec::with_capacity(n);
    for v in 0..n {
        table.add_leaves(model, v);
        trees.push(1 << v);
    }
    while trees.len() > 1 {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..trees.len() {
            for j in 0..trees.len() {
                if i == j || !model.connected(trees[i], trees[j]) {
                    continue;
                }
                let mut probe = Table::default();
                probe.entries.insert(trees[i], table.entries[&trees[i]].clone());
                probe.entries.insert(trees[j], table.entries[&trees[j]].clone());
                probe.join(model, trees[i], trees[j]);
                if let Some(b) = probe.best(trees[i] | trees[j]) {
                    let cost = probe.entries[&(trees[i] | trees[j])][b].cost;
                    if pick.is_none_or(|(c, _, _)| cost < c) {
                        pick = Some((cost, i, j));
                    }
                }
            }
        }
        let (_, i, j) = pick.ok_or(Error::DisconnectedQuery)?;
        let (a, b) = (trees[i], trees[j]);
        table.join(model, a, b);
        trees.retain(|&t| t != a && t != b);
        trees.push(a | b);
    }
    let full = trees[0];
    let best = table.best(full).ok_or(Error::NoPlan)?;
    Ok(table.materialize(model, full, best))
}

#[cfg(test)]
mod tests;
