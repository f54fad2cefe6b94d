use std::fmt::Write;

use super::{Plan, PlanNode, Props, ReachCond};
use crate::query::QueryGraph;

fn var_name(g: &QueryGraph, v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| g.var(v).to_string())
}

fn props(g: &QueryGraph, p: &Props) -> String {
    format!("shard={} sorted={}", var_name(g, p.shard), var_name(g, p.sorted))
}

pub(crate) fn reach_label(g: &QueryGraph, c: &ReachCond) -> String {
    let p = &g.preds[c.pred];
    format!("{} {}{} {}", g.var(p.source), p.property_term, p.modifier.symbol(), g.var(p.target))
}

fn headline(g: &QueryGraph, plan: &Plan) -> String {
    let mut s = String::new();
    match &plan.node {
        PlanNode::Leaf(lv) => {
            let _ = write!(s, "#{} SCAN R{} [{}]", plan.id, lv.vertex, g.vertices[lv.vertex].label);
            if let Some(perm) = lv.permutation {
                let _ = write!(s, " via {perm:?}");
            }
            for f in &lv.filters {
                let _ = write!(s, " filter({})", reach_label(g, f));
            }
        }
        PlanNode::Join { alt, .. } => {
            let _ = write!(s, "#{} {}", plan.id, alt.method.name());
            if let Some(k) = alt.key {
                let _ = write!(s, " key={}", g.var(k));
            }
            for e in &alt.equi {
                let _ = write!(s, " eq({} R{}~R{} sel={:.3e})", g.var(e.var), e.edge.0, e.edge.1, e.sel);
            }
            for c in &alt.reach {
                let _ = write!(s, " reach({} sel={:.3e})", reach_label(g, c), c.sel);
            }
            if alt.marks[0] {
                s.push_str(" reshard-left");
            }
            if alt.marks[1] {
                s.push_str(" reshard-right");
            }
        }
    }
    let _ = write!(s, " card={:.1} cost={:.1} {}", plan.card, plan.cost, props(g, &plan.props));
    s
}

pub(crate) fn text(plan: &Plan, g: &QueryGraph) -> String {
    fn walk(p: &Plan, g: &QueryGraph, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{}{}", "  ".repeat(depth), headline(g, p));
        if let Some((l, r)) = p.children() {
            walk(l, g, depth + 1, out);
            walk(r, g, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(plan, g, 0, &mut out);
    out
}

pub(crate) fn dot(plan: &Plan, g: &QueryGraph) -> String {
    let mut out = String::from("digraph plan {\n  node [shape=box];\n");
    for n in plan.nodes() {
        let label = headline(g, n).replace('\\', "\\\\").replace('"', "\\\"");
        let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, label);
        if let Some((l, r)) = n.children() {
            let _ = writeln!(out, "  n{} -> n{};", l.id, n.id);
            let _ = writeln!(out, "  n{} -> n{};", r.id, n.id);
        }
    }
    out.push_str("}\n");
    out
}
