//! Cost model: scan costs, residual-cardinality join costs and shipping
//! costs for resharded inputs.

use crate::index::{select_in_group, Bound, Group, Permutation, Position};
use crate::query::{Modifier, QueryGraph, Slot, VarId, VertexKind};
use crate::stats::{JoinRole, StatsCatalog};

/// How a relation is laid out across workers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Props {
    /// Every tuple sits at the owner of this variable's binding.
    pub shard: Option<VarId>,
    /// Every worker's rows are sorted on this variable.
    pub sorted: Option<VarId>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum JoinMethod {
    Merge,
    Hash,
    Reach,
}

impl JoinMethod {
    pub fn name(self) -> &'static str {
        match self {
            JoinMethod::Merge => "DMJ",
            JoinMethod::Hash => "DHJ",
            JoinMethod::Reach => "DRJ",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EquiCond {
    pub var: VarId,
    /// The query-graph edge this condition stems from.
    pub edge: (usize, usize),
    pub sel: f64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ReachCond {
    pub pred: usize,
    pub sel: f64,
}

/// One way to scan a query vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafVariant {
    pub vertex: usize,
    /// `None` for singleton and unbound-variable vertices.
    pub permutation: Option<Permutation>,
    /// Reach predicates whose endpoints both live in this vertex, in
    /// application order.
    pub filters: Vec<ReachCond>,
    pub cost: f64,
    pub card: f64,
    pub props: Props,
}

/// One way to join two subplans, independent of their costs.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinAlt {
    pub method: JoinMethod,
    /// Equi-join key (for DRJ with equi conditions too).
    pub key: Option<VarId>,
    pub equi: Vec<EquiCond>,
    pub reach: Vec<ReachCond>,
    /// For a reach-only DRJ: whether the left input holds the first
    /// condition's source variable.
    pub source_left: bool,
    /// Reshard marks for (left, right).
    pub marks: [bool; 2],
    pub join_cost: f64,
    pub ship_cost: f64,
    pub card: f64,
    pub props: Props,
}

/// Cardinality and layout of a subplan, as seen by its parent.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Side {
    pub set: u64,
    pub card: f64,
    pub props: Props,
}

pub const MAX_EXHAUSTIVE_ORDER: usize = 5;

pub struct CostModel<'a> {
    pub graph: &'a QueryGraph,
    pub catalog: &'a StatsCatalog,
    pub k: usize,
    pub gamma: f64,
    var_masks: Vec<u64>,
    /// Predicates applied as leaf filters of some vertex.
    local: Vec<bool>,
}

fn bit(v: usize) -> u64 {
    1u64 << v
}

/// Sum over i of prod_{j <= i} sel_j: the residual-cardinality factor of
/// applying conditions in order.
pub fn residual_factor(sels: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut acc = 1.0;
    let mut sum = 0.0;
    for s in sels {
        acc *= s;
        sum += acc;
    }
    (sum, acc)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

impl<'a> CostModel<'a> {
    pub fn new(graph: &'a QueryGraph, catalog: &'a StatsCatalog, k: usize, gamma: f64) -> Self {
        let var_masks: Vec<u64> = graph.vertices.iter().map(|v| v.vars.iter().fold(0u64, |m, &x| m | bit(x))).collect();
        let local = graph
            .preds
            .iter()
            .map(|p| var_masks.iter().any(|&m| m & bit(p.source) != 0 && m & bit(p.target) != 0))
            .collect();
        CostModel { graph, catalog, k, gamma, var_masks, local }
    }

    pub fn vars_of(&self, set: u64) -> u64 {
        let mut m = 0;
        for (i, vm) in self.var_masks.iter().enumerate() {
            if set & bit(i) != 0 {
                m |= vm;
            }
        }
        m
    }

    fn covers_pred(&self, vars: u64, pred: usize) -> bool {
        let p = &self.graph.preds[pred];
        vars & bit(p.source) != 0 && vars & bit(p.target) != 0
    }

    pub fn reach_sel(&self, pred: usize) -> f64 {
        let p = &self.graph.preds[pred];
        match p.modifier {
            Modifier::Star | Modifier::Plus => self.catalog.reach_selectivity(p.property),
            Modifier::Opt => {
                let vp = self.catalog.meta.vp(p.property) as f64;
                let ep = self.catalog.meta.ep(p.property) as f64;
                if vp == 0.0 {
                    0.0
                } else {
                    ((ep + vp) / (vp * vp)).min(1.0)
                }
            }
            Modifier::None => unreachable!("plain pattern is not a reach predicate"),
        }
    }

    fn role_of(&self, vertex: usize, var: VarId) -> Option<(crate::rdf::TermId, bool)> {
        match self.graph.vertices[vertex].kind {
            VertexKind::Pattern { s, p, .. } => Some((p, s == Slot::Var(var))),
            _ => None,
        }
    }

    pub fn equi_sel(&self, a: usize, b: usize, var: VarId) -> f64 {
        match (self.role_of(a, var), self.role_of(b, var)) {
            (Some((pa, sa)), Some((pb, sb))) => self.catalog.join_selectivity(pa, pb, JoinRole::new(sa, sb)),
            // vertices other than patterns never share variables
            _ => 1.0,
        }
    }

    fn pattern_card(&self, s: Slot, p: crate::rdf::TermId, o: Slot) -> f64 {
        let absent = |x: Slot| matches!(x, Slot::Const(t) if t == crate::rdf::TermId::ABSENT);
        if p == crate::rdf::TermId::ABSENT || absent(s) || absent(o) {
            return 0.0;
        }
        let c = self.catalog;
        (match (s, o) {
            (Slot::Const(sv), Slot::Const(ov)) => c.card_ps(p, sv).min(c.card_po(p, ov)).min(c.card_so(sv, ov)).min(1),
            (Slot::Const(sv), _) => c.card_ps(p, sv),
            (_, Slot::Const(ov)) => c.card_po(p, ov),
            _ => c.card_property(p),
        }) as f64
    }

    /// Reach predicates local to a vertex, most selective first.
    fn leaf_filters(&self, vertex: usize) -> Vec<ReachCond> {
        let vars = self.var_masks[vertex];
        let mut f: Vec<ReachCond> = (0..self.graph.preds.len())
            .filter(|&p| self.covers_pred(vars, p))
            .map(|p| ReachCond { pred: p, sel: self.reach_sel(p) })
            .collect();
        f.sort_by(|a, b| a.sel.total_cmp(&b.sel).then(a.pred.cmp(&b.pred)));
        f
    }

    pub fn leaf_variants(&self, vertex: usize) -> Vec<LeafVariant> {
        let g = self.graph;
        let k = self.k as f64;
        let mut out = Vec::new();
        match &g.vertices[vertex].kind {
            VertexKind::Pattern { s, p, o, .. } => {
                let card = self.pattern_card(*s, *p, *o);
                let bound = Bound::new(s.var().is_none(), true, o.var().is_none());
                for group in [Group::Subject, Group::Object] {
                    let Some(perm) = select_in_group(bound, group) else { continue };
                    let slot_at = |pos: Position| match pos {
                        Position::S => *s,
                        Position::P => Slot::Const(*p),
                        Position::O => *o,
                    };
                    let sorted = perm.order().iter().find_map(|&pos| slot_at(pos).var());
                    let shard = match group {
                        Group::Subject => s.var(),
                        Group::Object => o.var(),
                    };
                    out.push(LeafVariant {
                        vertex,
                        permutation: Some(perm),
                        filters: Vec::new(),
                        cost: card / k,
                        card,
                        props: Props { shard, sorted },
                    });
                }
            }
            VertexKind::Singleton { var, .. } => out.push(LeafVariant {
                vertex,
                permutation: None,
                filters: Vec::new(),
                cost: 1.0,
                card: 1.0,
                props: Props { shard: Some(*var), sorted: Some(*var) },
            }),
            VertexKind::Unbound { var, properties } => {
                let meta = &self.catalog.meta;
                let vp: usize = properties.iter().map(|&p| meta.vp(p)).sum();
                let ep: usize = properties.iter().map(|&p| meta.ep(p)).sum();
                out.push(LeafVariant {
                    vertex,
                    permutation: None,
                    filters: Vec::new(),
                    cost: ep as f64 / k,
                    card: vp.min(meta.vertex_count) as f64,
                    props: Props { shard: Some(*var), sorted: Some(*var) },
                });
            }
        }
        let filters = self.leaf_filters(vertex);
        if !filters.is_empty() {
            let last_target = self.graph.preds[filters.last().unwrap().pred].target;
            for v in &mut out {
                let (sum, prod) = residual_factor(filters.iter().map(|f| f.sel));
                v.cost += v.card * sum;
                v.card *= prod;
                v.props = Props { shard: Some(last_target), sorted: None };
                v.filters = filters.clone();
            }
            out.dedup_by(|a, b| a.cost == b.cost && a.props == b.props);
        }
        out
    }

    /// Equi conditions crossing the split, most selective first.
    pub fn crossing_equi(&self, left: u64, right: u64) -> Vec<EquiCond> {
        let mut c: Vec<EquiCond> = self
            .graph
            .equi
            .iter()
            .filter(|e| {
                let (a, b) = (bit(e.a), bit(e.b));
                (left & a != 0 && right & b != 0) || (left & b != 0 && right & a != 0)
            })
            .map(|e| EquiCond { var: e.var, edge: (e.a, e.b), sel: self.equi_sel(e.a, e.b, e.var) })
            .collect();
        c.sort_by(|a, b| a.sel.total_cmp(&b.sel).then(a.edge.cmp(&b.edge)).then(a.var.cmp(&b.var)));
        c
    }

    /// Reach predicates first applicable at the join of `left` and `right`.
    /// Leaf filters are left out so every predicate is applied once.
    pub fn crossing_reach(&self, left: u64, right: u64) -> Vec<ReachCond> {
        let (lv, rv) = (self.vars_of(left), self.vars_of(right));
        (0..self.graph.preds.len())
            .filter(|&p| !self.local[p])
            .filter(|&p| self.covers_pred(lv | rv, p) && !self.covers_pred(lv, p) && !self.covers_pred(rv, p))
            .map(|p| ReachCond { pred: p, sel: self.reach_sel(p) })
            .collect()
    }

    /// Whether any query-graph edge crosses the split.
    pub fn connected(&self, left: u64, right: u64) -> bool {
        let crosses = |a: usize, b: usize| {
            (left & bit(a) != 0 && right & bit(b) != 0) || (left & bit(b) != 0 && right & bit(a) != 0)
        };
        self.graph.equi.iter().any(|e| crosses(e.a, e.b))
            || self.graph.reach.iter().any(|e| crosses(e.source_vertex, e.target_vertex))
    }

    fn width(&self, set: u64) -> f64 {
        self.vars_of(set).count_ones() as f64
    }

    fn mark(&self, side: &Side, key: VarId) -> bool {
        self.k > 1 && side.props.shard != Some(key)
    }

    fn ship(&self, l: &Side, r: &Side, marks: [bool; 2]) -> f64 {
        let mut s = 0.0;
        if marks[0] {
            s += l.card * self.width(l.set) * self.gamma;
        }
        if marks[1] {
            s += r.card * self.width(r.set) * self.gamma;
        }
        s
    }

    fn reach_orders(&self, reach: &[ReachCond]) -> Vec<Vec<ReachCond>> {
        if reach.len() <= MAX_EXHAUSTIVE_ORDER {
            permutations(reach.len()).into_iter().map(|p| p.into_iter().map(|i| reach[i]).collect()).collect()
        } else {
            let mut r = reach.to_vec();
            r.sort_by(|a, b| a.sel.total_cmp(&b.sel).then(a.pred.cmp(&b.pred)));
            vec![r]
        }
    }

    /// Every physical way of joining `l` with `r`.
    pub fn join_alternatives(&self, l: &Side, r: &Side) -> Vec<JoinAlt> {
        let equi = self.crossing_equi(l.set, r.set);
        let reach = self.crossing_reach(l.set, r.set);
        let mut keys: Vec<VarId> = equi.iter().map(|e| e.var).collect();
        keys.sort_unstable();
        keys.dedup();
        let base = l.card * r.card;
        // a predicate covered by both inputs was applied on each side;
        // count it once so the estimate depends only on the vertex set
        let (lv, rv) = (self.vars_of(l.set), self.vars_of(r.set));
        let twice: f64 = (0..self.graph.preds.len())
            .filter(|&p| !self.local[p] && self.covers_pred(lv, p) && self.covers_pred(rv, p))
            .map(|p| self.reach_sel(p))
            .filter(|&s| s > 0.0)
            .product();
        let mut out = Vec::new();
        let cost_of = |conds: &mut dyn Iterator<Item = f64>| {
            let (sum, prod) = residual_factor(conds);
            (base * sum, base * prod / twice)
        };
        if reach.is_empty() {
            let (join_cost, card) = cost_of(&mut equi.iter().map(|e| e.sel));
            for &key in &keys {
                let marks = [self.mark(l, key), self.mark(r, key)];
                let merge = l.props.sorted == Some(key) && r.props.sorted == Some(key);
                let (method, sorted) = if merge { (JoinMethod::Merge, Some(key)) } else { (JoinMethod::Hash, None) };
                out.push(JoinAlt {
                    method,
                    key: Some(key),
                    equi: equi.clone(),
                    reach: Vec::new(),
                    source_left: false,
                    marks,
                    join_cost,
                    ship_cost: self.ship(l, r, marks),
                    card,
                    props: Props { shard: Some(key), sorted },
                });
            }
            return out;
        }
        for order in self.reach_orders(&reach) {
            let last_target = self.graph.preds[order.last().unwrap().pred].target;
            let props = Props { shard: Some(last_target), sorted: None };
            let (join_cost, card) = cost_of(&mut equi.iter().map(|e| e.sel).chain(order.iter().map(|c| c.sel)));
            if keys.is_empty() {
                let first = &self.graph.preds[order[0].pred];
                let source_left = self.vars_of(l.set) & bit(first.source) != 0;
                let (src_side, tgt_side) = if source_left { (l, r) } else { (r, l) };
                let (ms, mt) = (self.mark(src_side, first.source), self.mark(tgt_side, first.target));
                let marks = if source_left { [ms, mt] } else { [mt, ms] };
                out.push(JoinAlt {
                    method: JoinMethod::Reach,
                    key: None,
                    equi: Vec::new(),
                    reach: order.clone(),
                    source_left,
                    marks,
                    join_cost,
                    ship_cost: self.ship(l, r, marks),
                    card,
                    props,
                });
            } else {
                for &key in &keys {
                    let marks = [self.mark(l, key), self.mark(r, key)];
                    out.push(JoinAlt {
                        method: JoinMethod::Reach,
                        key: Some(key),
                        equi: equi.clone(),
                        reach: order.clone(),
                        source_left: false,
                        marks,
                        join_cost,
                        ship_cost: self.ship(l, r, marks),
                        card,
                        props,
                    });
                }
            }
        }
        out
    }

    /// Cost of a join node given its children's costs.
    pub fn combine(&self, left_cost: f64, right_cost: f64, alt: &JoinAlt) -> f64 {
        left_cost.max(right_cost) + alt.join_cost + alt.ship_cost
    }
}
