//! Per-partition pieces of the reachability index: the p-induced local
//! subgraph, its in/out boundaries, equivalence-set compression and the
//! bipartite in-to-out summary that is replicated to the other partitions.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::index::{PartitionIndexes, Permutation};
use crate::partition::PartitionAssignment;
use crate::rdf::TermId;

/// The p-labeled edges with at least one endpoint owned by `partition`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertySubgraph {
    pub property: TermId,
    pub partition: usize,
    /// Sorted, distinct.
    pub edges: Vec<(TermId, TermId)>,
}

impl PropertySubgraph {
    /// Reads the p-edges of `partition` from its PSO and POS arrays.
    /// `partitions` is consulted only to reject properties without edges.
    pub fn extract(partitions: &[PartitionIndexes], property: TermId, partition: usize) -> Result<Self> {
        let known = partitions
            .iter()
            .any(|idx| !idx.get(Permutation::Pso).scan(&[property]).is_empty());
        if !known {
            return Err(Error::UnknownProperty(property));
        }
        Ok(Self::from_index(&partitions[partition], property))
    }

    pub fn from_index(idx: &PartitionIndexes, property: TermId) -> Self {
        let mut edges: Vec<(TermId, TermId)> = idx
            .get(Permutation::Pso)
            .scan(&[property])
            .iter()
            .chain(idx.get(Permutation::Pos).scan(&[property]))
            .map(|t| (t.s, t.o))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        PropertySubgraph { property, partition: idx.partition(), edges }
    }

    /// Owned vertices touched by at least one edge.
    pub fn local_vertices(&self, assign: &PartitionAssignment) -> Vec<TermId> {
        let mut v: Vec<TermId> = self
            .edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|&x| assign.owner(x) == self.partition)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Edges crossing to or from another partition.
    pub fn cut_edges<'a>(
        &'a self,
        assign: &'a PartitionAssignment,
    ) -> impl Iterator<Item = (TermId, TermId)> + 'a {
        self.edges.iter().copied().filter(move |&(a, b)| assign.owner(a) != assign.owner(b))
    }
}

/// In-boundaries receive a p-edge from another partition, out-boundaries
/// send one. Both sets contain only owned vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundarySets {
    pub in_boundary: BTreeSet<TermId>,
    pub out_boundary: BTreeSet<TermId>,
}

pub fn compute_boundaries(g: &PropertySubgraph, assign: &PartitionAssignment) -> BoundarySets {
    let mut b = BoundarySets::default();
    for (u, v) in g.cut_edges(assign) {
        if assign.owner(v) == g.partition {
            b.in_boundary.insert(v);
        }
        if assign.owner(u) == g.partition {
            b.out_boundary.insert(u);
        }
    }
    b
}

/// A virtual vertex standing for an equivalence set of boundary vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualVertex {
    /// Sorted.
    pub members: Vec<TermId>,
    pub is_in: bool,
    pub is_out: bool,
}

/// Equivalence-set compression of one partition's boundaries.
///
/// In-boundaries are merged when they reach the same out-boundaries inside
/// the partition; out-boundaries when the same in-boundaries reach them.
/// Vertices that are both in- and out-boundaries stay singletons carrying
/// both roles. Virtuals are ordered in, out, then dual, each group by its
/// smallest member.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VirtualSets {
    pub virtuals: Vec<VirtualVertex>,
}

impl VirtualSets {
    pub fn in_virtuals(&self) -> impl Iterator<Item = (u32, &VirtualVertex)> {
        self.virtuals.iter().enumerate().filter(|(_, v)| v.is_in).map(|(i, v)| (i as u32, v))
    }

    pub fn out_virtuals(&self) -> impl Iterator<Item = (u32, &VirtualVertex)> {
        self.virtuals.iter().enumerate().filter(|(_, v)| v.is_out).map(|(i, v)| (i as u32, v))
    }

    fn out_index(&self) -> FxHashMap<TermId, u32> {
        self.out_virtuals().flat_map(|(i, v)| v.members.iter().map(move |&m| (m, i))).collect()
    }
}

/// Adjacency over the edges internal to the partition.
struct InternalGraph {
    adj: FxHashMap<TermId, Vec<TermId>>,
}

impl InternalGraph {
    fn new(g: &PropertySubgraph, assign: &PartitionAssignment) -> Self {
        let mut adj: FxHashMap<TermId, Vec<TermId>> = FxHashMap::default();
        for &(u, v) in &g.edges {
            if assign.owner(u) == g.partition && assign.owner(v) == g.partition {
                adj.entry(u).or_default().push(v);
            }
        }
        InternalGraph { adj }
    }

    /// Out-boundaries reachable from `start` (itself included when it is
    /// one), sorted.
    fn reached_outs(&self, start: TermId, outs: &BTreeSet<TermId>) -> Vec<TermId> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![start];
        seen.insert(start);
        let mut found = Vec::new();
        while let Some(v) = stack.pop() {
            if outs.contains(&v) {
                found.push(v);
            }
            if let Some(next) = self.adj.get(&v) {
                for &w in next {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        found.sort_unstable();
        found
    }
}

pub fn compress_boundaries(
    g: &PropertySubgraph,
    b: &BoundarySets,
    assign: &PartitionAssignment,
) -> VirtualSets {
    let internal = InternalGraph::new(g, assign);
    let dual: BTreeSet<TermId> = b.in_boundary.intersection(&b.out_boundary).copied().collect();

    let mut forward: BTreeMap<TermId, Vec<TermId>> = BTreeMap::new();
    for &x in &b.in_boundary {
        forward.insert(x, internal.reached_outs(x, &b.out_boundary));
    }

    // in-boundary signature: reached out-boundaries
    let mut in_groups: BTreeMap<&[TermId], Vec<TermId>> = BTreeMap::new();
    for (&x, outs) in &forward {
        if !dual.contains(&x) {
            in_groups.entry(outs.as_slice()).or_default().push(x);
        }
    }
    // out-boundary signature: in-boundaries reaching it
    let mut backward: BTreeMap<TermId, Vec<TermId>> = BTreeMap::new();
    for (&x, outs) in &forward {
        for &o in outs {
            backward.entry(o).or_default().push(x);
        }
    }
    let mut out_groups: BTreeMap<Vec<TermId>, Vec<TermId>> = BTreeMap::new();
    for &o in &b.out_boundary {
        if !dual.contains(&o) {
            out_groups.entry(backward.remove(&o).unwrap_or_default()).or_default().push(o);
        }
    }

    let mut ins: Vec<Vec<TermId>> = in_groups.into_values().collect();
    let mut outs: Vec<Vec<TermId>> = out_groups.into_values().collect();
    ins.sort();
    outs.sort();
    let mut virtuals = Vec::with_capacity(ins.len() + outs.len() + dual.len());
    virtuals.extend(ins.into_iter().map(|members| VirtualVertex { members, is_in: true, is_out: false }));
    virtuals.extend(outs.into_iter().map(|members| VirtualVertex { members, is_in: false, is_out: true }));
    virtuals.extend(dual.into_iter().map(|d| VirtualVertex { members: vec![d], is_in: true, is_out: true }));
    VirtualSets { virtuals }
}

/// The summary one partition ships to every other partition: virtual
/// vertices, the in-to-out reachability between them, and the partition's
/// outgoing cut edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteSummary {
    pub source_partition: usize,
    pub virtuals: Vec<VirtualVertex>,
    /// `(in-virtual, out-virtual)` pairs, sorted.
    pub edges: Vec<(u32, u32)>,
    /// Cut edges whose source this partition owns, sorted.
    pub cut_edges: Vec<(TermId, TermId)>,
}

impl BipartiteSummary {
    pub fn in_members(&self) -> impl Iterator<Item = TermId> + '_ {
        self.virtuals.iter().filter(|v| v.is_in).flat_map(|v| v.members.iter().copied())
    }
}

pub fn build_bipartite_summary(
    g: &PropertySubgraph,
    b: &BoundarySets,
    virtuals: &VirtualSets,
    assign: &PartitionAssignment,
) -> BipartiteSummary {
    let internal = InternalGraph::new(g, assign);
    let out_of = virtuals.out_index();
    let mut edges = Vec::new();
    for (iv, v) in virtuals.in_virtuals() {
        // all members share their reach signature; one representative suffices
        let rep = v.members[0];
        let mut targets: Vec<u32> =
            internal.reached_outs(rep, &b.out_boundary).iter().map(|o| out_of[o]).collect();
        targets.sort_unstable();
        targets.dedup();
        edges.extend(targets.into_iter().filter(|&ov| ov != iv).map(|ov| (iv, ov)));
    }
    edges.sort_unstable();
    let cut_edges: Vec<(TermId, TermId)> =
        g.cut_edges(assign).filter(|&(u, _)| assign.owner(u) == g.partition).collect();
    BipartiteSummary {
        source_partition: g.partition,
        virtuals: virtuals.virtuals.clone(),
        edges,
        cut_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::assign_custom;

    fn setup(edges: &[(u32, u32)], owners: &[(u32, usize)], k: usize) -> (Vec<PartitionIndexes>, PartitionAssignment) {
        let assign =
            PartitionAssignment::from_map(k, owners.iter().map(|&(v, p)| (TermId(v), p)), false).unwrap();
        let p = TermId(1000);
        let parts = (0..k)
            .map(|i| {
                let shard = edges
                    .iter()
                    .map(|&(a, b)| assign_custom(crate::rdf::EncodedTriple::new(TermId(a), p, TermId(b)), &assign).unwrap())
                    .filter(|st| st.destinations().any(|d| d == i));
                PartitionIndexes::build(shard, i)
            })
            .collect();
        (parts, assign)
    }

    fn ids(v: &[u32]) -> BTreeSet<TermId> {
        v.iter().map(|&x| TermId(x)).collect()
    }

    #[test]
    fn chain_split_subgraphs_and_boundaries() {
        // a=0 -> b=1 -> c=2, split {a,b} | {c}
        let (parts, assign) = setup(&[(0, 1), (1, 2)], &[(0, 0), (1, 0), (2, 1)], 2);
        let g0 = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        assert_eq!(g0.edges, vec![(TermId(0), TermId(1)), (TermId(1), TermId(2))]);
        let b0 = compute_boundaries(&g0, &assign);
        assert_eq!(b0.out_boundary, ids(&[1]));
        assert!(b0.in_boundary.is_empty());

        let g1 = PropertySubgraph::extract(&parts, TermId(1000), 1).unwrap();
        assert_eq!(g1.edges, vec![(TermId(1), TermId(2))]);
        let b1 = compute_boundaries(&g1, &assign);
        assert_eq!(b1.in_boundary, ids(&[2]));
        assert!(b1.out_boundary.is_empty());
    }

    #[test]
    fn unknown_property_and_absent_locally() {
        let (parts, _) = setup(&[(0, 1)], &[(0, 0), (1, 0), (5, 1)], 2);
        assert!(matches!(PropertySubgraph::extract(&parts, TermId(7), 0), Err(Error::UnknownProperty(_))));
        let g1 = PropertySubgraph::extract(&parts, TermId(1000), 1).unwrap();
        assert!(g1.edges.is_empty());
    }

    #[test]
    fn single_partition_has_no_boundaries() {
        let (parts, assign) = setup(&[(0, 1), (1, 2), (2, 0)], &[(0, 0), (1, 0), (2, 0)], 1);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        assert!(b.in_boundary.is_empty() && b.out_boundary.is_empty());
    }

    #[test]
    fn identical_signatures_merge() {
        // partition 0: in-boundaries 1,2 each reach outs 3,4; remote 10 feeds them, 11 drains.
        let edges = [(10, 1), (10, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 11), (4, 11)];
        let owners = [(1, 0), (2, 0), (3, 0), (4, 0), (10, 1), (11, 1)];
        let (parts, assign) = setup(&edges, &owners, 2);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        let v = compress_boundaries(&g, &b, &assign);
        assert_eq!(v.virtuals.len(), 2);
        assert_eq!(v.virtuals[0].members, vec![TermId(1), TermId(2)]);
        assert_eq!(v.virtuals[1].members, vec![TermId(3), TermId(4)]);
        let s = build_bipartite_summary(&g, &b, &v, &assign);
        assert_eq!(s.edges, vec![(0, 1)]);
        assert_eq!(s.cut_edges, vec![(TermId(3), TermId(11)), (TermId(4), TermId(11))]);
    }

    #[test]
    fn distinct_signatures_stay_apart() {
        let edges = [(10, 1), (10, 2), (1, 3), (2, 4), (3, 11), (4, 11)];
        let owners = [(1, 0), (2, 0), (3, 0), (4, 0), (10, 1), (11, 1)];
        let (parts, assign) = setup(&edges, &owners, 2);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        let v = compress_boundaries(&g, &b, &assign);
        assert!(v.virtuals.iter().all(|x| x.members.len() == 1));
        assert_eq!(v.virtuals.len(), 4);
    }

    #[test]
    fn summary_single_path_and_empty_outs() {
        // i1=1 -> x=2 -> o1=3 inside partition 0
        let edges = [(10, 1), (1, 2), (2, 3), (3, 11)];
        let owners = [(1, 0), (2, 0), (3, 0), (10, 1), (11, 1)];
        let (parts, assign) = setup(&edges, &owners, 2);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        let s = build_bipartite_summary(&g, &b, &compress_boundaries(&g, &b, &assign), &assign);
        assert_eq!(s.edges.len(), 1);

        let edges = [(10, 1), (1, 2)];
        let owners = [(1, 0), (2, 0), (10, 1)];
        let (parts, assign) = setup(&edges, &owners, 2);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        let s = build_bipartite_summary(&g, &b, &compress_boundaries(&g, &b, &assign), &assign);
        assert!(s.edges.is_empty());
    }

    #[test]
    fn dual_boundaries_are_singletons_with_both_roles() {
        let edges = [(10, 1), (1, 11), (10, 2), (2, 11)];
        let owners = [(1, 0), (2, 0), (10, 1), (11, 1)];
        let (parts, assign) = setup(&edges, &owners, 2);
        let g = PropertySubgraph::extract(&parts, TermId(1000), 0).unwrap();
        let b = compute_boundaries(&g, &assign);
        let v = compress_boundaries(&g, &b, &assign);
        assert_eq!(v.virtuals.len(), 2);
        assert!(v.virtuals.iter().all(|x| x.is_in && x.is_out && x.members.len() == 1));
    }
}
