//! The compound graph a partition searches: its own p-subgraph, every cut
//! edge, and the bipartite summaries of all other partitions, condensed
//! into an SCC DAG.

use rustc_hash::FxHashMap;

use super::boundary::{BipartiteSummary, PropertySubgraph};
use super::scc::{condense, Csr};
use crate::error::{Error, Result};
use crate::partition::PartitionAssignment;
use crate::rdf::TermId;

/// Size figures kept for `explain` and `stats` output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompoundStats {
    pub local_edges: usize,
    pub cut_edges: usize,
    pub in_boundaries: usize,
    pub out_boundaries: usize,
    pub local_virtuals: usize,
    pub remote_virtuals: usize,
    pub components: usize,
}

/// Condensed compound graph of one property at one partition.
///
/// Real vertices occupy node ids `0..real.len()` in sorted term order;
/// virtual vertices of the remote summaries follow. Components are
/// numbered topologically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompoundDag {
    pub(crate) property: TermId,
    pub(crate) partition: usize,
    pub(crate) real: Vec<TermId>,
    pub(crate) comp_of: Vec<u32>,
    pub(crate) dag: Csr,
    /// Per component: real nodes that are in-boundaries of another
    /// partition, i.e. the entries a search hands over.
    pub(crate) entries: Csr,
    pub(crate) entry_owner: Vec<u16>,
    pub(crate) stats: CompoundStats,
}

impl CompoundDag {
    /// Assembles the compound graph from the local subgraph and the
    /// summaries of all partitions (the local one may be included; only
    /// its cut edges are used).
    pub fn assemble(
        local: &PropertySubgraph,
        summaries: &[BipartiteSummary],
        assign: &PartitionAssignment,
    ) -> Result<Self> {
        let me = local.partition;
        let k = assign.k();
        let mut by_part: Vec<Option<&BipartiteSummary>> = vec![None; k];
        for s in summaries {
            by_part[s.source_partition] = Some(s);
        }
        if let Some(j) = (0..k).find(|&j| j != me && by_part[j].is_none()) {
            return Err(Error::MissingSummary(j));
        }

        let mut edges_t: Vec<(TermId, TermId)> = local.edges.clone();
        for s in by_part.iter().flatten() {
            edges_t.extend_from_slice(&s.cut_edges);
        }
        edges_t.sort_unstable();
        edges_t.dedup();
        let cut_edges = edges_t.iter().filter(|&&(a, b)| assign.owner(a) != assign.owner(b)).count();

        let mut real: Vec<TermId> = edges_t.iter().flat_map(|&(a, b)| [a, b]).collect();
        for (j, s) in by_part.iter().enumerate() {
            if j != me {
                if let Some(s) = s {
                    real.extend(s.virtuals.iter().flat_map(|v| v.members.iter().copied()));
                }
            }
        }
        real.sort_unstable();
        real.dedup();
        let node = |v: TermId| real.binary_search(&v).expect("endpoint present") as u32;

        let mut edges: Vec<(u32, u32)> = edges_t.iter().map(|&(a, b)| (node(a), node(b))).collect();
        let mut next = real.len() as u32;
        let mut remote_virtuals = 0;
        let mut is_remote_in = vec![false; real.len()];
        for (j, s) in by_part.iter().enumerate() {
            let Some(s) = s else { continue };
            if j == me {
                continue;
            }
            let base = next;
            for (vi, v) in s.virtuals.iter().enumerate() {
                let vn = base + vi as u32;
                for &m in &v.members {
                    let mn = node(m);
                    if v.is_in {
                        edges.push((mn, vn));
                        is_remote_in[mn as usize] = true;
                    }
                    if v.is_out {
                        edges.push((vn, mn));
                    }
                }
            }
            edges.extend(s.edges.iter().map(|&(a, b)| (base + a, base + b)));
            next += s.virtuals.len() as u32;
            remote_virtuals += s.virtuals.len();
        }
        let graph = Csr::from_edges(next as usize, &mut edges);
        let cond = condense(&graph);

        let mut entry_pairs: Vec<(u32, u32)> = (0..real.len())
            .filter(|&n| is_remote_in[n])
            .map(|n| (cond.comp_of[n], n as u32))
            .collect();
        let entry_owner = real.iter().map(|&v| assign.owner(v) as u16).collect::<Vec<_>>();
        let entries = Csr::grouped(cond.component_count(), &mut entry_pairs);

        let b = super::boundary::compute_boundaries(local, assign);
        let local_virtuals = by_part[me].map_or(0, |s| s.virtuals.len());
        let stats = CompoundStats {
            local_edges: local.edges.len(),
            cut_edges,
            in_boundaries: b.in_boundary.len(),
            out_boundaries: b.out_boundary.len(),
            local_virtuals,
            remote_virtuals,
            components: cond.component_count(),
        };
        Ok(CompoundDag {
            property: local.property,
            partition: me,
            real,
            comp_of: cond.comp_of,
            dag: cond.dag,
            entries,
            entry_owner,
            stats,
        })
    }

    pub fn property(&self) -> TermId {
        self.property
    }

    pub fn partition(&self) -> usize {
        self.partition
    }

    pub fn stats(&self) -> CompoundStats {
        self.stats
    }

    /// Every condensed edge runs from a lower to a higher component.
    pub fn is_acyclic(&self) -> bool {
        (0..self.dag.node_count() as u32).all(|c| self.dag.successors(c).iter().all(|&d| d > c))
    }

    pub fn real_vertices(&self) -> &[TermId] {
        &self.real
    }

    pub fn contains(&self, v: TermId) -> bool {
        self.real.binary_search(&v).is_ok()
    }

    /// Condensed node of a real vertex.
    pub fn component(&self, v: TermId) -> Option<u32> {
        self.real.binary_search(&v).ok().map(|n| self.comp_of[n])
    }

    pub fn scratch(&self) -> ReachScratch {
        ReachScratch { stamp: vec![0; self.dag.node_count()], generation: 0, visited: Vec::new(), stack: Vec::new() }
    }

    /// Marks every component reachable from any of `sources`. Sources
    /// absent from the graph are ignored.
    pub fn explore(&self, sources: impl IntoIterator<Item = TermId>, scratch: &mut ReachScratch) {
        scratch.reset(self.dag.node_count());
        for s in sources {
            if let Some(c) = self.component(s) {
                if scratch.mark(c) {
                    scratch.stack.push(c);
                }
            }
        }
        while let Some(c) = scratch.stack.pop() {
            for &d in self.dag.successors(c) {
                if scratch.mark(d) {
                    scratch.stack.push(d);
                }
            }
        }
    }

    /// Whether the last `explore` reached `v`.
    pub fn reached(&self, v: TermId, scratch: &ReachScratch) -> bool {
        self.component(v).is_some_and(|c| scratch.is_marked(c))
    }

    pub fn component_reached(&self, c: u32, scratch: &ReachScratch) -> bool {
        scratch.is_marked(c)
    }

    /// Condensed nodes marked by the last `explore`, in visiting order.
    pub fn reached_components<'s>(&self, scratch: &'s ReachScratch) -> &'s [u32] {
        &scratch.visited
    }

    /// Remote in-boundary vertices reached by the last `explore`, as
    /// `(owner, vertex)` pairs sorted.
    pub fn frontier(&self, scratch: &ReachScratch) -> Vec<(usize, TermId)> {
        let mut out: Vec<(usize, TermId)> = scratch
            .visited
            .iter()
            .flat_map(|&c| self.entries.successors(c))
            .map(|&n| (self.entry_owner[n as usize] as usize, self.real[n as usize]))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Per-thread traversal state, reusable across searches.
#[derive(Clone, Debug, Default)]
pub struct ReachScratch {
    stamp: Vec<u32>,
    generation: u32,
    visited: Vec<u32>,
    stack: Vec<u32>,
}

impl ReachScratch {
    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.visited.clear();
        self.stack.clear();
    }

    fn mark(&mut self, c: u32) -> bool {
        let s = &mut self.stamp[c as usize];
        if *s == self.generation {
            return false;
        }
        *s = self.generation;
        self.visited.push(c);
        true
    }

    fn is_marked(&self, c: u32) -> bool {
        self.stamp[c as usize] == self.generation
    }
}

/// Groups frontier pairs by owner.
pub fn group_by_owner(frontier: &[(usize, TermId)]) -> FxHashMap<usize, Vec<TermId>> {
    let mut m: FxHashMap<usize, Vec<TermId>> = FxHashMap::default();
    for &(o, v) in frontier {
        m.entry(o).or_default().push(v);
    }
    m
}
