//! Per-property distributed reachability index.
//!
//! Every partition keeps a condensed compound graph: its own p-subgraph,
//! all p-labeled cut edges and a compressed in-to-out summary of every
//! other partition. A reachability test runs at the owner of the source;
//! when the target lives elsewhere the search hands the remote in-boundary
//! vertices it reached to the target's owner, which finishes locally.

pub mod boundary;
mod compound;
pub mod scc;
pub(crate) mod snapshot;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use boundary::{
    build_bipartite_summary, compress_boundaries, compute_boundaries, BipartiteSummary, BoundarySets,
    PropertySubgraph, VirtualSets, VirtualVertex,
};
pub use compound::{group_by_owner, CompoundDag, CompoundStats, ReachScratch};

use crate::error::{Error, Result};
use crate::index::PartitionIndexes;
use crate::partition::PartitionAssignment;
use crate::rdf::TermId;

/// The compound graphs of one property, one per partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachIndex {
    property: TermId,
    dags: Vec<CompoundDag>,
}

impl ReachIndex {
    pub fn build(partitions: &[PartitionIndexes], assign: &PartitionAssignment, property: TermId) -> Result<Self> {
        let subgraphs: Vec<PropertySubgraph> = (0..partitions.len())
            .map(|i| PropertySubgraph::extract(partitions, property, i))
            .collect::<Result<_>>()?;
        let summaries: Vec<BipartiteSummary> = subgraphs
            .par_iter()
            .map(|g| {
                let b = compute_boundaries(g, assign);
                let v = compress_boundaries(g, &b, assign);
                build_bipartite_summary(g, &b, &v, assign)
            })
            .collect();
        let dags = subgraphs
            .par_iter()
            .map(|g| CompoundDag::assemble(g, &summaries, assign))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReachIndex { property, dags })
    }

    pub(crate) fn from_dags(property: TermId, dags: Vec<CompoundDag>) -> Self {
        ReachIndex { property, dags }
    }

    pub fn property(&self) -> TermId {
        self.property
    }

    pub fn partition(&self, i: usize) -> &CompoundDag {
        &self.dags[i]
    }

    pub fn partitions(&self) -> &[CompoundDag] {
        &self.dags
    }

    /// Reflexive-transitive reachability along p-edges, run the way the
    /// engine runs it: search at the source's owner, then hand over the
    /// frontier to the target's owner.
    pub fn reaches(&self, assign: &PartitionAssignment, s: TermId, t: TermId) -> bool {
        if s == t {
            return true;
        }
        let home = &self.dags[assign.owner(s)];
        let mut scratch = home.scratch();
        home.explore([s], &mut scratch);
        let target_owner = assign.owner(t);
        if target_owner == home.partition() {
            return home.reached(t, &scratch);
        }
        let entries: Vec<TermId> =
            home.frontier(&scratch).into_iter().filter(|&(o, _)| o == target_owner).map(|(_, v)| v).collect();
        if entries.is_empty() {
            return false;
        }
        let remote = &self.dags[target_owner];
        let mut scratch = remote.scratch();
        remote.explore(entries, &mut scratch);
        remote.reached(t, &scratch)
    }

    /// `reaches` for many pairs, one search per distinct source and one
    /// scratch per partition.
    pub fn reaches_many(&self, assign: &PartitionAssignment, pairs: &[(TermId, TermId)]) -> Vec<bool> {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_unstable_by_key(|&i| pairs[i]);
        let mut scratches: Vec<Option<ReachScratch>> = vec![None; self.dags.len()];
        let mut out = vec![false; pairs.len()];
        let mut i = 0;
        while i < order.len() {
            let s = pairs[order[i]].0;
            let mut j = i;
            while j < order.len() && pairs[order[j]].0 == s {
                j += 1;
            }
            let home = &self.dags[assign.owner(s)];
            let mut hs = scratches[home.partition()].take().unwrap_or_else(|| home.scratch());
            home.explore([s], &mut hs);
            let frontier = group_by_owner(&home.frontier(&hs));
            let mut remote_done: Vec<usize> = Vec::new();
            for &idx in &order[i..j] {
                let t = pairs[idx].1;
                let owner = assign.owner(t);
                out[idx] = if s == t {
                    true
                } else if owner == home.partition() {
                    home.reached(t, &hs)
                } else if let Some(entries) = frontier.get(&owner) {
                    let remote = &self.dags[owner];
                    let rs = scratches[owner].get_or_insert_with(|| remote.scratch());
                    if !remote_done.contains(&owner) {
                        remote.explore(entries.iter().copied(), rs);
                        remote_done.push(owner);
                    }
                    remote.reached(t, rs)
                } else {
                    false
                };
            }
            scratches[home.partition()] = Some(hs);
            i = j;
        }
        out
    }

    /// V^p, sorted: every vertex with a p-edge, collected at its owner.
    pub fn vertices(&self) -> Vec<TermId> {
        let mut v: Vec<TermId> = self
            .dags
            .iter()
            .flat_map(|d| {
                d.real.iter().zip(&d.entry_owner).filter(|(_, &o)| o as usize == d.partition).map(|(&v, _)| v)
            })
            .collect();
        v.sort_unstable();
        v
    }
}

/// Reach indexes for every property of the data.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReachIndexes {
    by_property: BTreeMap<TermId, ReachIndex>,
}

impl ReachIndexes {
    pub fn build(
        partitions: &[PartitionIndexes],
        assign: &PartitionAssignment,
        properties: impl IntoIterator<Item = TermId>,
    ) -> Result<Self> {
        let props: Vec<TermId> = properties.into_iter().collect();
        let built: Vec<ReachIndex> =
            props.par_iter().map(|&p| ReachIndex::build(partitions, assign, p)).collect::<Result<_>>()?;
        Ok(ReachIndexes { by_property: built.into_iter().map(|r| (r.property, r)).collect() })
    }

    pub(crate) fn from_map(by_property: BTreeMap<TermId, ReachIndex>) -> Self {
        ReachIndexes { by_property }
    }

    pub fn get(&self, p: TermId) -> Option<&ReachIndex> {
        self.by_property.get(&p)
    }

    pub fn require(&self, p: TermId, name: &str) -> Result<&ReachIndex> {
        self.get(p).ok_or_else(|| Error::MissingReachIndex(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermId, &ReachIndex)> {
        self.by_property.iter()
    }

    pub fn len(&self) -> usize {
        self.by_property.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_property.is_empty()
    }
}
