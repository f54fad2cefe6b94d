//! Terms, dictionary encoding and triple ingestion.

mod dictionary;
pub mod ntriples;
mod term;

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashSet;

pub use dictionary::Dictionary;
pub use term::{EncodedTriple, Term, TermId, TermKind};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Exact size figures of the data graph and its per-property subgraphs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DataGraphMeta {
    /// |V_D|: distinct terms occurring as subject or object.
    pub vertex_count: usize,
    pub properties: BTreeSet<TermId>,
    /// |V^p| per property.
    pub property_vertices: BTreeMap<TermId, usize>,
    /// |E^p| per property (distinct triples).
    pub property_edges: BTreeMap<TermId, usize>,
}

impl DataGraphMeta {
    /// Computes the figures directly from a triple list (duplicates ignored).
    pub fn from_triples(triples: &[EncodedTriple]) -> Self {
        let distinct: FxHashSet<EncodedTriple> = triples.iter().copied().collect();
        let mut vertices = FxHashSet::default();
        let mut per_p: BTreeMap<TermId, FxHashSet<TermId>> = BTreeMap::new();
        let mut edges: BTreeMap<TermId, usize> = BTreeMap::new();
        for t in &distinct {
            vertices.insert(t.s);
            vertices.insert(t.o);
            let vp = per_p.entry(t.p).or_default();
            vp.insert(t.s);
            vp.insert(t.o);
            *edges.entry(t.p).or_default() += 1;
        }
        DataGraphMeta {
            vertex_count: vertices.len(),
            properties: per_p.keys().copied().collect(),
            property_vertices: per_p.into_iter().map(|(p, v)| (p, v.len())).collect(),
            property_edges: edges,
        }
    }

    pub fn vp(&self, p: TermId) -> usize {
        self.property_vertices.get(&p).copied().unwrap_or(0)
    }

    pub fn ep(&self, p: TermId) -> usize {
        self.property_edges.get(&p).copied().unwrap_or(0)
    }
}
