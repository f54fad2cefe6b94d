//! Vertex-to-partition assignment and triple sharding.
//!
//! A triple `(s, p, o)` lives at the owner of `s` (subject group) and at the
//! owner of `o` (object group); when both owners coincide it is stored once.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rdf::{Dictionary, EncodedTriple, Term, TermId};

const UNASSIGNED: u16 = u16::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Fallback {
    Hash,
    None,
}

/// Total function from vertex ids to partitions `0..k`.
///
/// Owners depend only on the id, `k` and the explicit map, so reloading the
/// same data with the same dictionary reproduces the same shards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionAssignment {
    k: usize,
    table: Vec<u16>,
    fallback: Fallback,
}

impl PartitionAssignment {
    /// `owner(v) = v mod k`.
    pub fn hash(k: usize) -> Self {
        assert!(k >= 1, "k must be at least 1");
        assert!(k < UNASSIGNED as usize);
        PartitionAssignment { k, table: Vec::new(), fallback: Fallback::Hash }
    }

    /// An explicit map. With `hash_fallback` unlisted vertices fall back to
    /// `v mod k`; without it they are uncovered.
    pub fn from_map(
        k: usize,
        entries: impl IntoIterator<Item = (TermId, usize)>,
        hash_fallback: bool,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let mut table = Vec::new();
        for (v, part) in entries {
            if part >= k {
                return Err(Error::PartitionOutOfRange { index: part, k });
            }
            if table.len() <= v.index() {
                table.resize(v.index() + 1, UNASSIGNED);
            }
            table[v.index()] = part as u16;
        }
        let fallback = if hash_fallback { Fallback::Hash } else { Fallback::None };
        Ok(PartitionAssignment { k, table, fallback })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_hash(&self) -> bool {
        self.table.is_empty() && self.fallback == Fallback::Hash
    }

    pub fn try_owner(&self, v: TermId) -> Option<usize> {
        match self.table.get(v.index()) {
            Some(&p) if p != UNASSIGNED => Some(p as usize),
            _ => match self.fallback {
                Fallback::Hash => Some(v.index() % self.k),
                Fallback::None => None,
            },
        }
    }

    /// Owner of `v`. Panics if the assignment does not cover `v`; stores
    /// only hold covered assignments.
    #[inline]
    pub fn owner(&self, v: TermId) -> usize {
        self.try_owner(v).unwrap_or_else(|| panic!("vertex {v} is not covered"))
    }

    /// Explicitly listed owners, by id.
    pub fn explicit_entries(&self) -> Vec<(TermId, usize)> {
        self.table
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != UNASSIGNED)
            .map(|(v, &p)| (TermId(v as u32), p as usize))
            .collect()
    }

    pub fn has_hash_fallback(&self) -> bool {
        self.fallback == Fallback::Hash
    }

    /// Checks totality over the given vertices.
    pub fn check_covers(&self, vertices: impl IntoIterator<Item = TermId>) -> Result<()> {
        for v in vertices {
            if self.try_owner(v).is_none() {
                return Err(Error::UncoveredVertex(v));
            }
        }
        Ok(())
    }
}

/// A triple together with the partitions it is shipped to.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ShardedTriple {
    pub triple: EncodedTriple,
    pub subject_owner: usize,
    pub object_owner: usize,
}

impl ShardedTriple {
    /// Partitions holding a copy: one or two.
    pub fn destinations(&self) -> impl Iterator<Item = usize> {
        let second = (self.object_owner != self.subject_owner).then_some(self.object_owner);
        std::iter::once(self.subject_owner).chain(second)
    }
}

pub fn assign_hash(t: EncodedTriple, k: usize) -> ShardedTriple {
    ShardedTriple {
        triple: t,
        subject_owner: t.s.index() % k,
        object_owner: t.o.index() % k,
    }
}

pub fn assign_custom(t: EncodedTriple, map: &PartitionAssignment) -> Result<ShardedTriple> {
    let subject_owner = map.try_owner(t.s).ok_or(Error::UncoveredVertex(t.s))?;
    let object_owner = map.try_owner(t.o).ok_or(Error::UncoveredVertex(t.o))?;
    Ok(ShardedTriple { triple: t, subject_owner, object_owner })
}

/// Parses `termLexical<TAB>partitionIndex` lines. Terms may be written
/// bare (taken as IRIs), in angle brackets, or as quoted literals.
pub fn parse_partition_file<R: BufRead>(input: R, k: usize) -> Result<Vec<(Term, usize)>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::MalformedPartitionLine { line: n + 1, reason: reason.into() };
        let (lex, idx) = trimmed.rsplit_once('\t').ok_or_else(|| bad("expected term<TAB>index"))?;
        let idx: usize = idx.trim().parse().map_err(|_| bad("partition index is not a number"))?;
        if idx >= k {
            return Err(Error::PartitionOutOfRange { index: idx, k });
        }
        let term = if lex.starts_with('<') || lex.starts_with('"') {
            Term::parse_rendered(lex).ok_or_else(|| bad("bad term"))?
        } else if lex.is_empty() {
            return Err(bad("empty term"));
        } else {
            Term::iri(lex)
        };
        out.push((term, idx));
    }
    Ok(out)
}

/// Loads a partition file and resolves its terms against the dictionary.
/// Unlisted vertices fall back to hash ownership; terms absent from the
/// dictionary are ignored.
pub fn load_partition_file(path: &Path, k: usize, dict: &Dictionary) -> Result<PartitionAssignment> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let entries = parse_partition_file(BufReader::new(file), k)?;
    resolve_entries(entries, k, dict)
}

pub fn resolve_entries(
    entries: Vec<(Term, usize)>,
    k: usize,
    dict: &Dictionary,
) -> Result<PartitionAssignment> {
    let mut resolved = Vec::with_capacity(entries.len());
    for (term, part) in entries {
        match dict.lookup(&term) {
            Some(id) => resolved.push((id, part)),
            None => log::warn!("partition file term {term} does not occur in the data"),
        }
    }
    PartitionAssignment::from_map(k, resolved, true)
}
