//! Six-permutation sorted triple indexes, one set per partition.
//!
//! The subject-key permutations (SPO, SOP, PSO) hold the triples whose
//! subject this partition owns; the object-key permutations (OSP, OPS, POS)
//! hold those whose object it owns. Each permutation is a dense array sorted
//! by its component order; a scan binary-searches the bound prefix and then
//! reads sequentially.

mod snapshot;

use std::fmt;

use crate::partition::ShardedTriple;
use crate::rdf::{EncodedTriple, TermId};

pub use snapshot::{read_partition, write_partition};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    S,
    P,
    O,
}

impl Position {
    pub fn of(self, t: &EncodedTriple) -> TermId {
        match self {
            Position::S => t.s,
            Position::P => t.p,
            Position::O => t.o,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    /// Triples hashed here by their subject.
    Subject,
    /// Triples hashed here by their object.
    Object,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Permutation {
    Spo,
    Sop,
    Pso,
    Osp,
    Ops,
    Pos,
}

impl Permutation {
    /// Fixed preference order, also the storage order.
    pub const ALL: [Permutation; 6] = [
        Permutation::Spo,
        Permutation::Sop,
        Permutation::Pso,
        Permutation::Osp,
        Permutation::Ops,
        Permutation::Pos,
    ];

    pub fn order(self) -> [Position; 3] {
        use Position::*;
        match self {
            Permutation::Spo => [S, P, O],
            Permutation::Sop => [S, O, P],
            Permutation::Pso => [P, S, O],
            Permutation::Osp => [O, S, P],
            Permutation::Ops => [O, P, S],
            Permutation::Pos => [P, O, S],
        }
    }

    pub fn group(self) -> Group {
        match self {
            Permutation::Spo | Permutation::Sop | Permutation::Pso => Group::Subject,
            _ => Group::Object,
        }
    }

    #[inline]
    pub fn key(self, t: &EncodedTriple) -> [TermId; 3] {
        let [a, b, c] = self.order();
        [a.of(t), b.of(t), c.of(t)]
    }

    fn slot(self) -> usize {
        self as usize
    }

    /// Whether the bound positions form a prefix of this order.
    pub fn matches(self, bound: Bound) -> bool {
        let n = bound.count();
        self.order()[..n].iter().all(|p| bound.has(*p))
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Permutation::Spo => "SPO",
            Permutation::Sop => "SOP",
            Permutation::Pso => "PSO",
            Permutation::Osp => "OSP",
            Permutation::Ops => "OPS",
            Permutation::Pos => "POS",
        };
        f.write_str(s)
    }
}

/// Which of the three triple positions carry constants.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct Bound {
    pub s: bool,
    pub p: bool,
    pub o: bool,
}

impl Bound {
    pub fn new(s: bool, p: bool, o: bool) -> Self {
        Bound { s, p, o }
    }

    pub fn has(self, pos: Position) -> bool {
        match pos {
            Position::S => self.s,
            Position::P => self.p,
            Position::O => self.o,
        }
    }

    pub fn count(self) -> usize {
        self.s as usize + self.p as usize + self.o as usize
    }
}

/// Picks the first permutation, in preference order, whose prefix covers
/// exactly the constant positions.
pub fn select_permutation(bound: Bound) -> Permutation {
    Permutation::ALL
        .into_iter()
        .find(|p| p.matches(bound))
        .expect("every constant set is a prefix of some permutation")
}

/// Like [`select_permutation`] but restricted to one sharding group.
pub fn select_in_group(bound: Bound, group: Group) -> Option<Permutation> {
    Permutation::ALL.into_iter().find(|p| p.group() == group && p.matches(bound))
}

/// One sorted permutation array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationIndex {
    order: Permutation,
    rows: Vec<EncodedTriple>,
}

impl PermutationIndex {
    pub fn build(order: Permutation, mut rows: Vec<EncodedTriple>) -> Self {
        rows.sort_unstable_by_key(|t| order.key(t));
        rows.dedup();
        PermutationIndex { order, rows }
    }

    pub(crate) fn from_sorted(order: Permutation, rows: Vec<EncodedTriple>) -> Self {
        PermutationIndex { order, rows }
    }

    pub fn order(&self) -> Permutation {
        self.order
    }

    pub fn group(&self) -> Group {
        self.order.group()
    }

    pub fn rows(&self) -> &[EncodedTriple] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose leading components equal `prefix` (at most three values),
    /// in index order. An empty prefix is a full scan.
    pub fn scan(&self, prefix: &[TermId]) -> &[EncodedTriple] {
        debug_assert!(prefix.len() <= 3);
        let n = prefix.len();
        let order = self.order;
        let lo = self.rows.partition_point(|t| order.key(t)[..n] < *prefix);
        let hi = lo + self.rows[lo..].partition_point(|t| order.key(t)[..n] == *prefix);
        &self.rows[lo..hi]
    }

    pub(crate) fn is_strictly_sorted(&self) -> bool {
        self.rows.windows(2).all(|w| self.order.key(&w[0]) < self.order.key(&w[1]))
    }
}

/// A scan request: the permutation to use and the constants of its prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanPattern {
    pub permutation: Permutation,
    pub prefix: Vec<TermId>,
}

impl ScanPattern {
    /// Builds the prefix for `permutation` from optional constants. Returns
    /// `None` if the constants are not a prefix of the permutation order.
    pub fn new(
        permutation: Permutation,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Option<Self> {
        let bound = Bound::new(s.is_some(), p.is_some(), o.is_some());
        if !permutation.matches(bound) {
            return None;
        }
        let prefix = permutation.order()[..bound.count()]
            .iter()
            .map(|pos| match pos {
                Position::S => s.unwrap(),
                Position::P => p.unwrap(),
                Position::O => o.unwrap(),
            })
            .collect();
        Some(ScanPattern { permutation, prefix })
    }
}

/// The six permutation arrays of one partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionIndexes {
    partition: usize,
    perms: [PermutationIndex; 6],
}

impl PartitionIndexes {
    /// Builds all six permutations from the triples shipped to `partition`.
    /// Triples subject-owned here go to the subject-key group, object-owned
    /// ones to the object-key group; duplicates collapse.
    pub fn build(shard: impl IntoIterator<Item = ShardedTriple>, partition: usize) -> Self {
        let mut by_subject = Vec::new();
        let mut by_object = Vec::new();
        for st in shard {
            if st.subject_owner == partition {
                by_subject.push(st.triple);
            }
            if st.object_owner == partition {
                by_object.push(st.triple);
            }
        }
        Self::from_groups(partition, by_subject, by_object)
    }

    pub fn from_groups(
        partition: usize,
        by_subject: Vec<EncodedTriple>,
        by_object: Vec<EncodedTriple>,
    ) -> Self {
        let perms = Permutation::ALL.map(|p| match p.group() {
            Group::Subject => PermutationIndex::build(p, by_subject.clone()),
            Group::Object => PermutationIndex::build(p, by_object.clone()),
        });
        PartitionIndexes { partition, perms }
    }

    pub(crate) fn from_parts(partition: usize, perms: [PermutationIndex; 6]) -> Self {
        PartitionIndexes { partition, perms }
    }

    pub fn partition(&self) -> usize {
        self.partition
    }

    pub fn get(&self, order: Permutation) -> &PermutationIndex {
        &self.perms[order.slot()]
    }

    pub fn scan(&self, pattern: &ScanPattern) -> &[EncodedTriple] {
        self.get(pattern.permutation).scan(&pattern.prefix)
    }

    /// Distinct triples subject-owned by this partition.
    pub fn subject_group(&self) -> &[EncodedTriple] {
        self.get(Permutation::Spo).rows()
    }

    /// Distinct triples object-owned by this partition.
    pub fn object_group(&self) -> &[EncodedTriple] {
        self.get(Permutation::Osp).rows()
    }

    /// p-edges leaving `v`; complete when `v` is owned here.
    pub fn out_edges(&self, p: TermId, v: TermId) -> &[EncodedTriple] {
        self.get(Permutation::Pso).scan(&[p, v])
    }

    /// p-edges entering `v`; complete when `v` is owned here.
    pub fn in_edges(&self, p: TermId, v: TermId) -> &[EncodedTriple] {
        self.get(Permutation::Pos).scan(&[p, v])
    }

    /// Whether `v` occurs as subject or object here; exact for owned `v`.
    pub fn has_vertex(&self, v: TermId) -> bool {
        !self.get(Permutation::Spo).scan(&[v]).is_empty()
            || !self.get(Permutation::Osp).scan(&[v]).is_empty()
    }

    pub fn permutations(&self) -> &[PermutationIndex; 6] {
        &self.perms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{assign_hash, PartitionAssignment};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(s: u32, p: u32, o: u32) -> EncodedTriple {
        EncodedTriple::from_raw(s, p, o)
    }

    fn single(triples: &[EncodedTriple]) -> PartitionIndexes {
        PartitionIndexes::build(triples.iter().map(|&x| assign_hash(x, 1)), 0)
    }

    #[test]
    fn cardinality_preserved_and_deduplicated() {
        let idx = single(&[t(1, 2, 3), t(3, 2, 1), t(1, 4, 1), t(1, 2, 3)]);
        for p in idx.permutations() {
            assert_eq!(p.len(), 3);
            assert!(p.is_strictly_sorted());
        }
    }

    #[test]
    fn permutation_selection() {
        assert_eq!(select_permutation(Bound::new(true, true, false)), Permutation::Spo);
        assert_eq!(select_permutation(Bound::new(false, true, false)), Permutation::Pso);
        assert_eq!(select_in_group(Bound::new(false, true, false), Group::Object), Some(Permutation::Pos));
        assert_eq!(select_permutation(Bound::default()), Permutation::Spo);
        assert_eq!(select_permutation(Bound::new(false, true, true)), Permutation::Ops);
        assert_eq!(select_in_group(Bound::new(false, true, true), Group::Subject), None);
        assert_eq!(select_permutation(Bound::new(true, false, true)), Permutation::Sop);
        assert_eq!(select_permutation(Bound::new(false, false, true)), Permutation::Osp);
        assert_eq!(select_permutation(Bound::new(true, true, true)), Permutation::Spo);
    }

    #[test]
    fn ops_prefix_scan() {
        let idx = single(&[t(5, 1, 7), t(2, 1, 7), t(3, 0, 7), t(4, 1, 8)]);
        let got = idx.get(Permutation::Ops).scan(&[TermId(7)]);
        assert_eq!(got, &[t(3, 0, 7), t(2, 1, 7), t(5, 1, 7)]);
        assert!(idx.get(Permutation::Ops).scan(&[TermId(99)]).is_empty());
        assert_eq!(idx.get(Permutation::Ops).scan(&[]).len(), 4);
    }

    #[test]
    fn scan_pattern_prefix_validation() {
        let sp = ScanPattern::new(Permutation::Pos, None, Some(TermId(1)), Some(TermId(2))).unwrap();
        assert_eq!(sp.prefix, vec![TermId(1), TermId(2)]);
        assert!(ScanPattern::new(Permutation::Pso, None, None, Some(TermId(2))).is_none());
    }

    #[test]
    fn ops_order_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let triples: Vec<_> =
            (0..10_000).map(|_| t(rng.gen_range(0..500), rng.gen_range(0..20), rng.gen_range(0..500))).collect();
        let idx = single(&triples);
        let mut oracle: Vec<(u32, u32, u32)> = triples.iter().map(|x| (x.o.0, x.p.0, x.s.0)).collect();
        oracle.sort();
        oracle.dedup();
        let got: Vec<(u32, u32, u32)> =
            idx.get(Permutation::Ops).rows().iter().map(|x| (x.o.0, x.p.0, x.s.0)).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn scans_equal_linear_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let triples: Vec<_> =
            (0..3000).map(|_| t(rng.gen_range(0..60), rng.gen_range(0..6), rng.gen_range(0..60))).collect();
        let idx = single(&triples);
        let mut distinct = triples.clone();
        distinct.sort();
        distinct.dedup();
        for _ in 0..1000 {
            let s = rng.gen_bool(0.5).then(|| TermId(rng.gen_range(0..60)));
            let p = rng.gen_bool(0.5).then(|| TermId(rng.gen_range(0..6)));
            let o = rng.gen_bool(0.5).then(|| TermId(rng.gen_range(0..60)));
            let perm = select_permutation(Bound::new(s.is_some(), p.is_some(), o.is_some()));
            let pat = ScanPattern::new(perm, s, p, o).unwrap();
            let mut got = idx.scan(&pat).to_vec();
            got.sort();
            let want: Vec<_> = distinct
                .iter()
                .filter(|x| s.map_or(true, |v| x.s == v) && p.map_or(true, |v| x.p == v) && o.map_or(true, |v| x.o == v))
                .copied()
                .collect();
            assert_eq!(got, want);
        }
    }

    proptest! {
        #[test]
        fn partitions_cover_the_triple_set(
            raw in proptest::collection::vec((0u32..40, 0u32..4, 0u32..40), 0..300),
            k in 1usize..5,
        ) {
            let triples: Vec<_> = raw.iter().map(|&(s, p, o)| t(s, p, o)).collect();
            let assignment = PartitionAssignment::hash(k);
            let parts: Vec<PartitionIndexes> = (0..k)
                .map(|i| {
                    let shard = triples.iter().map(|&x| assign_hash(x, k)).filter(|st| st.destinations().any(|d| d == i));
                    PartitionIndexes::build(shard, i)
                })
                .collect();
            let mut distinct = triples.clone();
            distinct.sort();
            distinct.dedup();

            let mut subj: Vec<_> = parts.iter().flat_map(|p| p.subject_group().to_vec()).collect();
            subj.sort();
            prop_assert_eq!(&subj, &distinct);
            let mut obj: Vec<_> = parts.iter().flat_map(|p| p.object_group().to_vec()).collect();
            obj.sort();
            prop_assert_eq!(&obj, &distinct);

            for part in &parts {
                for row in part.subject_group() {
                    prop_assert_eq!(assignment.owner(row.s), part.partition());
                }
                for row in part.object_group() {
                    prop_assert_eq!(assignment.owner(row.o), part.partition());
                }
                for perm in part.permutations() {
                    prop_assert!(perm.is_strictly_sorted());
                }
            }
        }
    }
}
