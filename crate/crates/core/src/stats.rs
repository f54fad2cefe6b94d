//! Statistics for the cost model: exact cardinalities, exact pairwise join
//! selectivities and sampled reachability selectivities.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::index::{PartitionIndexes, Permutation};
use crate::partition::PartitionAssignment;
use crate::rdf::{DataGraphMeta, TermId};
use crate::reach::ReachIndexes;

pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Which endpoint of each pattern carries the shared variable: `SO` joins
/// the subject of the first pattern with the object of the second.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinRole {
    SS,
    SO,
    OS,
    OO,
}

impl JoinRole {
    pub const ALL: [JoinRole; 4] = [JoinRole::SS, JoinRole::SO, JoinRole::OS, JoinRole::OO];

    pub fn new(first_is_subject: bool, second_is_subject: bool) -> Self {
        match (first_is_subject, second_is_subject) {
            (true, true) => JoinRole::SS,
            (true, false) => JoinRole::SO,
            (false, true) => JoinRole::OS,
            (false, false) => JoinRole::OO,
        }
    }

    /// The same join seen from the other pattern.
    pub fn flipped(self) -> Self {
        match self {
            JoinRole::SO => JoinRole::OS,
            JoinRole::OS => JoinRole::SO,
            r => r,
        }
    }
}

impl fmt::Display for JoinRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JoinRole::SS => "SS",
            JoinRole::SO => "SO",
            JoinRole::OS => "OS",
            JoinRole::OO => "OO",
        })
    }
}

impl FromStr for JoinRole {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        JoinRole::ALL.into_iter().find(|r| r.to_string() == s).ok_or(())
    }
}

type Pair = (TermId, TermId);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsCatalog {
    pub triples: u64,
    pub card_s: FxHashMap<TermId, u64>,
    pub card_p: BTreeMap<TermId, u64>,
    pub card_o: FxHashMap<TermId, u64>,
    pub card_so: FxHashMap<Pair, u64>,
    pub card_ps: FxHashMap<Pair, u64>,
    pub card_po: FxHashMap<Pair, u64>,
    /// Only nonzero selectivities are stored.
    pub join_sel: BTreeMap<(TermId, TermId, JoinRole), f64>,
    pub reach_sel: BTreeMap<TermId, f64>,
    pub meta: DataGraphMeta,
    pub sample_size: usize,
    pub seed: u64,
}

#[derive(Default)]
struct Partial {
    triples: u64,
    card_s: FxHashMap<TermId, u64>,
    card_p: FxHashMap<TermId, u64>,
    card_o: FxHashMap<TermId, u64>,
    card_so: FxHashMap<Pair, u64>,
    card_ps: FxHashMap<Pair, u64>,
    card_po: FxHashMap<Pair, u64>,
    joins: FxHashMap<(TermId, TermId, JoinRole), u64>,
    vertices: usize,
    vp: FxHashMap<TermId, usize>,
}

fn add<K: std::hash::Hash + Eq>(into: &mut FxHashMap<K, u64>, from: FxHashMap<K, u64>) {
    if into.is_empty() {
        *into = from;
        return;
    }
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
}

/// Runs of `(key, property, count)` from a permutation whose order starts
/// with the vertex and then the property.
fn degree_runs(rows: &[crate::rdf::EncodedTriple], vertex: impl Fn(&crate::rdf::EncodedTriple) -> TermId) -> Vec<(TermId, TermId, u64)> {
    let mut out: Vec<(TermId, TermId, u64)> = Vec::new();
    for t in rows {
        let v = vertex(t);
        match out.last_mut() {
            Some(last) if last.0 == v && last.1 == t.p => last.2 += 1,
            _ => out.push((v, t.p, 1)),
        }
    }
    out
}

fn partial_stats(idx: &PartitionIndexes) -> Partial {
    let mut part = Partial::default();
    for t in idx.subject_group() {
        part.triples += 1;
        *part.card_s.entry(t.s).or_default() += 1;
        *part.card_p.entry(t.p).or_default() += 1;
        *part.card_o.entry(t.o).or_default() += 1;
        *part.card_so.entry((t.s, t.o)).or_default() += 1;
        *part.card_ps.entry((t.p, t.s)).or_default() += 1;
        *part.card_po.entry((t.p, t.o)).or_default() += 1;
    }
    // Subject-group rows have owned subjects, object-group rows owned objects.
    let outs = degree_runs(idx.get(Permutation::Spo).rows(), |t| t.s);
    let ins = degree_runs(idx.get(Permutation::Ops).rows(), |t| t.o);
    let (mut i, mut j) = (0, 0);
    let mut vp_seen: Vec<TermId> = Vec::new();
    while i < outs.len() || j < ins.len() {
        let v = match (outs.get(i), ins.get(j)) {
            (Some(a), Some(b)) => a.0.min(b.0),
            (Some(a), None) => a.0,
            (None, Some(b)) => b.0,
            (None, None) => unreachable!(),
        };
        let i0 = i;
        while i < outs.len() && outs[i].0 == v {
            i += 1;
        }
        let j0 = j;
        while j < ins.len() && ins[j].0 == v {
            j += 1;
        }
        let (o, n) = (&outs[i0..i], &ins[j0..j]);
        part.vertices += 1;
        vp_seen.clear();
        vp_seen.extend(o.iter().chain(n).map(|r| r.1));
        vp_seen.sort_unstable();
        vp_seen.dedup();
        for &p in &vp_seen {
            *part.vp.entry(p).or_default() += 1;
        }
        for (first, first_subj) in [(o, true), (n, false)] {
            for (second, second_subj) in [(o, true), (n, false)] {
                let role = JoinRole::new(first_subj, second_subj);
                for a in first {
                    for b in second {
                        *part.joins.entry((a.1, b.1, role)).or_default() += a.2 * b.2;
                    }
                }
            }
        }
    }
    part
}

impl StatsCatalog {
    /// Aggregates per-partition counts and samples reachability
    /// selectivities for every property with a reach index.
    pub fn compute(
        partitions: &[PartitionIndexes],
        assign: &PartitionAssignment,
        reach: &ReachIndexes,
        sample_size: usize,
        seed: u64,
    ) -> Self {
        let partials: Vec<Partial> = partitions.par_iter().map(partial_stats).collect();
        let mut total = Partial::default();
        let mut vp: BTreeMap<TermId, usize> = BTreeMap::new();
        for p in partials {
            total.triples += p.triples;
            add(&mut total.card_s, p.card_s);
            add(&mut total.card_p, p.card_p);
            add(&mut total.card_o, p.card_o);
            add(&mut total.card_so, p.card_so);
            add(&mut total.card_ps, p.card_ps);
            add(&mut total.card_po, p.card_po);
            add(&mut total.joins, p.joins);
            total.vertices += p.vertices;
            for (k, v) in p.vp {
                *vp.entry(k).or_default() += v;
            }
        }
        let card_p: BTreeMap<TermId, u64> = total.card_p.into_iter().collect();
        let join_sel = total
            .joins
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|((a, b, r), c)| ((a, b, r), c as f64 / (card_p[&a] as f64 * card_p[&b] as f64)))
            .collect();
        let meta = DataGraphMeta {
            vertex_count: total.vertices,
            properties: card_p.keys().copied().collect(),
            property_vertices: vp,
            property_edges: card_p.iter().map(|(&p, &c)| (p, c as usize)).collect(),
        };
        let reach_sel = reach
            .iter()
            .map(|(&p, _)| (p, sample_reach_selectivity(reach, assign, p, sample_size, seed).unwrap_or(0.0)))
            .collect();
        StatsCatalog {
            triples: total.triples,
            card_s: total.card_s,
            card_p,
            card_o: total.card_o,
            card_so: total.card_so,
            card_ps: total.card_ps,
            card_po: total.card_po,
            join_sel,
            reach_sel,
            meta,
            sample_size,
            seed,
        }
    }

    pub fn card_property(&self, p: TermId) -> u64 {
        self.card_p.get(&p).copied().unwrap_or(0)
    }

    pub fn card_ps(&self, p: TermId, s: TermId) -> u64 {
        self.card_ps.get(&(p, s)).copied().unwrap_or(0)
    }

    pub fn card_po(&self, p: TermId, o: TermId) -> u64 {
        self.card_po.get(&(p, o)).copied().unwrap_or(0)
    }

    pub fn card_so(&self, s: TermId, o: TermId) -> u64 {
        self.card_so.get(&(s, o)).copied().unwrap_or(0)
    }

    pub fn join_selectivity(&self, a: TermId, b: TermId, role: JoinRole) -> f64 {
        self.join_sel.get(&(a, b, role)).copied().unwrap_or(0.0)
    }

    pub fn reach_selectivity(&self, p: TermId) -> f64 {
        self.reach_sel.get(&p).copied().unwrap_or(0.0)
    }

    /// Writes `kind<TAB>key...<TAB>value` lines in a canonical order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "triples\t{}", self.triples)?;
        writeln!(w, "vertices\t{}", self.meta.vertex_count)?;
        writeln!(w, "sample\t{}\t{}", self.sample_size, self.seed)?;
        fn sorted<K: Ord + Copy, V: Copy>(m: &FxHashMap<K, V>) -> Vec<(K, V)> {
            let mut v: Vec<(K, V)> = m.iter().map(|(&k, &v)| (k, v)).collect();
            v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            v
        }
        for (p, c) in &self.card_p {
            writeln!(w, "card_p\t{p}\t{c}")?;
        }
        for (k, c) in sorted(&self.card_s) {
            writeln!(w, "card_s\t{k}\t{c}")?;
        }
        for (k, c) in sorted(&self.card_o) {
            writeln!(w, "card_o\t{k}\t{c}")?;
        }
        for ((a, b), c) in sorted(&self.card_so) {
            writeln!(w, "card_so\t{a}\t{b}\t{c}")?;
        }
        for ((a, b), c) in sorted(&self.card_ps) {
            writeln!(w, "card_ps\t{a}\t{b}\t{c}")?;
        }
        for ((a, b), c) in sorted(&self.card_po) {
            writeln!(w, "card_po\t{a}\t{b}\t{c}")?;
        }
        for (p, n) in &self.meta.property_vertices {
            writeln!(w, "vp\t{p}\t{n}")?;
        }
        for ((a, b, r), s) in &self.join_sel {
            writeln!(w, "join\t{a}\t{b}\t{r}\t{s}")?;
        }
        for (p, s) in &self.reach_sel {
            writeln!(w, "reach\t{p}\t{s}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut c = StatsCatalog::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::Catalog { line: n + 1, reason: reason.into() };
            let f: Vec<&str> = line.split('\t').collect();
            let int = |i: usize| -> Result<u64> {
                f.get(i).and_then(|x| x.parse().ok()).ok_or_else(|| bad("expected an integer"))
            };
            let id = |i: usize| -> Result<TermId> { int(i).map(|v| TermId(v as u32)) };
            let real = |i: usize| -> Result<f64> {
                let v: f64 = f.get(i).and_then(|x| x.parse().ok()).ok_or_else(|| bad("expected a number"))?;
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(bad("selectivity outside [0, 1]"))
                }
            };
            let arity = match f[0] {
                "triples" | "vertices" => 2,
                "sample" | "card_p" | "card_s" | "card_o" | "vp" | "reach" => 3,
                "card_so" | "card_ps" | "card_po" => 4,
                "join" => 5,
                _ => return Err(bad("unknown record kind")),
            };
            if f.len() != arity {
                return Err(bad("wrong field count"));
            }
            match f[0] {
                "triples" => c.triples = int(1)?,
                "vertices" => c.meta.vertex_count = int(1)? as usize,
                "sample" => {
                    c.sample_size = int(1)? as usize;
                    c.seed = int(2)?;
                }
                "card_p" => {
                    let (p, n) = (id(1)?, int(2)?);
                    c.card_p.insert(p, n);
                    c.meta.properties.insert(p);
                    c.meta.property_edges.insert(p, n as usize);
                }
                "card_s" => {
                    c.card_s.insert(id(1)?, int(2)?);
                }
                "card_o" => {
                    c.card_o.insert(id(1)?, int(2)?);
                }
                "card_so" => {
                    c.card_so.insert((id(1)?, id(2)?), int(3)?);
                }
                "card_ps" => {
                    c.card_ps.insert((id(1)?, id(2)?), int(3)?);
                }
                "card_po" => {
                    c.card_po.insert((id(1)?, id(2)?), int(3)?);
                }
                "vp" => {
                    c.meta.property_vertices.insert(id(1)?, int(2)? as usize);
                }
                "join" => {
                    let role = f[3].parse().map_err(|_| bad("unknown join role"))?;
                    c.join_sel.insert((id(1)?, id(2)?, role), real(4)?);
                }
                "reach" => {
                    c.reach_sel.insert(id(1)?, real(2)?);
                }
                _ => unreachable!(),
            }
        }
        Ok(c)
    }
}

/// Fraction of `(s, t)` pairs from V^p x V^p with `s` reaching `t`
/// (reflexively). Enumerates all pairs when `|V^p|^2 <= sample_size`,
/// otherwise draws `sample_size` pairs with replacement.
pub fn sample_reach_selectivity(
    reach: &ReachIndexes,
    assign: &PartitionAssignment,
    p: TermId,
    sample_size: usize,
    seed: u64,
) -> Result<f64> {
    let idx = reach.get(p).ok_or(Error::UnknownProperty(p))?;
    let vp = idx.vertices();
    if vp.is_empty() {
        return Err(Error::UnknownProperty(p));
    }
    let n = vp.len();
    let pairs: Vec<(TermId, TermId)> = if n.saturating_mul(n) <= sample_size {
        vp.iter().flat_map(|&s| vp.iter().map(move |&t| (s, t))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        (0..sample_size).map(|_| (vp[rng.gen_range(0..n)], vp[rng.gen_range(0..n)])).collect()
    };
    let hits = idx.reaches_many(assign, &pairs).into_iter().filter(|&b| b).count();
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::assign_hash;
    use crate::rdf::EncodedTriple;

    fn build(triples: &[EncodedTriple], k: usize) -> (Vec<PartitionIndexes>, PartitionAssignment, ReachIndexes) {
        let assign = PartitionAssignment::hash(k);
        let parts: Vec<_> = (0..k)
            .map(|i| {
                PartitionIndexes::build(
                    triples.iter().map(|&t| assign_hash(t, k)).filter(|s| s.destinations().any(|d| d == i)),
                    i,
                )
            })
            .collect();
        let props: std::collections::BTreeSet<TermId> = triples.iter().map(|t| t.p).collect();
        let reach = ReachIndexes::build(&parts, &assign, props).unwrap();
        (parts, assign, reach)
    }

    fn t(s: u32, p: u32, o: u32) -> EncodedTriple {
        EncodedTriple::from_raw(s, p, o)
    }

    #[test]
    fn property_cardinality() {
        let (parts, assign, reach) = build(&[t(1, 9, 2), t(2, 9, 3), t(3, 9, 1)], 2);
        let c = StatsCatalog::compute(&parts, &assign, &reach, 100, 1);
        assert_eq!(c.card_property(TermId(9)), 3);
        assert_eq!(c.triples, 3);
        assert_eq!(c.meta.vertex_count, 3);
    }

    #[test]
    fn empty_dataset() {
        let (parts, assign, reach) = build(&[], 2);
        let c = StatsCatalog::compute(&parts, &assign, &reach, 100, 1);
        assert!(c.card_p.is_empty() && c.card_s.is_empty() && c.join_sel.is_empty());
    }

    #[test]
    fn unique_subject_self_join() {
        let n = 20;
        let triples: Vec<_> = (0..n).map(|i| t(i, 100, 50 + i)).collect();
        let (parts, assign, reach) = build(&triples, 3);
        let c = StatsCatalog::compute(&parts, &assign, &reach, 100, 1);
        let sel = c.join_selectivity(TermId(100), TermId(100), JoinRole::SS);
        assert!((sel - 1.0 / n as f64).abs() < 1e-12);
        assert_eq!(c.join_selectivity(TermId(100), TermId(100), JoinRole::SO), 0.0);
    }

    #[test]
    fn exhaustive_reach_selectivity() {
        // a 4-cycle: everything reaches everything
        let (_, assign, reach) = build(&[t(0, 9, 1), t(1, 9, 2), t(2, 9, 3), t(3, 9, 0)], 2);
        assert_eq!(sample_reach_selectivity(&reach, &assign, TermId(9), 10_000, 7).unwrap(), 1.0);
        // chain of 4: 4 self pairs + 6 forward pairs out of 16
        let (_, assign, reach) = build(&[t(0, 9, 1), t(1, 9, 2), t(2, 9, 3)], 3);
        assert_eq!(sample_reach_selectivity(&reach, &assign, TermId(9), 10_000, 7).unwrap(), 10.0 / 16.0);
        assert!(sample_reach_selectivity(&reach, &assign, TermId(8), 10_000, 7).is_err());
    }

    #[test]
    fn catalog_text_round_trip() {
        let triples: Vec<_> = (0..60u32).map(|i| t(i % 11, 100 + i % 3, (i * 7) % 13)).collect();
        let (parts, assign, reach) = build(&triples, 2);
        let c = StatsCatalog::compute(&parts, &assign, &reach, 50, 3);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = StatsCatalog::read_from(&buf[..]).unwrap();
        assert_eq!(back, c);
        assert!(matches!(StatsCatalog::read_from(&b"join\t1\t2\tXX\t0.5\n"[..]), Err(Error::Catalog { line: 1, .. })));
        assert!(matches!(StatsCatalog::read_from(&b"reach\t1\t1.5\n"[..]), Err(Error::Catalog { .. })));
    }
}
