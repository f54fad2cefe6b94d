//! The loaded dataset: dictionary, shards, reach indexes and statistics,
//! with a directory snapshot for reloading without rebuilding.
//!
//! Directory layout:
//!
//! ```text
//! manifest.json     format version, k, partitioning mode, counts
//! dictionary.tsv    id<TAB>term
//! partition.tsv     id<TAB>partition (file-based partitioning only)
//! shard-<i>.pjix    permutation arrays of partition i
//! reach-<i>.pjrx    compound graphs of partition i
//! stats.tsv         statistics catalog
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{self, PartitionIndexes};
use crate::partition::{assign_custom, assign_hash, PartitionAssignment, ShardedTriple};
use crate::rdf::{Dictionary, EncodedTriple, TermId};
use crate::reach::{self, ReachIndex, ReachIndexes};
use crate::stats::StatsCatalog;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub k: usize,
    /// `hash` or `file`.
    pub partitioning: String,
    pub triples: u64,
    pub terms: usize,
    pub reach_properties: usize,
    pub sample_size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub sample_size: usize,
    pub seed: u64,
    /// Properties to build reach indexes for; `None` means all.
    pub reach_properties: Option<BTreeSet<TermId>>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { sample_size: crate::stats::DEFAULT_SAMPLE_SIZE, seed: crate::stats::DEFAULT_SEED, reach_properties: None }
    }
}

/// Per-partition size figures for load summaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionSummary {
    pub partition: usize,
    pub subject_triples: usize,
    pub object_triples: usize,
    pub in_boundaries: usize,
    pub out_boundaries: usize,
    pub compound_components: usize,
}

pub struct Store {
    pub dict: Dictionary,
    pub assign: PartitionAssignment,
    pub partitions: Vec<PartitionIndexes>,
    pub reach: ReachIndexes,
    pub catalog: StatsCatalog,
}

impl Store {
    /// Shards `triples`, builds all permutation arrays, reach indexes and
    /// statistics.
    pub fn build(dict: Dictionary, triples: &[EncodedTriple], assign: PartitionAssignment, opts: &BuildOptions) -> Result<Self> {
        let k = assign.k();
        let sharded: Vec<ShardedTriple> = if assign.is_hash() {
            triples.iter().map(|&t| assign_hash(t, k)).collect()
        } else {
            triples.iter().map(|&t| assign_custom(t, &assign)).collect::<Result<_>>()?
        };
        let mut shards: Vec<Vec<ShardedTriple>> = vec![Vec::new(); k];
        for st in sharded {
            for d in st.destinations() {
                shards[d].push(st);
            }
        }
        let partitions: Vec<PartitionIndexes> =
            shards.into_par_iter().enumerate().map(|(i, s)| PartitionIndexes::build(s, i)).collect();
        let properties: BTreeSet<TermId> = triples.iter().map(|t| t.p).collect();
        let wanted: Vec<TermId> = match &opts.reach_properties {
            Some(only) => properties.intersection(only).copied().collect(),
            None => properties.into_iter().collect(),
        };
        let reach = ReachIndexes::build(&partitions, &assign, wanted)?;
        let catalog = StatsCatalog::compute(&partitions, &assign, &reach, opts.sample_size, opts.seed);
        Ok(Store { dict, assign, partitions, reach, catalog })
    }

    pub fn k(&self) -> usize {
        self.partitions.len()
    }

    /// Every distinct triple, sorted.
    pub fn triples(&self) -> Vec<EncodedTriple> {
        let mut out: Vec<EncodedTriple> = self.partitions.iter().flat_map(|p| p.subject_group().iter().copied()).collect();
        out.sort_unstable();
        out
    }

    pub fn summary(&self) -> Vec<PartitionSummary> {
        (0..self.k())
            .map(|i| {
                let mut s = PartitionSummary {
                    partition: i,
                    subject_triples: self.partitions[i].subject_group().len(),
                    object_triples: self.partitions[i].object_group().len(),
                    in_boundaries: 0,
                    out_boundaries: 0,
                    compound_components: 0,
                };
                for (_, r) in self.reach.iter() {
                    let st = r.partition(i).stats();
                    s.in_boundaries += st.in_boundaries;
                    s.out_boundaries += st.out_boundaries;
                    s.compound_components += st.components;
                }
                s
            })
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            k: self.k(),
            partitioning: if self.assign.is_hash() { "hash" } else { "file" }.to_string(),
            triples: self.catalog.triples,
            terms: self.dict.len(),
            reach_properties: self.reach.len(),
            sample_size: self.catalog.sample_size,
            seed: self.catalog.seed,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
        };
        let mut w = create("dictionary.tsv")?;
        self.dict.write_to(&mut w)?;
        w.flush()?;
        let partition_path = dir.join("partition.tsv");
        if self.assign.is_hash() {
            if partition_path.exists() {
                fs::remove_file(&partition_path).map_err(|e| Error::io(&partition_path, e))?;
            }
        } else {
            let mut w = create("partition.tsv")?;
            writeln!(w, "# fallback\t{}", if self.assign.has_hash_fallback() { "hash" } else { "none" })?;
            for (v, p) in self.assign.explicit_entries() {
                writeln!(w, "{}\t{}", v.0, p)?;
            }
            w.flush()?;
        }
        self.partitions.par_iter().enumerate().try_for_each(|(i, part)| -> Result<()> {
            let mut w = create(&format!("shard-{i}.pjix"))?;
            index::write_partition(&mut w, part)?;
            w.flush()?;
            let mut w = create(&format!("reach-{i}.pjrx"))?;
            let dags: Vec<_> = self.reach.iter().map(|(_, r)| r.partition(i)).collect();
            reach::snapshot::write_partition(&mut w, i, dags.into_iter())?;
            w.flush()?;
            Ok(())
        })?;
        let mut w = create("stats.tsv")?;
        self.catalog.write_to(&mut w)?;
        w.flush()?;
        let mut w = create("manifest.json")?;
        serde_json::to_writer_pretty(&mut w, &self.manifest()).map_err(|e| Error::Snapshot(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<BufReader<File>> {
            let path = dir.join(name);
            Ok(BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?))
        };
        let manifest: Manifest =
            serde_json::from_reader(open("manifest.json")?).map_err(|e| Error::Snapshot(format!("manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Snapshot(format!("store format {} is not {FORMAT_VERSION}", manifest.format_version)));
        }
        let k = manifest.k;
        if k == 0 {
            return Err(Error::Snapshot("manifest lists zero partitions".into()));
        }
        let dict = Dictionary::read_from(open("dictionary.tsv")?)?;
        let assign = match manifest.partitioning.as_str() {
            "hash" => PartitionAssignment::hash(k),
            "file" => read_assignment(open("partition.tsv")?, k)?,
            other => return Err(Error::Snapshot(format!("unknown partitioning mode {other}"))),
        };
        let loaded: Vec<(PartitionIndexes, Vec<reach::CompoundDag>)> = (0..k)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let part = index::read_partition(&mut open(&format!("shard-{i}.pjix"))?)?;
                let (pi, dags) = reach::snapshot::read_partition(&mut open(&format!("reach-{i}.pjrx"))?)?;
                if part.partition() != i || pi != i {
                    return Err(Error::Snapshot(format!("shard file {i} holds partition {}", part.partition())));
                }
                Ok((part, dags))
            })
            .collect::<Result<_>>()?;
        let mut partitions = Vec::with_capacity(k);
        let mut by_property: BTreeMap<TermId, Vec<reach::CompoundDag>> = BTreeMap::new();
        for (part, dags) in loaded {
            partitions.push(part);
            for d in dags {
                by_property.entry(d.property()).or_default().push(d);
            }
        }
        let mut indexes = BTreeMap::new();
        for (p, dags) in by_property {
            if dags.len() != k {
                return Err(Error::Snapshot(format!("property {p} has reach data for {} of {k} partitions", dags.len())));
            }
            indexes.insert(p, ReachIndex::from_dags(p, dags));
        }
        let catalog = StatsCatalog::read_from(open("stats.tsv")?)?;
        Ok(Store { dict, assign, partitions, reach: ReachIndexes::from_map(indexes), catalog })
    }
}

fn read_assignment<R: BufRead>(r: R, k: usize) -> Result<PartitionAssignment> {
    let mut fallback = true;
    let mut entries = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |reason: &str| Error::Snapshot(format!("partition.tsv line {}: {reason}", n + 1));
        if let Some(rest) = line.strip_prefix("# fallback\t") {
            fallback = rest == "hash";
            continue;
        }
        let (v, p) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>partition"))?;
        let v: u32 = v.parse().map_err(|_| bad("bad id"))?;
        let p: usize = p.parse().map_err(|_| bad("bad partition"))?;
        entries.push((TermId(v), p));
    }
    PartitionAssignment::from_map(k, entries, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Term;

    fn sample() -> (Dictionary, Vec<EncodedTriple>) {
        let mut d = Dictionary::new();
        let mut ts = Vec::new();
        for (s, p, o) in [("a", "p", "b"), ("b", "p", "c"), ("c", "q", "a"), ("d", "p", "a")] {
            let t = EncodedTriple::new(d.encode(Term::iri(s)), d.encode(Term::iri(p)), d.encode(Term::iri(o)));
            ts.push(t);
        }
        (d, ts)
    }

    #[test]
    fn snapshot_round_trip() {
        let (d, ts) = sample();
        let store = Store::build(d, &ts, PartitionAssignment::hash(3), &BuildOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let back = Store::open(dir.path()).unwrap();
        assert_eq!(back.partitions, store.partitions);
        assert_eq!(back.reach, store.reach);
        assert_eq!(back.catalog, store.catalog);
        assert_eq!(back.triples(), {
            let mut v = ts.clone();
            v.sort();
            v
        });
        let dir2 = tempfile::tempdir().unwrap();
        back.save(dir2.path()).unwrap();
        for f in ["shard-0.pjix", "reach-2.pjrx", "stats.tsv", "dictionary.tsv", "manifest.json"] {
            assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(dir2.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn custom_assignment_round_trip() {
        let (d, ts) = sample();
        let assign = PartitionAssignment::from_map(2, [(TermId(0), 1), (TermId(2), 1)], true).unwrap();
        let store = Store::build(d, &ts, assign.clone(), &BuildOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let back = Store::open(dir.path()).unwrap();
        assert_eq!(back.assign, assign);
        assert_eq!(back.manifest().partitioning, "file");
    }

    #[test]
    fn missing_directory() {
        assert!(matches!(Store::open(Path::new("/nonexistent/store")), Err(Error::Io { .. })));
    }

    #[test]
    fn restricted_reach_properties() {
        let (d, ts) = sample();
        let p = d.lookup(&Term::iri("p")).unwrap();
        let opts = BuildOptions { reach_properties: Some([p].into()), ..BuildOptions::default() };
        let store = Store::build(d, &ts, PartitionAssignment::hash(2), &opts).unwrap();
        assert_eq!(store.reach.len(), 1);
        let summary = store.summary();
        assert_eq!(summary.iter().map(|s| s.subject_triples).sum::<usize>(), 4);
    }
}
