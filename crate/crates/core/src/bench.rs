//! Strong- and weak-scaling runs over generated hierarchy data.

use crate::config::EngineConfig;
use crate::error::Result;
use crate::gen::{self, HierarchyParams, Instance};
use crate::partition::PartitionAssignment;
use crate::store::{BuildOptions, Store};
use crate::Engine;

#[derive(Clone, Debug)]
pub struct BenchQuery {
    pub name: String,
    pub text: String,
}

impl BenchQuery {
    pub fn new(name: &str, text: String) -> Self {
        BenchQuery { name: name.to_string(), text }
    }
}

/// The single-reach, selective and two-reach hierarchy queries.
pub fn hierarchy_queries() -> Vec<BenchQuery> {
    vec![
        BenchQuery::new("L1", gen::hierarchy_single_reach_query()),
        BenchQuery::new("L2", gen::hierarchy_selective_query()),
        BenchQuery::new("L3", gen::hierarchy_pair_query()),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryTiming {
    pub query: String,
    /// Median wall time over the runs.
    pub seconds: f64,
    pub rows: usize,
    pub messages: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    /// `strong` or `weak`.
    pub mode: &'static str,
    pub k: usize,
    /// Fraction of the full dataset.
    pub scale: f64,
    pub triples: usize,
    pub timings: Vec<QueryTiming>,
}

impl BenchRow {
    pub fn geo_mean(&self) -> f64 {
        geo_mean(self.timings.iter().map(|t| t.seconds))
    }
}

pub fn geo_mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x.max(1e-9).ln(), n + 1));
    if n == 0 {
        return 0.0;
    }
    (sum / n as f64).exp()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

fn engine_for(inst: &Instance, k: usize, config: &EngineConfig) -> Result<Engine> {
    let opts = BuildOptions { sample_size: config.sample_size, seed: config.seed, reach_properties: None };
    let store = Store::build(inst.dict.clone(), &inst.triples, PartitionAssignment::hash(k), &opts)?;
    Engine::new(store, EngineConfig { slaves: k, ..config.clone() })
}

/// Times every query `runs` times on a freshly built `k`-partition store.
pub fn measure(inst: &Instance, k: usize, queries: &[BenchQuery], runs: usize, config: &EngineConfig) -> Result<Vec<QueryTiming>> {
    let engine = engine_for(inst, k, config)?;
    let mut out = Vec::new();
    for q in queries {
        let prepared = engine.prepare(&q.text)?;
        let mut times = Vec::new();
        let mut last = None;
        for _ in 0..runs.max(1) {
            let r = engine.execute(&prepared)?;
            times.push(r.elapsed.as_secs_f64());
            last = Some(r);
        }
        let r = last.expect("at least one run");
        out.push(QueryTiming {
            query: q.name.clone(),
            seconds: median(times),
            rows: r.rows.len(),
            messages: r.audit.total_messages(),
        });
    }
    Ok(out)
}

/// Fixed data, growing worker count.
pub fn strong_scaling(
    inst: &Instance,
    ks: &[usize],
    queries: &[BenchQuery],
    runs: usize,
    config: &EngineConfig,
) -> Result<Vec<BenchRow>> {
    ks.iter()
        .map(|&k| {
            let timings = measure(inst, k, queries, runs, config)?;
            Ok(BenchRow { mode: "strong", k, scale: 1.0, triples: inst.triples.len(), timings })
        })
        .collect()
}

/// Data and workers grown together: each `(scale, k)` pair runs on a
/// hierarchy of `scale * full_triples` triples.
pub fn weak_scaling(
    shape: HierarchyParams,
    full_triples: usize,
    steps: &[(f64, usize)],
    queries: &[BenchQuery],
    runs: usize,
    config: &EngineConfig,
) -> Result<Vec<BenchRow>> {
    steps
        .iter()
        .map(|&(scale, k)| {
            let inst = gen::hierarchy(shape.with_size((full_triples as f64 * scale) as usize), config.seed);
            let timings = measure(&inst, k, queries, runs, config)?;
            Ok(BenchRow { mode: "weak", k, scale, triples: inst.triples.len(), timings })
        })
        .collect()
}

/// Aligned table: one row per run configuration, one column per query
/// plus the geometric mean.
pub fn render_table(rows: &[BenchRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut out = format!("{:<7} {:>3} {:>6} {:>10}", "mode", "k", "scale", "triples");
    for t in &first.timings {
        out += &format!(" {:>10}", t.query);
    }
    out += &format!(" {:>10}\n", "geo-mean");
    for r in rows {
        out += &format!("{:<7} {:>3} {:>6.2} {:>10}", r.mode, r.k, r.scale, r.triples);
        for t in &r.timings {
            out += &format!(" {:>10.4}", t.seconds);
        }
        out += &format!(" {:>10.4}\n", r.geo_mean());
    }
    out
}
