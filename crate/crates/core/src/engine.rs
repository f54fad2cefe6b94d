//! Loading, planning and running queries against one store.

use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::config::{EngineConfig, TransportKind};
use crate::error::{Error, Result};
use crate::optimizer::{optimize, Plan};
use crate::partition::{load_partition_file, PartitionAssignment};
use crate::query::{Modifier, Query, QueryGraph};
use crate::rdf::ntriples::{self, ParseMode};
use crate::rdf::{Dictionary, TermId};
use crate::runtime::{
    execute, has_edges, Audit, ChaosConfig, ChaosTransport, Cluster, ExecOptions, InProcTransport, SocketTransport,
    Transport,
};
use crate::store::{BuildOptions, Store};

/// A parsed, planned query ready to run.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub query: Query,
    pub graph: QueryGraph,
    pub plan: Plan,
}

impl Prepared {
    pub fn explain(&self) -> String {
        self.plan.explain(&self.graph)
    }

    pub fn to_dot(&self) -> String {
        self.plan.to_dot(&self.graph)
    }

    pub fn variables(&self) -> Vec<String> {
        self.query.projection.iter().map(|v| v.to_string()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct QueryResult {
    pub vars: Vec<String>,
    /// Distinct rows, sorted by id.
    pub rows: Vec<Vec<TermId>>,
    pub audit: Audit,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct LoadReport {
    pub parsed: usize,
    pub skipped: Vec<Error>,
}

pub struct Engine {
    store: Store,
    config: EngineConfig,
    transport: Box<dyn Transport>,
    next_query: AtomicU64,
}

fn open_transport(kind: TransportKind, endpoints: usize) -> Result<Box<dyn Transport>> {
    Ok(match kind {
        TransportKind::InProc => Box::new(InProcTransport::new(endpoints)),
        TransportKind::Socket => Box::new(SocketTransport::new(endpoints)?),
        TransportKind::Chaos { seed } => Box::new(ChaosTransport::new(endpoints, ChaosConfig { seed, ..Default::default() })),
    })
}

impl Engine {
    /// Wraps a built store. The worker count is the store's partition
    /// count; `config.slaves` only matters when building.
    pub fn new(store: Store, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let transport = open_transport(config.transport, store.k() + 1)?;
        Ok(Engine { store, config, transport, next_query: AtomicU64::new(0) })
    }

    /// Parses N-Triples from `input` and builds a store per `config`.
    pub fn load<R: BufRead>(input: R, config: EngineConfig) -> Result<(Self, LoadReport)> {
        config.validate()?;
        let mut dict = Dictionary::new();
        let mode = if config.strict { ParseMode::Strict } else { ParseMode::Lenient };
        let loaded = ntriples::load(input, &mut dict, mode)?;
        let assign = match &config.partition_file {
            Some(path) => load_partition_file(path, config.slaves, &dict)?,
            None => PartitionAssignment::hash(config.slaves),
        };
        let opts = BuildOptions { sample_size: config.sample_size, seed: config.seed, reach_properties: None };
        let store = Store::build(dict, &loaded.triples, assign, &opts)?;
        let report = LoadReport { parsed: loaded.triples.len(), skipped: loaded.skipped };
        Ok((Engine::new(store, config)?, report))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.store.k()
    }

    pub fn parse(&self, text: &str) -> Result<Query> {
        Query::parse(text)
    }

    /// Builds the query graph and the cheapest plan. Transitive patterns
    /// over a property without a reach index fail here.
    pub fn plan(&self, query: Query) -> Result<Prepared> {
        let graph = QueryGraph::build(&query, &self.store.dict)?;
        for p in &graph.preds {
            let transitive = matches!(p.modifier, Modifier::Star | Modifier::Plus);
            if transitive
                && p.property != TermId::ABSENT
                && self.store.reach.get(p.property).is_none()
                && has_edges(&self.store.partitions, p.property)
            {
                return Err(Error::MissingReachIndex(p.property_term.to_string()));
            }
        }
        let plan = optimize(&graph, &self.store.catalog, self.k(), self.config.gamma)?;
        Ok(Prepared { query, graph, plan })
    }

    pub fn prepare(&self, text: &str) -> Result<Prepared> {
        self.plan(self.parse(text)?)
    }

    pub fn execute(&self, prepared: &Prepared) -> Result<QueryResult> {
        let start = Instant::now();
        let id = self.next_query.fetch_add(1, Ordering::Relaxed);
        let cluster = Cluster { partitions: &self.store.partitions, assign: &self.store.assign, reach: &self.store.reach };
        let opts = ExecOptions { star_scope: self.config.star_scope, ..ExecOptions::default() };
        let out = execute(cluster, &prepared.graph, &prepared.plan, self.transport.as_ref(), id, opts)?;
        Ok(QueryResult { vars: prepared.variables(), rows: out.rows, audit: out.audit, elapsed: start.elapsed() })
    }

    pub fn run(&self, text: &str) -> Result<QueryResult> {
        self.execute(&self.prepare(text)?)
    }

    /// Renders rows as terms and sorts them by their rendering.
    pub fn decode_rows(&self, rows: &[Vec<TermId>]) -> Result<Vec<Vec<String>>> {
        let mut out: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|&id| self.store.dict.decode(id).map(|t| t.to_string())).collect())
            .collect::<Result<_>>()?;
        out.sort();
        Ok(out)
    }
}
