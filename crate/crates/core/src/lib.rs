//! Distributed in-memory evaluation of conjunctive SPARQL queries with
//! property paths over hash- or map-partitioned RDF data.

pub mod bench;
mod codec;
pub mod config;
pub mod engine;
pub mod error;
pub mod gen;
pub mod index;
pub mod optimizer;
pub mod oracle;
pub mod partition;
pub mod rdf;
pub mod query;
pub mod reach;
pub mod runtime;
pub mod stats;
pub mod store;

pub use config::{EngineConfig, TransportKind};
pub use engine::{Engine, Prepared, QueryResult};
pub use error::{Error, Result};
