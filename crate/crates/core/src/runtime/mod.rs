//! Distributed execution: transports, local join kernels and the
//! per-worker operators.

mod exec;
pub mod relation;
pub mod transport;

pub use exec::{
    cond_frontier_channel, cond_reshard_channel, execute, operator_id, Audit, Cluster, ExecOptions, QueryOutput,
    ReachRound, LEFT_CHANNEL, RESULT_CHANNEL, RIGHT_CHANNEL,
};
pub(crate) use exec::has_edges;
pub use relation::Rel;
pub use transport::{ChaosConfig, ChaosTransport, InProcTransport, SocketTransport, Transport};
pub use crate::query::StarScope;
