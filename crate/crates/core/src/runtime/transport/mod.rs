//! Message passing between workers and the master.
//!
//! Endpoints `0..k` are workers, endpoint `k` is the master. Messages are
//! addressed to a stream, identified by query and operator, and every
//! sender closes each stream it participates in with an end-of-stream
//! marker. Delivery preserves order per (sender, receiver, stream).

mod chaos;
mod inproc;
mod socket;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub use chaos::{ChaosConfig, ChaosTransport};
pub use inproc::InProcTransport;
pub use socket::SocketTransport;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Kind {
    TupleBatch = 1,
    FrontierBatch = 2,
    EndOfStream = 3,
}

impl Kind {
    pub fn from_byte(b: u8) -> Option<Kind> {
        match b {
            1 => Some(Kind::TupleBatch),
            2 => Some(Kind::FrontierBatch),
            3 => Some(Kind::EndOfStream),
            _ => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamKey {
    pub query: u64,
    pub operator: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: Kind,
    pub key: StreamKey,
    pub sender: u16,
    pub payload: Vec<u32>,
}

impl Message {
    pub fn eos(key: StreamKey, sender: usize) -> Self {
        Message { kind: Kind::EndOfStream, key, sender: sender as u16, payload: Vec::new() }
    }
}

/// Per-stream message counts.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamTraffic {
    pub tuple_batches: u64,
    pub frontier_batches: u64,
    pub end_of_streams: u64,
    pub payload_words: u64,
}

/// Counts every message handed to a transport, keyed by stream.
#[derive(Debug, Default)]
pub struct Traffic {
    streams: Mutex<BTreeMap<StreamKey, StreamTraffic>>,
}

impl Traffic {
    pub fn record(&self, msg: &Message) {
        let mut m = self.streams.lock().unwrap();
        let t = m.entry(msg.key).or_default();
        match msg.kind {
            Kind::TupleBatch => t.tuple_batches += 1,
            Kind::FrontierBatch => t.frontier_batches += 1,
            Kind::EndOfStream => t.end_of_streams += 1,
        }
        t.payload_words += msg.payload.len() as u64;
    }

    /// Removes and returns the counters of one query.
    pub fn take_query(&self, query: u64) -> BTreeMap<u32, StreamTraffic> {
        let mut m = self.streams.lock().unwrap();
        let keys: Vec<StreamKey> = m.keys().filter(|k| k.query == query).copied().collect();
        keys.into_iter().map(|k| (k.operator, m.remove(&k).unwrap())).collect()
    }
}

pub trait Transport: Send + Sync {
    /// Number of endpoints, workers plus the master.
    fn endpoints(&self) -> usize;

    fn send(&self, to: usize, msg: Message) -> Result<()>;

    /// Blocks until a message of `key` arrives at endpoint `at`.
    fn recv(&self, at: usize, key: StreamKey) -> Result<Message>;

    /// Wakes every receiver of `query` with [`Error::Cancelled`].
    fn cancel(&self, query: u64);

    /// Drops whatever is left of `query`.
    fn finish(&self, query: u64);

    fn traffic(&self) -> &Traffic;
}

#[derive(Default)]
struct MailboxState {
    streams: HashMap<StreamKey, VecDeque<Message>>,
    cancelled: HashSet<u64>,
    closed: Option<String>,
}

/// Incoming queues of one endpoint.
#[derive(Default)]
pub(crate) struct Mailbox {
    state: Mutex<MailboxState>,
    ready: Condvar,
}

const POLL: Duration = Duration::from_millis(50);

impl Mailbox {
    pub(crate) fn push(&self, msg: Message) {
        let mut s = self.state.lock().unwrap();
        if s.cancelled.contains(&msg.key.query) {
            return;
        }
        s.streams.entry(msg.key).or_default().push_back(msg);
        drop(s);
        self.ready.notify_all();
    }

    pub(crate) fn pop(&self, key: StreamKey) -> Result<Message> {
        let mut s = self.state.lock().unwrap();
        loop {
            if s.cancelled.contains(&key.query) {
                return Err(Error::Cancelled);
            }
            if let Some(m) = s.streams.get_mut(&key).and_then(|q| q.pop_front()) {
                return Ok(m);
            }
            if let Some(reason) = &s.closed {
                return Err(Error::Transport(reason.clone()));
            }
            s = self.ready.wait_timeout(s, POLL).unwrap().0;
        }
    }

    pub(crate) fn cancel(&self, query: u64) {
        let mut s = self.state.lock().unwrap();
        s.cancelled.insert(query);
        s.streams.retain(|k, _| k.query != query);
        drop(s);
        self.ready.notify_all();
    }

    pub(crate) fn finish(&self, query: u64) {
        let mut s = self.state.lock().unwrap();
        s.cancelled.remove(&query);
        s.streams.retain(|k, _| k.query != query);
    }

    /// Fails all current and future receives.
    pub(crate) fn close(&self, reason: String) {
        let mut s = self.state.lock().unwrap();
        s.closed.get_or_insert(reason);
        drop(s);
        self.ready.notify_all();
    }
}
