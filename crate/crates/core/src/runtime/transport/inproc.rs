use super::{Mailbox, Message, StreamKey, Traffic, Transport};
use crate::error::Result;

/// Shared-memory queues between threads of one process.
pub struct InProcTransport {
    boxes: Vec<Mailbox>,
    traffic: Traffic,
}

impl InProcTransport {
    /// `endpoints` counts the master too.
    pub fn new(endpoints: usize) -> Self {
        InProcTransport { boxes: (0..endpoints).map(|_| Mailbox::default()).collect(), traffic: Traffic::default() }
    }
}

impl Transport for InProcTransport {
    fn endpoints(&self) -> usize {
        self.boxes.len()
    }

    fn send(&self, to: usize, msg: Message) -> Result<()> {
        self.traffic.record(&msg);
        self.boxes[to].push(msg);
        Ok(())
    }

    fn recv(&self, at: usize, key: StreamKey) -> Result<Message> {
        self.boxes[at].pop(key)
    }

    fn cancel(&self, query: u64) {
        self.boxes.iter().for_each(|b| b.cancel(query));
    }

    fn finish(&self, query: u64) {
        self.boxes.iter().for_each(|b| b.finish(query));
    }

    fn traffic(&self) -> &Traffic {
        &self.traffic
    }
}
