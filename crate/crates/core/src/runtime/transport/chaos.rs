use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mailbox, Message, StreamKey, Traffic, Transport};
use crate::error::Result;

#[derive(Copy, Clone, Debug)]
pub struct ChaosConfig {
    pub seed: u64,
    /// Chance of pausing before a delivery.
    pub delay_probability: f64,
    pub max_delay: Duration,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig { seed: 0, delay_probability: 0.05, max_delay: Duration::from_micros(300) }
    }
}

type Channel = (u16, usize, StreamKey);

#[derive(Default)]
struct Pending {
    channels: BTreeMap<Channel, VecDeque<Message>>,
    stop: bool,
}

struct Shared {
    boxes: Vec<Mailbox>,
    pending: Mutex<Pending>,
    wake: Condvar,
    cancelled: Mutex<Vec<u64>>,
}

/// In-process delivery through a scheduler thread that picks a random
/// non-empty (sender, receiver, stream) channel for every delivery and
/// sometimes sleeps first. Order within a channel is kept.
pub struct ChaosTransport {
    shared: Arc<Shared>,
    traffic: Traffic,
    scheduler: Option<JoinHandle<()>>,
}

impl ChaosTransport {
    pub fn new(endpoints: usize, config: ChaosConfig) -> Self {
        let shared = Arc::new(Shared {
            boxes: (0..endpoints).map(|_| Mailbox::default()).collect(),
            pending: Mutex::new(Pending::default()),
            wake: Condvar::new(),
            cancelled: Mutex::new(Vec::new()),
        });
        let s = shared.clone();
        let scheduler = std::thread::spawn(move || deliver(&s, config));
        ChaosTransport { shared, traffic: Traffic::default(), scheduler: Some(scheduler) }
    }
}

fn deliver(shared: &Shared, config: ChaosConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    loop {
        let (to, msg) = {
            let mut p = shared.pending.lock().unwrap();
            while p.channels.is_empty() && !p.stop {
                p = shared.wake.wait(p).unwrap();
            }
            if p.channels.is_empty() {
                return;
            }
            let pick = rng.gen_range(0..p.channels.len());
            let ch = *p.channels.keys().nth(pick).unwrap();
            let queue = p.channels.get_mut(&ch).unwrap();
            let msg = queue.pop_front().unwrap();
            if queue.is_empty() {
                p.channels.remove(&ch);
            }
            (ch.1, msg)
        };
        if rng.gen_bool(config.delay_probability) {
            std::thread::sleep(config.max_delay.mul_f64(rng.gen::<f64>()));
        }
        shared.boxes[to].push(msg);
    }
}

impl Transport for ChaosTransport {
    fn endpoints(&self) -> usize {
        self.shared.boxes.len()
    }

    fn send(&self, to: usize, msg: Message) -> Result<()> {
        self.traffic.record(&msg);
        if self.shared.cancelled.lock().unwrap().contains(&msg.key.query) {
            return Ok(());
        }
        let mut p = self.shared.pending.lock().unwrap();
        p.channels.entry((msg.sender, to, msg.key)).or_default().push_back(msg);
        drop(p);
        self.shared.wake.notify_one();
        Ok(())
    }

    fn recv(&self, at: usize, key: StreamKey) -> Result<Message> {
        self.shared.boxes[at].pop(key)
    }

    fn cancel(&self, query: u64) {
        self.shared.cancelled.lock().unwrap().push(query);
        self.shared.pending.lock().unwrap().channels.retain(|c, _| c.2.query != query);
        self.shared.boxes.iter().for_each(|b| b.cancel(query));
    }

    fn finish(&self, query: u64) {
        self.shared.cancelled.lock().unwrap().retain(|&q| q != query);
        self.shared.pending.lock().unwrap().channels.retain(|c, _| c.2.query != query);
        self.shared.boxes.iter().for_each(|b| b.finish(query));
    }

    fn traffic(&self) -> &Traffic {
        &self.traffic
    }
}

impl Drop for ChaosTransport {
    fn drop(&mut self) {
        self.shared.pending.lock().unwrap().stop = true;
        self.shared.wake.notify_all();
        if let Some(h) = self.scheduler.take() {
            let _ = h.join();
        }
    }
}
