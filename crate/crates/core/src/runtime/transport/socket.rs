use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::{Kind, Mailbox, Message, StreamKey, Traffic, Transport};
use crate::error::{Error, Result};

const VERSION: u8 = 1;
const HEADER: usize = 1 + 8 + 4 + 2;
/// Frames larger than this are treated as corruption.
const MAX_FRAME: usize = 1 << 30;

struct Shared {
    boxes: Vec<Mailbox>,
    closing: AtomicBool,
}

/// Loopback TCP connections between every pair of endpoints.
///
/// Frame layout, little endian: `u32 length` of the rest, `u8 kind`,
/// `u64 query`, `u32 operator`, `u16 sender`, then the payload ids. Each
/// connection starts with a version byte and the connecting endpoint's
/// `u16` id.
pub struct SocketTransport {
    shared: Arc<Shared>,
    writers: Vec<Vec<Option<Mutex<TcpStream>>>>,
    readers: Vec<JoinHandle<()>>,
    traffic: Traffic,
}

fn transport_err(e: io::Error) -> Error {
    Error::Transport(e.to_string())
}

pub(crate) fn encode(msg: &Message) -> Vec<u8> {
    let len = HEADER + 4 * msg.payload.len();
    let mut buf = Vec::with_capacity(4 + len);
    buf.extend_from_slice(&(len as u32).to_le_bytes());
    buf.push(msg.kind as u8);
    buf.extend_from_slice(&msg.key.query.to_le_bytes());
    buf.extend_from_slice(&msg.key.operator.to_le_bytes());
    buf.extend_from_slice(&msg.sender.to_le_bytes());
    for w in &msg.payload {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf
}

/// Reads one frame; `None` on clean end of stream.
pub(crate) fn decode<R: Read>(r: &mut R) -> io::Result<Option<Message>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_le_bytes(len) as usize;
    let bad = |what: &str| io::Error::new(io::ErrorKind::InvalidData, what.to_string());
    if !(HEADER..=MAX_FRAME).contains(&len) || (len - HEADER) % 4 != 0 {
        return Err(bad("bad frame length"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let kind = Kind::from_byte(buf[0]).ok_or_else(|| bad("bad frame kind"))?;
    let query = u64::from_le_bytes(buf[1..9].try_into().unwrap());
    let operator = u32::from_le_bytes(buf[9..13].try_into().unwrap());
    let sender = u16::from_le_bytes(buf[13..15].try_into().unwrap());
    let payload = buf[HEADER..].chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Some(Message { kind, key: StreamKey { query, operator }, sender, payload }))
}

fn read_loop(mut stream: TcpStream, me: usize, peer: u16, shared: Arc<Shared>) {
    let outcome = loop {
        match decode(&mut stream) {
            Ok(Some(m)) if m.sender != peer => break Err(format!("frame from {} on connection of {peer}", m.sender)),
            Ok(Some(m)) => shared.boxes[me].push(m),
            Ok(None) => break Ok(()),
            Err(e) => break Err(e.to_string()),
        }
    };
    if !shared.closing.load(Ordering::SeqCst) {
        let reason = match outcome {
            Ok(()) => format!("connection to endpoint {peer} closed"),
            Err(e) => e,
        };
        shared.boxes[me].close(reason);
    }
}

impl SocketTransport {
    /// Opens a full mesh of loopback connections for `endpoints` endpoints.
    pub fn new(endpoints: usize) -> Result<Self> {
        let shared =
            Arc::new(Shared { boxes: (0..endpoints).map(|_| Mailbox::default()).collect(), closing: AtomicBool::new(false) });
        let listeners: Vec<TcpListener> =
            (0..endpoints).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<io::Result<_>>().map_err(transport_err)?;
        let mut writers: Vec<Vec<Option<Mutex<TcpStream>>>> =
            (0..endpoints).map(|_| (0..endpoints).map(|_| None).collect()).collect();
        let mut readers = Vec::new();
        for b in 0..endpoints {
            let addr = listeners[b].local_addr().map_err(transport_err)?;
            for a in 0..b {
                let mut out = TcpStream::connect(addr).map_err(transport_err)?;
                out.set_nodelay(true).map_err(transport_err)?;
                let mut hello = vec![VERSION];
                hello.extend_from_slice(&(a as u16).to_le_bytes());
                out.write_all(&hello).map_err(transport_err)?;
                let (mut inc, _) = listeners[b].accept().map_err(transport_err)?;
                inc.set_nodelay(true).map_err(transport_err)?;
                let mut got = [0u8; 3];
                inc.read_exact(&mut got).map_err(transport_err)?;
                if got[0] != VERSION {
                    return Err(Error::Transport(format!("protocol version {} != {VERSION}", got[0])));
                }
                let peer = u16::from_le_bytes([got[1], got[2]]);
                if peer as usize != a {
                    return Err(Error::Transport(format!("handshake from {peer}, expected {a}")));
                }
                for (me, peer, s) in [(a, b, &out), (b, a, &inc)] {
                    let r = s.try_clone().map_err(transport_err)?;
                    let sh = shared.clone();
                    readers.push(std::thread::spawn(move || read_loop(r, me, peer as u16, sh)));
                }
                writers[a][b] = Some(Mutex::new(out));
                writers[b][a] = Some(Mutex::new(inc));
            }
        }
        Ok(SocketTransport { shared, writers, readers, traffic: Traffic::default() })
    }
}

impl Transport for SocketTransport {
    fn endpoints(&self) -> usize {
        self.shared.boxes.len()
    }

    fn send(&self, to: usize, msg: Message) -> Result<()> {
        self.traffic.record(&msg);
        let from = msg.sender as usize;
        if from == to {
            self.shared.boxes[to].push(msg);
            return Ok(());
        }
        let w = self.writers[from][to].as_ref().ok_or_else(|| Error::Transport(format!("no link {from} -> {to}")))?;
        w.lock().unwrap().write_all(&encode(&msg)).map_err(transport_err)
    }

    fn recv(&self, at: usize, key: StreamKey) -> Result<Message> {
        self.shared.boxes[at].pop(key)
    }

    fn cancel(&self, query: u64) {
        self.shared.boxes.iter().for_each(|b| b.cancel(query));
    }

    fn finish(&self, query: u64) {
        self.shared.boxes.iter().for_each(|b| b.finish(query));
    }

    fn traffic(&self) -> &Traffic {
        &self.traffic
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        self.shared.closing.store(true, Ordering::SeqCst);
        for w in self.writers.iter().flatten().flatten() {
            let _ = w.lock().unwrap().shutdown(Shutdown::Both);
        }
        for r in self.readers.drain(..) {
            let _ = r.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let m = Message {
            kind: Kind::FrontierBatch,
            key: StreamKey { query: 1 << 40, operator: 7 },
            sender: 3,
            payload: vec![1, u32::MAX, 0],
        };
        let bytes = encode(&m);
        assert_eq!(bytes.len(), 4 + HEADER + 12);
        let mut r = &bytes[..];
        assert_eq!(decode(&mut r).unwrap(), Some(m));
        assert_eq!(decode(&mut r).unwrap(), None);
    }

    #[test]
    fn corrupt_frames_rejected() {
        let mut bytes = encode(&Message::eos(StreamKey { query: 0, operator: 0 }, 0));
        bytes[4] = 9;
        assert!(decode(&mut &bytes[..]).is_err());
        let short = 3u32.to_le_bytes();
        assert!(decode(&mut &short[..]).is_err());
    }
}
