//! Connection plumbing: an in-memory duplex byte stream for tests and
//! benchmarks, plus the deterministic lossy channel used to exercise the
//! verify-and-resend protocol.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::{Arc, Condvar, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Queue {
    buf: Mutex<(VecDeque<u8>, bool)>,
    ready: Condvar,
}

impl Queue {
    fn new() -> Arc<Self> {
        Arc::new(Queue {
            buf: Mutex::new((VecDeque::new(), false)),
            ready: Condvar::new(),
        })
    }

    fn close(&self) {
        self.buf.lock().unwrap().1 = true;
        self.ready.notify_all();
    }
}

/// One end of an in-memory duplex connection.
pub struct MemoryLink {
    rx: Arc<Queue>,
    tx: Arc<Queue>,
}

/// A connected pair of in-memory duplex ends. Dropping one end makes the
/// peer's reads return EOF once drained.
pub fn memory_duplex() -> (MemoryLink, MemoryLink) {
    let a_to_b = Queue::new();
    let b_to_a = Queue::new();
    (
        MemoryLink {
            rx: Arc::clone(&b_to_a),
            tx: Arc::clone(&a_to_b),
        },
        MemoryLink {
            rx: a_to_b,
            tx: b_to_a,
        },
    )
}

impl Read for MemoryLink {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        let mut guard = self.rx.buf.lock().unwrap();
        loop {
            let (buf, closed) = &mut *guard;
            if !buf.is_empty() {
                let n = out.len().min(buf.len());
                for slot in out.iter_mut().take(n) {
                    *slot = buf.pop_front().unwrap();
                }
                return Ok(n);
            }
            if *closed {
                return Ok(0);
            }
            guard = self.rx.ready.wait(guard).unwrap();
        }
    }
}

impl Write for MemoryLink {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let mut guard = self.tx.buf.lock().unwrap();
        if guard.1 {
            return Err(io::Error::new(
                io::ErrorKind::BrokenPipe,
                "peer closed the connection",
            ));
        }
        guard.0.extend(data);
        self.tx.ready.notify_all();
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Drop for MemoryLink {
    fn drop(&mut self) {
        self.tx.close();
        self.rx.close();
    }
}

/// Wraps a connection and corrupts outgoing messages with a seeded
/// probability by flipping one random payload bit. Each `write` call is
/// treated as one message, which holds for the packet sender since it writes
/// every encoded message with a single buffered write.
///
/// Corruption hits payload bytes only: the underlying byte stream is
/// reliable, so framing (the 20-byte header) arrives intact and damage
/// models application-layer faults. Messages without payload pass through.
/// The return (ack) direction is never touched.
pub struct LossyLink<L> {
    inner: L,
    rng: ChaCha8Rng,
    corruption_rate: f64,
    corrupted: usize,
}

impl<L: Read + Write> LossyLink<L> {
    pub fn new(inner: L, corruption_rate: f64, seed: u64) -> Self {
        LossyLink {
            inner,
            rng: ChaCha8Rng::seed_from_u64(seed),
            corruption_rate,
            corrupted: 0,
        }
    }

    /// Messages corrupted so far.
    pub fn corrupted(&self) -> usize {
        self.corrupted
    }
}

impl<L: Read> Read for LossyLink<L> {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        self.inner.read(out)
    }
}

impl<L: Write> Write for LossyLink<L> {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let payload_bits = data.len().saturating_sub(crate::transport::HEADER_LEN) * 8;
        if payload_bits > 0 && self.rng.gen_bool(self.corruption_rate) {
            let mut copy = data.to_vec();
            let bit = self.rng.gen_range(0..payload_bits);
            copy[crate::transport::HEADER_LEN + bit / 8] ^= 1 << (bit % 8);
            self.corrupted += 1;
            self.inner.write_all(&copy)?;
        } else {
            self.inner.write_all(data)?;
        }
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn duplex_carries_bytes_both_ways() {
        let (mut a, mut b) = memory_duplex();
        a.write_all(b"ping").unwrap();
        let mut buf = [0u8; 4];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"ping");
        b.write_all(b"pong").unwrap();
        a.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"pong");
    }

    #[test]
    fn read_blocks_until_write() {
        let (mut a, mut b) = memory_duplex();
        let t = thread::spawn(move || {
            let mut buf = [0u8; 3];
            b.read_exact(&mut buf).unwrap();
            buf
        });
        thread::sleep(std::time::Duration::from_millis(20));
        a.write_all(b"abc").unwrap();
        assert_eq!(&t.join().unwrap(), b"abc");
    }

    #[test]
    fn drop_gives_eof() {
        let (a, mut b) = memory_duplex();
        drop(a);
        let mut buf = [0u8; 1];
        assert_eq!(b.read(&mut buf).unwrap(), 0);
    }

    #[test]
    fn lossy_link_is_deterministic() {
        let run = || {
            let (a, mut b) = memory_duplex();
            // 32-byte messages: 12 payload bytes past the header.
            let mut lossy = LossyLink::new(a, 0.5, 42);
            let mut received = Vec::new();
            for i in 0..50u8 {
                lossy.write_all(&[i; 32]).unwrap();
                let mut buf = [0u8; 32];
                b.read_exact(&mut buf).unwrap();
                received.push(buf);
            }
            (lossy.corrupted(), received)
        };
        let (c1, r1) = run();
        let (c2, r2) = run();
        assert_eq!(c1, c2);
        assert_eq!(r1, r2);
        assert!(c1 > 10 && c1 < 40, "rate 0.5 over 50 messages, got {c1}");
    }
}
