//! Bounded FIFO pipe connecting two components.
//!
//! A pipe caches packets and carries shared state between its producer and
//! consumer. Producers block when the buffer is full (backpressure) and
//! consumers block when it is empty. State moves one way only:
//! Active -> Stalled, Active -> Terminated, Stalled -> Terminated.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};

use crate::error::PipeError;
use crate::packet::Packet;

pub const DEFAULT_PIPE_CAPACITY: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipeState {
    Active,
    Stalled(String),
    Terminated,
}

struct Body {
    queue: VecDeque<Packet>,
    state: PipeState,
    eos_seen: bool,
    last_seq: Option<u64>,
}

struct Inner {
    capacity: usize,
    body: Mutex<Body>,
    not_full: Condvar,
    not_empty: Condvar,
}

/// Cloneable handle; all clones share one buffer and state.
#[derive(Clone)]
pub struct Pipe {
    inner: Arc<Inner>,
}

impl Pipe {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "pipe capacity must be at least 1");
        Pipe {
            inner: Arc::new(Inner {
                capacity,
                body: Mutex::new(Body {
                    queue: VecDeque::with_capacity(capacity),
                    state: PipeState::Active,
                    eos_seen: false,
                    last_seq: None,
                }),
                not_full: Condvar::new(),
                not_empty: Condvar::new(),
            }),
        }
    }

    pub fn capacity(&self) -> usize {
        self.inner.capacity
    }

    pub fn state(&self) -> PipeState {
        self.inner.body.lock().unwrap().state.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.body.lock().unwrap().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Enqueue a packet, blocking while the buffer is full.
    ///
    /// An `eos` packet terminates the pipe; any later put fails. Packet
    /// sequence numbers must strictly increase.
    pub fn put(&self, packet: Packet) -> Result<(), PipeError> {
        if !packet.is_valid() {
            return Err(PipeError::InvalidPacket(
                "empty payload requires the endpoint or eos flag".into(),
            ));
        }
        let mut body = self.inner.body.lock().unwrap();
        loop {
            match &body.state {
                PipeState::Stalled(msg) => return Err(PipeError::Stalled(msg.clone())),
                PipeState::Terminated => return Err(PipeError::Terminated),
                PipeState::Active => {}
            }
            if body.queue.len() < self.inner.capacity {
                break;
            }
            body = self.inner.not_full.wait(body).unwrap();
        }
        if let Some(last) = body.last_seq {
            if packet.seq <= last {
                return Err(PipeError::NonMonotonicSeq {
                    last,
                    got: packet.seq,
                });
            }
        }
        body.last_seq = Some(packet.seq);
        if packet.flags.eos {
            body.eos_seen = true;
            body.state = PipeState::Terminated;
            self.inner.not_full.notify_all();
        }
        body.queue.push_back(packet);
        self.inner.not_empty.notify_all();
        Ok(())
    }

    /// Non-blocking put. Returns the packet back when the buffer is full.
    pub fn try_put(&self, packet: Packet) -> Result<Option<Packet>, PipeError> {
        if !packet.is_valid() {
            return Err(PipeError::InvalidPacket(
                "empty payload requires the endpoint or eos flag".into(),
            ));
        }
        let mut body = self.inner.body.lock().unwrap();
        match &body.state {
            PipeState::Stalled(msg) => return Err(PipeError::Stalled(msg.clone())),
            PipeState::Terminated => return Err(PipeError::Terminated),
            PipeState::Active => {}
        }
        if body.queue.len() >= self.inner.capacity {
            return Ok(Some(packet));
        }
        if let Some(last) = body.last_seq {
            if packet.seq <= last {
                return Err(PipeError::NonMonotonicSeq {
                    last,
                    got: packet.seq,
                });
            }
        }
        body.last_seq = Some(packet.seq);
        if packet.flags.eos {
            body.eos_seen = true;
            body.state = PipeState::Terminated;
            self.inner.not_full.notify_all();
        }
        body.queue.push_back(packet);
        self.inner.not_empty.notify_all();
        Ok(None)
    }

    /// Dequeue the oldest packet, blocking while the pipe is empty and Active.
    ///
    /// A terminated pipe drains its remaining buffer before reporting
    /// `PipeError::Terminated`. A stalled pipe reports the stored error
    /// immediately so every consumer observes a fault within one packet cycle.
    pub fn get(&self) -> Result<Packet, PipeError> {
        let mut body = self.inner.body.lock().unwrap();
        loop {
            if let PipeState::Stalled(msg) = &body.state {
                return Err(PipeError::Stalled(msg.clone()));
            }
            if let Some(p) = body.queue.pop_front() {
                self.inner.not_full.notify_all();
                return Ok(p);
            }
            if body.state == PipeState::Terminated {
                return Err(PipeError::Terminated);
            }
            body = self.inner.not_empty.wait(body).unwrap();
        }
    }

    /// Non-blocking get.
    pub fn try_get(&self) -> Result<Option<Packet>, PipeError> {
        let mut body = self.inner.body.lock().unwrap();
        if let PipeState::Stalled(msg) = &body.state {
            return Err(PipeError::Stalled(msg.clone()));
        }
        if let Some(p) = body.queue.pop_front() {
            self.inner.not_full.notify_all();
            return Ok(Some(p));
        }
        if body.state == PipeState::Terminated {
            return Err(PipeError::Terminated);
        }
        Ok(None)
    }

    /// Move an Active pipe to Stalled with an error description. Idempotent:
    /// a pipe that is already Stalled or Terminated is left unchanged.
    pub fn stall(&self, error: &str) {
        let mut body = self.inner.body.lock().unwrap();
        if body.state == PipeState::Active {
            body.state = PipeState::Stalled(error.to_string());
            self.inner.not_full.notify_all();
            self.inner.not_empty.notify_all();
        }
    }

    /// Move the pipe to Terminated (legal from Active or Stalled).
    pub fn terminate(&self) {
        let mut body = self.inner.body.lock().unwrap();
        if body.state != PipeState::Terminated {
            body.state = PipeState::Terminated;
            self.inner.not_full.notify_all();
            self.inner.not_empty.notify_all();
        }
    }
}
