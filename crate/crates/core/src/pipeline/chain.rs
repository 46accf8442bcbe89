//! Chain: links components with pipes, starts them concurrently, supervises
//! errors, and stops them cleanly.

use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::packet::{Packet, PacketFlags, Payload};
use crate::pipeline::component::Component;
use crate::pipeline::pipe::{Pipe, PipeState, DEFAULT_PIPE_CAPACITY};

pub struct Chain {
    components: Vec<Box<dyn Component>>,
    capacity: usize,
}

impl Chain {
    pub fn new() -> Self {
        Chain::with_capacity(DEFAULT_PIPE_CAPACITY)
    }

    /// Chain whose pipes buffer at most `capacity` packets.
    pub fn with_capacity(capacity: usize) -> Self {
        Chain {
            components: Vec::new(),
            capacity,
        }
    }

    pub fn add(&mut self, component: impl Component + 'static) -> &mut Self {
        self.components.push(Box::new(component));
        self
    }

    pub fn add_boxed(&mut self, component: Box<dyn Component>) -> &mut Self {
        self.components.push(component);
        self
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Validate link compatibility without starting.
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Chain("chain has no components".into()));
        }
        for k in 1..self.components.len() {
            let upstream = &self.components[k - 1];
            let downstream = &self.components[k];
            match downstream.input_kind() {
                Some(accepted) if accepted == upstream.output_kind() => {}
                Some(accepted) => {
                    return Err(Error::KindMismatch {
                        upstream: upstream.name().to_string(),
                        downstream: downstream.name().to_string(),
                        produced: upstream.output_kind(),
                        accepted,
                    });
                }
                None => {
                    return Err(Error::Chain(format!(
                        "source component '{}' cannot appear mid-chain after '{}'",
                        downstream.name(),
                        upstream.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Start every component on its own thread. Components are spawned last
    /// to first so consumers are ready before producers. Returns a handle
    /// owning the final output pipe.
    pub fn start(mut self) -> Result<RunningChain> {
        self.validate()?;
        for c in &mut self.components {
            c.init().map_err(|e| {
                Error::Chain(format!("component '{}' failed to initialize: {e}", c.name()))
            })?;
        }
        let n = self.components.len();
        let names: Vec<String> = self.components.iter().map(|c| c.name().to_string()).collect();
        // pipes[k] feeds component k; pipes[n] is the final output.
        let pipes: Vec<Pipe> = (0..=n).map(|_| Pipe::new(self.capacity)).collect();
        let shared = Arc::new(ChainShared {
            pipes: pipes.clone(),
            names: names.clone(),
            error: Mutex::new(None),
        });
        let (done_tx, done_rx) = mpsc::channel();
        let mut handles: Vec<Option<JoinHandle<()>>> = (0..n).map(|_| None).collect();
        for (k, mut component) in self.components.into_iter().enumerate().rev() {
            let input = pipes[k].clone();
            let output = pipes[k + 1].clone();
            let shared_k = Arc::clone(&shared);
            let tx = done_tx.clone();
            let handle = thread::Builder::new()
                .name(names[k].clone())
                .spawn(move || {
                    let result = component.run(&input, &output);
                    if let Err(e) = &result {
                        shared_k.fail(k, &e.to_string());
                    }
                    let _ = tx.send((k, result));
                })
                .map_err(|e| Error::Chain(format!("failed to spawn component thread: {e}")))?;
            handles[k] = Some(handle);
        }
        Ok(RunningChain {
            shared,
            handles,
            done_rx,
            done: vec![false; n],
            first_error: None,
            eos_injected: false,
        })
    }
}

impl Default for Chain {
    fn default() -> Self {
        Chain::new()
    }
}

struct ChainShared {
    pipes: Vec<Pipe>,
    names: Vec<String>,
    error: Mutex<Option<(usize, String)>>,
}

impl ChainShared {
    /// Record the first error and stall every pipe on both sides of the
    /// origin. Idempotent: later calls leave the recorded error and any
    /// non-Active pipes unchanged.
    fn fail(&self, origin: usize, message: &str) {
        {
            let mut slot = self.error.lock().unwrap();
            if slot.is_none() {
                *slot = Some((origin, message.to_string()));
            }
        }
        for pipe in &self.pipes {
            pipe.stall(message);
        }
    }
}

/// Handle to a started chain.
pub struct RunningChain {
    shared: Arc<ChainShared>,
    handles: Vec<Option<JoinHandle<()>>>,
    done_rx: mpsc::Receiver<(usize, Result<()>)>,
    done: Vec<bool>,
    first_error: Option<Error>,
    eos_injected: bool,
}

impl RunningChain {
    /// The pipe feeding the first component. For source components this is a
    /// control pipe; for others the application streams data into it.
    pub fn input(&self) -> Pipe {
        self.shared.pipes[0].clone()
    }

    /// The pipe carrying the last component's output.
    pub fn output(&self) -> Pipe {
        self.shared.pipes[self.shared.pipes.len() - 1].clone()
    }

    pub fn pipe_states(&self) -> Vec<PipeState> {
        self.shared.pipes.iter().map(|p| p.state()).collect()
    }

    /// Stall every pipe with an error originating at component `origin`.
    pub fn propagate_error(&self, origin: usize, message: &str) {
        self.shared.fail(origin, message);
    }

    /// The first error recorded by any component, if the chain failed.
    pub fn error(&self) -> Option<String> {
        self.shared
            .error
            .lock()
            .unwrap()
            .as_ref()
            .map(|(k, msg)| format!("component '{}': {msg}", self.shared.names[*k]))
    }

    /// Wait for every component to finish on its own (the source ends the
    /// stream). Returns the chain's first error if one was recorded.
    pub fn wait(&mut self, timeout: Duration) -> Result<()> {
        self.join_all(timeout)?;
        self.take_result()
    }

    /// Inject `eos` at the head and wait for all components to join.
    /// Calling stop on a finished or already-stopped chain is a no-op.
    pub fn stop(&mut self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        if !self.eos_injected {
            self.inject_eos(deadline)?;
            self.eos_injected = true;
        }
        self.join_all(timeout)?;
        self.take_result()
    }

    fn take_result(&mut self) -> Result<()> {
        if self.first_error.is_none() {
            if let Some((k, msg)) = self.shared.error.lock().unwrap().clone() {
                self.first_error = Some(Error::Chain(format!(
                    "component '{}': {msg}",
                    self.shared.names[k]
                )));
            }
        }
        match &self.first_error {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn inject_eos(&self, deadline: Instant) -> Result<()> {
        let head = &self.shared.pipes[0];
        // The head pipe seq counter is shared with whoever fed it; use a seq
        // above anything already put. Sequence numbers are consecutive from
        // zero in normal operation, so len() observations stay well below
        // u64::MAX/2.
        let mut packet = Packet::new(u64::MAX / 2, Payload::Empty, PacketFlags::EOS);
        loop {
            match head.try_put(packet) {
                Ok(None) => return Ok(()),
                // Already terminated (source finished or eos injected before).
                Err(crate::error::PipeError::Terminated) => return Ok(()),
                Err(crate::error::PipeError::Stalled(_)) => return Ok(()),
                Err(e) => return Err(e.into()),
                Ok(Some(back)) => {
                    if Instant::now() >= deadline {
                        return Err(Error::StopTimeout {
                            component: self.shared.names[0].clone(),
                            timeout_ms: 0,
                        });
                    }
                    packet = back;
                    thread::sleep(Duration::from_millis(1));
                }
            }
        }
    }

    fn join_all(&mut self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        while self.done.iter().any(|d| !d) {
            let now = Instant::now();
            if now >= deadline {
                let stuck = self
                    .done
                    .iter()
                    .position(|d| !d)
                    .map(|k| self.shared.names[k].clone())
                    .unwrap_or_default();
                return Err(Error::StopTimeout {
                    component: stuck,
                    timeout_ms: timeout.as_millis() as u64,
                });
            }
            match self.done_rx.recv_timeout(deadline - now) {
                Ok((k, result)) => {
                    self.done[k] = true;
                    if let Some(handle) = self.handles[k].take() {
                        let _ = handle.join();
                    }
                    if self.first_error.is_none() {
                        if let Err(e) = result {
                            self.first_error = Some(Error::Chain(format!(
                                "component '{}': {e}",
                                self.shared.names[k]
                            )));
                        }
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => continue,
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            }
        }
        Ok(())
    }
}
