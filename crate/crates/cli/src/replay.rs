//! File-replay audio source: simulates a live recorder by streaming buffered
//! samples as timed chunks.

use std::time::{Duration, Instant};

use ekrt_core::error::{PipeError, Result};
use ekrt_core::packet::{AudioChunk, PacketFlags, Payload, PayloadKind};
use ekrt_core::pipeline::{Component, Emitter, Pipe};

pub const DEFAULT_CHUNK_MS: u64 = 100;

pub struct ReplayComponent {
    samples: Vec<i16>,
    sample_rate: u32,
    chunk_ms: u64,
    /// Pace emission to the wall clock at 1x speed; otherwise stream as fast
    /// as the chain consumes.
    realtime: bool,
}

impl ReplayComponent {
    pub fn new(samples: Vec<i16>, sample_rate: u32, chunk_ms: u64, realtime: bool) -> Self {
        ReplayComponent {
            samples,
            sample_rate,
            chunk_ms: chunk_ms.max(1),
            realtime,
        }
    }
}

impl Component for ReplayComponent {
    fn name(&self) -> &str {
        "replay"
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        None
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::AudioChunk
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut emitter = Emitter::new();
        let per_chunk = (self.sample_rate as u64 * self.chunk_ms / 1000).max(1) as usize;
        let chunk_duration = Duration::from_millis(self.chunk_ms);
        let start = Instant::now();
        let mut emitted_chunks = 0u32;
        let mut stopped = false;
        for chunk in self.samples.chunks(per_chunk) {
            match input.try_get() {
                Ok(Some(p)) if p.flags.eos => {
                    stopped = true;
                    break;
                }
                Ok(_) => {}
                Err(PipeError::Terminated) => {
                    stopped = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
            emitter.emit(
                output,
                Payload::AudioChunk(AudioChunk {
                    samples: chunk.to_vec(),
                    sample_rate: self.sample_rate,
                }),
                PacketFlags::NONE,
            )?;
            emitted_chunks += 1;
            if self.realtime {
                // Each chunk is released at the moment its audio would have
                // finished being captured.
                let target = start + chunk_duration * emitted_chunks;
                let now = Instant::now();
                if target > now {
                    std::thread::sleep(target - now);
                }
            }
        }
        let _ = stopped;
        emitter.emit(output, Payload::Empty, PacketFlags::EOS)?;
        Ok(())
    }
}
