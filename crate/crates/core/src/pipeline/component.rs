//! Component trait and helpers shared by the concrete processing stages.

use crate::error::{Error, PipeError, Result};
use crate::packet::{Packet, PacketFlags, Payload, PayloadKind};
use crate::pipeline::pipe::Pipe;

/// A processing stage owned by a chain. Each component runs on its own
/// thread, getting packets from its input pipe and appending results to its
/// output pipe until it forwards `eos` or fails.
pub trait Component: Send {
    fn name(&self) -> &str;

    /// Payload kind accepted on the input pipe. `None` marks a source: its
    /// input pipe carries only control packets (stop requests as `eos`).
    fn input_kind(&self) -> Option<PayloadKind>;

    /// Payload kind produced on the output pipe.
    fn output_kind(&self) -> PayloadKind;

    /// One-time setup before any thread is spawned. A failure here aborts
    /// chain start.
    fn init(&mut self) -> Result<()> {
        Ok(())
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()>;
}

/// Output-side packet counter: stamps consecutive sequence numbers so every
/// pipe sees seq 0,1,2,...
pub struct Emitter {
    seq: u64,
}

impl Emitter {
    pub fn new() -> Self {
        Emitter { seq: 0 }
    }

    pub fn emit(&mut self, pipe: &Pipe, payload: Payload, flags: PacketFlags) -> Result<()> {
        let packet = Packet::new(self.seq, payload, flags);
        self.seq += 1;
        pipe.put(packet).map_err(Error::from)
    }
}

impl Default for Emitter {
    fn default() -> Self {
        Self::new()
    }
}

/// Segment boundary kinds a stage can be flushed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Upstream marked an endpoint: drain look-ahead state and reset for the
    /// next segment.
    Endpoint,
    /// End of stream.
    Eos,
}

/// One output of a stage: a payload, optionally marking an endpoint the
/// stage itself decided on (only detectors like the VAD set this).
pub struct Emit {
    pub payload: Payload,
    pub endpoint: bool,
}

impl Emit {
    pub fn data(payload: Payload) -> Self {
        Emit {
            payload,
            endpoint: false,
        }
    }

    pub fn endpoint(payload: Payload) -> Self {
        Emit {
            payload,
            endpoint: true,
        }
    }
}

/// A 1-in/N-out streaming transform with segment-boundary flushing. Stages
/// are wrapped by [`StageComponent`], which handles packet plumbing and the
/// in-band flag protocol uniformly.
pub trait StreamStage: Send {
    fn name(&self) -> &str;
    fn input_kind(&self) -> PayloadKind;
    fn output_kind(&self) -> PayloadKind;
    fn init(&mut self) -> Result<()> {
        Ok(())
    }
    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>>;
    /// Drain buffered state at a segment boundary. Stages must be ready for
    /// the next segment afterwards.
    fn flush(&mut self, boundary: Boundary) -> Result<Vec<Emit>>;
}

/// Adapter running a [`StreamStage`] as a chain component.
///
/// Flag protocol: outputs produced for an input packet are emitted in order;
/// if the input carried `endpoint` or `eos`, the stage is flushed and the
/// flag rides the last emitted packet (an `Empty` control packet is emitted
/// when there is no data to carry it).
pub struct StageComponent<S: StreamStage> {
    stage: S,
}

impl<S: StreamStage> StageComponent<S> {
    pub fn new(stage: S) -> Self {
        StageComponent { stage }
    }
}

impl<S: StreamStage> Component for StageComponent<S> {
    fn name(&self) -> &str {
        self.stage.name()
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        Some(self.stage.input_kind())
    }

    fn output_kind(&self) -> PayloadKind {
        self.stage.output_kind()
    }

    fn init(&mut self) -> Result<()> {
        self.stage.init()
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut emitter = Emitter::new();
        loop {
            let packet = match input.get() {
                Ok(p) => p,
                // Clean close without an eos packet: treat like eos.
                Err(PipeError::Terminated) => {
                    let outs = self.stage.flush(Boundary::Eos)?;
                    emit_all(&mut emitter, output, outs, PacketFlags::EOS)?;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            let mut outs = match packet.payload {
                Payload::Empty => Vec::new(),
                payload => self.stage.process(payload)?,
            };
            let flags = packet.flags;
            if flags.endpoint {
                outs.extend(self.stage.flush(Boundary::Endpoint)?);
            }
            if flags.eos {
                outs.extend(self.stage.flush(Boundary::Eos)?);
            }
            emit_all(&mut emitter, output, outs, flags)?;
            if flags.eos {
                return Ok(());
            }
        }
    }
}

/// Emit stage outputs in order, merging the input packet's `flags` onto the
/// last one. When flags are set but there is nothing to carry them, an Empty
/// control packet is sent.
pub fn emit_all(
    emitter: &mut Emitter,
    output: &Pipe,
    emits: Vec<Emit>,
    flags: PacketFlags,
) -> Result<()> {
    let carry = flags.endpoint || flags.eos;
    if emits.is_empty() {
        if carry {
            emitter.emit(output, Payload::Empty, flags)?;
        }
        return Ok(());
    }
    let last = emits.len() - 1;
    for (i, e) in emits.into_iter().enumerate() {
        let f = PacketFlags {
            endpoint: e.endpoint || (i == last && flags.endpoint),
            eos: i == last && flags.eos,
        };
        emitter.emit(output, e.payload, f)?;
    }
    Ok(())
}

/// Pass-through component, useful for tests and as a chain no-op.
pub struct PassThrough {
    name: String,
    kind: PayloadKind,
}

impl PassThrough {
    pub fn new(name: impl Into<String>, kind: PayloadKind) -> Self {
        PassThrough {
            name: name.into(),
            kind,
        }
    }
}

impl Component for PassThrough {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        Some(self.kind)
    }

    fn output_kind(&self) -> PayloadKind {
        self.kind
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut emitter = Emitter::new();
        loop {
            let packet = match input.get() {
                Ok(p) => p,
                Err(PipeError::Terminated) => {
                    emitter.emit(output, Payload::Empty, PacketFlags::EOS)?;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            let eos = packet.flags.eos;
            emitter.emit(output, packet.payload, packet.flags)?;
            if eos {
                return Ok(());
            }
        }
    }
}
