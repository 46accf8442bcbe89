//! Chain component driving the token decoder: consumes log-likelihood rows,
//! emits partial hypotheses mid-stream, and finalizes N-best on endpoint and
//! end of stream.

use crate::error::{Error, PipeError, Result};
use crate::packet::{PacketFlags, Payload, PayloadKind};
use crate::pipeline::{Component, Emitter, Pipe};

use super::search::TokenDecoder;

pub struct DecoderComponent {
    decoder: TokenDecoder,
    nbest: usize,
    emit_partials: bool,
    segments: u64,
}

impl DecoderComponent {
    pub fn new(decoder: TokenDecoder) -> Self {
        let nbest = decoder.config().nbest;
        DecoderComponent {
            decoder,
            nbest,
            emit_partials: true,
            segments: 0,
        }
    }

    pub fn with_partials(mut self, emit_partials: bool) -> Self {
        self.emit_partials = emit_partials;
        self
    }

    fn finalize(&mut self, emitter: &mut Emitter, output: &Pipe, flags: PacketFlags) -> Result<()> {
        let hyps = self.decoder.finalize_nbest(self.nbest)?;
        self.segments += 1;
        emitter.emit(output, Payload::HypothesisSet(hyps), flags)
    }
}

impl Component for DecoderComponent {
    fn name(&self) -> &str {
        "decoder"
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        Some(PayloadKind::LoglikBlock)
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::HypothesisSet
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut emitter = Emitter::new();
        loop {
            let packet = match input.get() {
                Ok(p) => p,
                Err(PipeError::Terminated) => {
                    // Closed without an eos packet: finalize what is left.
                    if self.decoder.frames_decoded() > 0 || self.segments == 0 {
                        self.finalize(&mut emitter, output, PacketFlags::EOS)?;
                    } else {
                        emitter.emit(output, Payload::Empty, PacketFlags::EOS)?;
                    }
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            match packet.payload {
                Payload::LoglikBlock(block) => {
                    for row in block.data.iter_rows() {
                        self.decoder.advance(row)?;
                    }
                    if self.emit_partials
                        && !packet.flags.endpoint
                        && !packet.flags.eos
                        && self.decoder.has_tokens()
                    {
                        let partial = self.decoder.partial_best()?;
                        emitter.emit(
                            output,
                            Payload::HypothesisSet(vec![partial]),
                            PacketFlags::NONE,
                        )?;
                    }
                }
                Payload::Empty => {}
                other => {
                    return Err(Error::Chain(format!(
                        "decoder received {:?} payload",
                        other.kind()
                    )))
                }
            }
            if packet.flags.endpoint && self.decoder.frames_decoded() > 0 {
                let flags = PacketFlags {
                    endpoint: true,
                    eos: packet.flags.eos,
                };
                self.finalize(&mut emitter, output, flags)?;
                if packet.flags.eos {
                    return Ok(());
                }
                continue;
            }
            if packet.flags.eos {
                if self.decoder.frames_decoded() > 0 || self.segments == 0 {
                    self.finalize(&mut emitter, output, PacketFlags::EOS)?;
                } else {
                    emitter.emit(output, Payload::Empty, PacketFlags::EOS)?;
                }
                return Ok(());
            }
        }
    }
}
