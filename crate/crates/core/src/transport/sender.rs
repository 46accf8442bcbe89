//! Stop-and-wait packet sender with verify-and-resend.

use std::io::{Read, Write};

use crate::error::{Error, PipeError, Result, TransportError};
use crate::packet::{Packet, PayloadKind};
use crate::pipeline::{Component, Emitter, Pipe};

use super::wire::{encode_packet, Ack, AckStatus, ACK_LEN};

pub const DEFAULT_MAX_RETRIES: u32 = 3;

/// Sends packets over a reliable byte stream, one in flight at a time, and
/// resends whenever the receiver fails to verify a message.
pub struct PacketSender<L> {
    link: L,
    max_retries: u32,
}

impl<L: Read + Write> PacketSender<L> {
    pub fn new(link: L, max_retries: u32) -> Self {
        PacketSender { link, max_retries }
    }

    pub fn into_inner(self) -> L {
        self.link
    }

    /// Send one packet and wait for its acknowledgment, resending on any
    /// failed verification until the retry budget runs out.
    pub fn send_with_retry(&mut self, packet: &Packet) -> std::result::Result<Ack, TransportError> {
        let msg = encode_packet(packet)?;
        let attempts = 1 + self.max_retries;
        let mut last_status = AckStatus::Ok as u8;
        for _ in 0..attempts {
            self.link
                .write_all(&msg)
                .map_err(|e| TransportError::Io(e.to_string()))?;
            self.link
                .flush()
                .map_err(|e| TransportError::Io(e.to_string()))?;
            let mut ack_bytes = [0u8; ACK_LEN];
            self.link
                .read_exact(&mut ack_bytes)
                .map_err(|e| TransportError::Io(format!("reading ack: {e}")))?;
            let ack = Ack::from_bytes(&ack_bytes)?;
            if ack.status == AckStatus::Ok {
                return Ok(ack);
            }
            last_status = ack.status as u8;
        }
        Err(TransportError::RetriesExhausted {
            attempts,
            last: last_status,
        })
    }
}

/// Chain component wrapping [`PacketSender`]: consumes packets of one kind,
/// transmits each, and forwards the acknowledged packet downstream.
pub struct SenderComponent<L> {
    sender: PacketSender<L>,
    kind: PayloadKind,
}

impl<L: Read + Write + Send> SenderComponent<L> {
    pub fn new(link: L, kind: PayloadKind, max_retries: u32) -> Self {
        SenderComponent {
            sender: PacketSender::new(link, max_retries),
            kind,
        }
    }
}

impl<L: Read + Write + Send> Component for SenderComponent<L> {
    fn name(&self) -> &str {
        "sender"
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        Some(self.kind)
    }

    fn output_kind(&self) -> PayloadKind {
        self.kind
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut emitter = Emitter::new();
        let mut wire_seq = 0u64;
        loop {
            let packet = match input.get() {
                Ok(p) => p,
                Err(PipeError::Terminated) => {
                    let eos = Packet::eos(wire_seq);
                    self.sender.send_with_retry(&eos).map_err(Error::from)?;
                    emitter.emit(output, eos.payload, eos.flags)?;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            // Re-stamp with the connection's own consecutive sequence.
            let wire_packet = Packet::new(wire_seq, packet.payload, packet.flags);
            wire_seq += 1;
            self.sender.send_with_retry(&wire_packet).map_err(Error::from)?;
            let eos = wire_packet.flags.eos;
            emitter.emit(output, wire_packet.payload, wire_packet.flags)?;
            if eos {
                return Ok(());
            }
        }
    }
}
