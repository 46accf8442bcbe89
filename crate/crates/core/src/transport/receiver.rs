//! Receiver side: verify messages, acknowledge every one, deduplicate
//! resends, and re-emit packets in order onto a pipe.

use std::io::{Read, Write};

use crate::error::{Error, Result, TransportError};
use crate::packet::PayloadKind;
use crate::pipeline::{Component, Emitter, Pipe};

use super::wire::{decode_packet, peek_seq, Ack, AckStatus, HEADER_LEN};

/// Read one whole wire message. Returns `None` on clean EOF at a message
/// boundary.
pub fn read_message<R: Read>(r: &mut R) -> std::result::Result<Option<Vec<u8>>, TransportError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = r
            .read(&mut header[filled..])
            .map_err(|e| TransportError::Io(e.to_string()))?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(TransportError::Io(
                "connection closed inside a message header".into(),
            ));
        }
        filled += n;
    }
    let length = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    // Sanity bound so a garbled length cannot trigger a huge allocation.
    const MAX_MESSAGE: usize = 1 << 28;
    if length > MAX_MESSAGE {
        return Err(TransportError::BadHeader(format!(
            "message length {length} exceeds the {MAX_MESSAGE}-byte bound"
        )));
    }
    let mut msg = Vec::with_capacity(HEADER_LEN + length);
    msg.extend_from_slice(&header);
    msg.resize(HEADER_LEN + length, 0);
    r.read_exact(&mut msg[HEADER_LEN..])
        .map_err(|e| TransportError::Io(format!("reading payload: {e}")))?;
    Ok(Some(msg))
}

/// Verified packets re-emitted in sequence order onto `output`. Every
/// message is acknowledged; duplicates (resends after a lost ack) are
/// acknowledged OK but not re-emitted. Returns after forwarding `eos`.
pub fn receive_loop<L: Read + Write>(link: &mut L, output: &Pipe, control: &Pipe) -> Result<()> {
    let mut emitter = Emitter::new();
    let mut expected: u32 = 0;
    loop {
        if let Some(p) = control.try_get()? {
            if p.flags.eos {
                return Err(Error::Chain("receiver stopped before stream end".into()));
            }
        }
        let msg = match read_message(link) {
            Ok(Some(m)) => m,
            Ok(None) => {
                return Err(Error::Transport(TransportError::Io(
                    "connection closed before eos".into(),
                )))
            }
            Err(e) => return Err(e.into()),
        };
        let (ack, deliver) = match decode_packet(&msg) {
            Ok(packet) => {
                let seq = packet.seq as u32;
                if seq == expected {
                    expected = expected.wrapping_add(1);
                    (
                        Ack {
                            status: AckStatus::Ok,
                            seq,
                        },
                        Some(packet),
                    )
                } else if seq < expected {
                    // Resend of something already delivered.
                    (
                        Ack {
                            status: AckStatus::Ok,
                            seq,
                        },
                        None,
                    )
                } else {
                    (
                        Ack {
                            status: AckStatus::SeqGap,
                            seq,
                        },
                        None,
                    )
                }
            }
            Err(TransportError::CrcMismatch { .. }) => (
                Ack {
                    status: AckStatus::CrcFail,
                    seq: peek_seq(&msg),
                },
                None,
            ),
            Err(TransportError::SeqGap { got, .. }) => (
                Ack {
                    status: AckStatus::SeqGap,
                    seq: got,
                },
                None,
            ),
            Err(_) => (
                Ack {
                    status: AckStatus::BadHeader,
                    seq: peek_seq(&msg),
                },
                None,
            ),
        };
        if let Some(packet) = deliver {
            let eos = packet.flags.eos;
            emitter.emit(output, packet.payload, packet.flags)?;
            link.write_all(&ack.to_bytes())
                .map_err(|e| TransportError::Io(e.to_string()))?;
            link.flush().map_err(|e| TransportError::Io(e.to_string()))?;
            if eos {
                return Ok(());
            }
        } else {
            link.write_all(&ack.to_bytes())
                .map_err(|e| TransportError::Io(e.to_string()))?;
            link.flush().map_err(|e| TransportError::Io(e.to_string()))?;
        }
    }
}

/// Chain source component wrapping [`receive_loop`] on an owned connection.
pub struct ReceiverComponent<L> {
    link: Option<L>,
    kind: PayloadKind,
}

impl<L: Read + Write + Send> ReceiverComponent<L> {
    /// `kind` declares the payload kind the peer streams, for link-time
    /// validation against the next component.
    pub fn new(link: L, kind: PayloadKind) -> Self {
        ReceiverComponent {
            link: Some(link),
            kind,
        }
    }
}

impl<L: Read + Write + Send> Component for ReceiverComponent<L> {
    fn name(&self) -> &str {
        "receiver"
    }

    fn input_kind(&self) -> Option<PayloadKind> {
        None
    }

    fn output_kind(&self) -> PayloadKind {
        self.kind
    }

    fn run(&mut self, input: &Pipe, output: &Pipe) -> Result<()> {
        let mut link = self
            .link
            .take()
            .ok_or_else(|| Error::Chain("receiver connection already consumed".into()))?;
        match receive_loop(&mut link, output, input) {
            Ok(()) => Ok(()),
            Err(e) => {
                // Make sure downstream still sees an end even on failure.
                let _ = input;
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{AudioChunk, Packet, Payload};
    use crate::pipeline::Pipe;
    use crate::transport::link::{memory_duplex, LossyLink};
    use crate::transport::sender::PacketSender;
    use crate::transport::wire::encode_packet;
    use std::io::{Read, Write};
    use std::thread;

    fn audio_packet(seq: u64, n: usize) -> Packet {
        Packet::data(
            seq,
            Payload::AudioChunk(AudioChunk {
                samples: (0..n)
                    .map(|i| ((seq * 131 + i as u64 * 17) % 65536) as u16 as i16)
                    .collect(),
                sample_rate: 16000,
            }),
        )
    }

    fn spawn_receiver(mut server: crate::transport::link::MemoryLink, out: Pipe) -> thread::JoinHandle<Result<()>> {
        let control = Pipe::new(4);
        thread::spawn(move || receive_loop(&mut server, &out, &control))
    }

    /// Flips one payload bit in the first `n` writes, then passes through.
    struct CorruptFirst<L> {
        inner: L,
        remaining: u32,
        sends: u32,
    }

    impl<L: Read> Read for CorruptFirst<L> {
        fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
            self.inner.read(out)
        }
    }

    impl<L: Write> Write for CorruptFirst<L> {
        fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
            self.sends += 1;
            if self.remaining > 0 && data.len() > HEADER_LEN {
                self.remaining -= 1;
                let mut copy = data.to_vec();
                copy[HEADER_LEN] ^= 0x01;
                self.inner.write_all(&copy)?;
            } else {
                self.inner.write_all(data)?;
            }
            Ok(data.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            self.inner.flush()
        }
    }

    #[test]
    fn lossless_channel_one_send_each() {
        let (client, server) = memory_duplex();
        let out = Pipe::new(256);
        let t = spawn_receiver(server, out.clone());

        let mut sender = PacketSender::new(client, 3);
        for i in 0..100 {
            let mut p = audio_packet(i, 8);
            p.flags.eos = i == 99;
            sender.send_with_retry(&p).unwrap();
        }
        t.join().unwrap().unwrap();

        for i in 0..100 {
            let p = out.get().unwrap();
            assert_eq!(p.seq, i);
            assert_eq!(p.flags.eos, i == 99);
        }
    }

    #[test]
    fn corrupting_first_attempt_takes_two_sends() {
        let (client, server) = memory_duplex();
        let out = Pipe::new(16);
        let t = spawn_receiver(server, out.clone());

        let link = CorruptFirst {
            inner: client,
            remaining: 1,
            sends: 0,
        };
        let mut sender = PacketSender::new(link, 3);
        sender.send_with_retry(&audio_packet(0, 4)).unwrap();
        sender.send_with_retry(&Packet::eos(1)).unwrap();
        assert_eq!(sender.into_inner().sends, 3, "2 sends for seq 0, 1 for eos");
        t.join().unwrap().unwrap();
        assert_eq!(out.get().unwrap().seq, 0);
        assert!(out.get().unwrap().flags.eos);
    }

    #[test]
    fn retries_exhausted_after_four_sends() {
        let (client, server) = memory_duplex();
        let out = Pipe::new(16);
        let t = spawn_receiver(server, out);

        let link = CorruptFirst {
            inner: client,
            remaining: u32::MAX,
            sends: 0,
        };
        let mut sender = PacketSender::new(link, 3);
        let err = sender.send_with_retry(&audio_packet(0, 4)).unwrap_err();
        match err {
            TransportError::RetriesExhausted { attempts, last } => {
                assert_eq!(attempts, 4);
                assert_eq!(last, AckStatus::CrcFail as u8);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(sender.into_inner().sends, 4);
        t.join().unwrap().unwrap_err();
    }

    #[test]
    fn duplicate_seq_emitted_once() {
        let (mut client, server) = memory_duplex();
        let out = Pipe::new(16);
        let t = spawn_receiver(server, out.clone());

        let msg0 = encode_packet(&audio_packet(0, 4)).unwrap();
        let eos = encode_packet(&Packet::eos(1)).unwrap();
        let mut ack = [0u8; 5];
        // Send seq 0 twice (as after a lost ack), then eos.
        client.write_all(&msg0).unwrap();
        client.read_exact(&mut ack).unwrap();
        assert_eq!(ack[0], AckStatus::Ok as u8);
        client.write_all(&msg0).unwrap();
        client.read_exact(&mut ack).unwrap();
        assert_eq!(ack[0], AckStatus::Ok as u8, "duplicate still acked OK");
        client.write_all(&eos).unwrap();
        client.read_exact(&mut ack).unwrap();
        t.join().unwrap().unwrap();

        assert_eq!(out.get().unwrap().seq, 0);
        assert!(out.get().unwrap().flags.eos);
        assert!(out.get().is_err(), "exactly one copy of seq 0");
    }

    #[test]
    fn seq_jump_gets_gap_ack() {
        let (mut client, server) = memory_duplex();
        let out = Pipe::new(16);
        let t = spawn_receiver(server, out);

        let msg = encode_packet(&audio_packet(6, 4)).unwrap();
        client.write_all(&msg).unwrap();
        let mut ack = [0u8; 5];
        client.read_exact(&mut ack).unwrap();
        assert_eq!(ack[0], AckStatus::SeqGap as u8);
        assert_eq!(u32::from_le_bytes(ack[1..5].try_into().unwrap()), 6);
        drop(client);
        let _ = t.join().unwrap();
    }

    #[test]
    fn connection_loss_is_an_error() {
        let (client, server) = memory_duplex();
        let out = Pipe::new(16);
        let t = spawn_receiver(server, out);
        drop(client); // No eos was ever sent.
        assert!(t.join().unwrap().is_err());
    }

    #[test]
    fn soak_corrupted_channel_delivers_exactly_once() {
        let n = 1000u64;
        let (client, server) = memory_duplex();
        let out = Pipe::new(64);
        let receiver = spawn_receiver(server, out.clone());
        let collector = thread::spawn(move || {
            let mut seqs = Vec::new();
            loop {
                match out.get() {
                    Ok(p) => {
                        let eos = p.flags.eos;
                        seqs.push(p.seq);
                        if eos {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
            seqs
        });

        let lossy = LossyLink::new(client, 0.10, 2024);
        let mut sender = PacketSender::new(lossy, 100);
        for i in 0..n {
            let mut p = audio_packet(i, 16);
            p.flags.eos = i == n - 1;
            sender.send_with_retry(&p).unwrap();
        }
        assert!(sender.into_inner().corrupted() > 50);
        receiver.join().unwrap().unwrap();
        let seqs = collector.join().unwrap();
        assert_eq!(seqs, (0..n).collect::<Vec<_>>(), "exactly once, in order");
    }
}
