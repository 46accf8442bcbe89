//! Wire format: a fixed 20-byte verified header followed by the payload.
//!
//! Header layout (all integers little-endian):
//!
//! ```text
//! offset 0..4    magic "EKRT"
//! offset 4       version (0x01)
//! offset 5       payload kind code
//! offset 6       flags: bit0 endpoint, bit1 eos
//! offset 7       reserved (0x00)
//! offset 8..12   sequence number (u32)
//! offset 12..16  payload byte count (u32)
//! offset 16..20  CRC-32 of the payload (IEEE polynomial)
//! ```
//!
//! Payload encodings: floats are 4-byte little-endian; matrices are prefixed
//! by 4-byte `rows`, `cols`; audio samples are 2-byte signed PCM. Matrices
//! quantize to f32 on the wire.

use crate::error::TransportError;
use crate::matrix::Matrix;
use crate::packet::{
    AudioChunk, FeatureMatrix, FrameBlock, Hypothesis, LoglikBlock, Packet, PacketFlags, Payload,
    PayloadKind,
};

pub const WIRE_MAGIC: [u8; 4] = *b"EKRT";
pub const WIRE_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 20;
pub const ACK_LEN: usize = 5;

const FLAG_ENDPOINT: u8 = 0b01;
const FLAG_EOS: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AckStatus {
    Ok = 0,
    CrcFail = 1,
    BadHeader = 2,
    SeqGap = 3,
}

impl AckStatus {
    pub fn from_code(code: u8) -> Option<AckStatus> {
        match code {
            0 => Some(AckStatus::Ok),
            1 => Some(AckStatus::CrcFail),
            2 => Some(AckStatus::BadHeader),
            3 => Some(AckStatus::SeqGap),
            _ => None,
        }
    }
}

/// 5-byte acknowledgment: status code plus the echoed sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub status: AckStatus,
    pub seq: u32,
}

impl Ack {
    pub fn to_bytes(self) -> [u8; ACK_LEN] {
        let mut b = [0u8; ACK_LEN];
        b[0] = self.status as u8;
        b[1..5].copy_from_slice(&self.seq.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; ACK_LEN]) -> Result<Ack, TransportError> {
        let status = AckStatus::from_code(b[0])
            .ok_or_else(|| TransportError::BadHeader(format!("unknown ack status {}", b[0])))?;
        Ok(Ack {
            status,
            seq: u32::from_le_bytes(b[1..5].try_into().unwrap()),
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

fn encode_matrix(out: &mut Vec<u8>, m: &Matrix) {
    put_u32(out, m.rows() as u32);
    put_u32(out, m.cols() as u32);
    for &v in m.data() {
        put_f32(out, v);
    }
}

fn encode_payload(payload: &Payload) -> Result<Vec<u8>, TransportError> {
    let mut out = Vec::new();
    match payload {
        Payload::Empty => {}
        Payload::AudioChunk(c) => {
            put_u32(&mut out, c.sample_rate);
            for &s in &c.samples {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        Payload::FrameBlock(b) => encode_matrix(&mut out, &b.frames),
        Payload::FeatureBlock(b) => {
            out.extend_from_slice(&b.first_frame_index.to_le_bytes());
            encode_matrix(&mut out, &b.data);
        }
        Payload::LoglikBlock(b) => {
            out.extend_from_slice(&b.first_frame_index.to_le_bytes());
            encode_matrix(&mut out, &b.data);
        }
        Payload::HypothesisSet(hyps) => {
            put_u32(&mut out, hyps.len() as u32);
            for h in hyps {
                put_u32(&mut out, h.words.len() as u32);
                for &w in &h.words {
                    put_u32(&mut out, w);
                }
                put_f32(&mut out, h.cost);
                out.push(h.is_final as u8);
            }
        }
    }
    Ok(out)
}

/// Encode a packet as header plus payload, without compression. The CRC is
/// computed over the payload bytes only.
pub fn encode_packet(packet: &Packet) -> Result<Vec<u8>, TransportError> {
    if packet.seq > u32::MAX as u64 {
        return Err(TransportError::BadHeader(format!(
            "seq {} exceeds the wire's u32 range",
            packet.seq
        )));
    }
    let payload = encode_payload(&packet.payload)?;
    if payload.len() as u64 > u32::MAX as u64 {
        return Err(TransportError::PayloadTooLarge(payload.len() as u64));
    }
    let mut msg = Vec::with_capacity(HEADER_LEN + payload.len());
    msg.extend_from_slice(&WIRE_MAGIC);
    msg.push(WIRE_VERSION);
    msg.push(packet.payload.kind() as u8);
    let mut flags = 0u8;
    if packet.flags.endpoint {
        flags |= FLAG_ENDPOINT;
    }
    if packet.flags.eos {
        flags |= FLAG_EOS;
    }
    msg.push(flags);
    msg.push(0x00);
    msg.extend_from_slice(&(packet.seq as u32).to_le_bytes());
    msg.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    msg.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    msg.extend_from_slice(&payload);
    Ok(msg)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TransportError> {
        if self.pos + n > self.buf.len() {
            return Err(TransportError::BadHeader(format!(
                "payload truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TransportError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TransportError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64, TransportError> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(TransportError::BadHeader("non-finite float in payload".into()));
        }
        Ok(v as f64)
    }

    fn matrix(&mut self) -> Result<Matrix, TransportError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut m = Matrix::with_cols(cols);
        let mut row = vec![0.0; cols];
        for _ in 0..rows {
            for slot in &mut row {
                *slot = self.f32()?;
            }
            m.push_row(&row);
        }
        Ok(m)
    }

    fn done(&self) -> Result<(), TransportError> {
        if self.pos != self.buf.len() {
            return Err(TransportError::BadHeader(format!(
                "{} trailing payload bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn decode_payload(kind: PayloadKind, bytes: &[u8]) -> Result<Payload, TransportError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let payload = match kind {
        PayloadKind::Empty => Payload::Empty,
        PayloadKind::AudioChunk => {
            let sample_rate = r.u32()?;
            let rest = r.take(bytes.len() - r.pos)?;
            if rest.len() % 2 != 0 {
                return Err(TransportError::BadHeader("odd PCM byte count".into()));
            }
            let samples = rest
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect();
            Payload::AudioChunk(AudioChunk {
                samples,
                sample_rate,
            })
        }
        PayloadKind::FrameBlock => Payload::FrameBlock(FrameBlock { frames: r.matrix()? }),
        PayloadKind::FeatureBlock => {
            let first_frame_index = r.u64()?;
            Payload::FeatureBlock(FeatureMatrix {
                data: r.matrix()?,
                first_frame_index,
            })
        }
        PayloadKind::LoglikBlock => {
            let first_frame_index = r.u64()?;
            Payload::LoglikBlock(LoglikBlock {
                data: r.matrix()?,
                first_frame_index,
            })
        }
        PayloadKind::HypothesisSet => {
            let count = r.u32()? as usize;
            let mut hyps = Vec::with_capacity(count);
            for _ in 0..count {
                let n = r.u32()? as usize;
                let mut words = Vec::with_capacity(n);
                for _ in 0..n {
                    words.push(r.u32()?);
                }
                let cost = r.f32()?;
                let is_final = r.take(1)?[0] != 0;
                hyps.push(Hypothesis {
                    words,
                    cost,
                    is_final,
                });
            }
            Payload::HypothesisSet(hyps)
        }
    };
    r.done()?;
    Ok(payload)
}

/// Parse and verify one whole message. Checks magic, version, payload kind,
/// reserved byte, length, and payload CRC.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, TransportError> {
    if bytes.len() < HEADER_LEN {
        return Err(TransportError::Truncated {
            need: HEADER_LEN,
            have: bytes.len(),
        });
    }
    if bytes[0..4] != WIRE_MAGIC {
        return Err(TransportError::BadHeader(format!(
            "bad magic {:02x?}",
            &bytes[0..4]
        )));
    }
    if bytes[4] != WIRE_VERSION {
        return Err(TransportError::BadHeader(format!(
            "unsupported version {}",
            bytes[4]
        )));
    }
    let kind = PayloadKind::from_code(bytes[5]).ok_or_else(|| {
        TransportError::BadHeader(format!("unknown payload kind code {}", bytes[5]))
    })?;
    let flag_bits = bytes[6];
    if flag_bits & !(FLAG_ENDPOINT | FLAG_EOS) != 0 {
        return Err(TransportError::BadHeader(format!(
            "unknown flag bits {flag_bits:#04x}"
        )));
    }
    if bytes[7] != 0x00 {
        return Err(TransportError::BadHeader(format!(
            "reserved byte is {:#04x}",
            bytes[7]
        )));
    }
    let seq = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let length = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let crc = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if bytes.len() != HEADER_LEN + length {
        return Err(TransportError::Truncated {
            need: HEADER_LEN + length,
            have: bytes.len(),
        });
    }
    let payload_bytes = &bytes[HEADER_LEN..];
    let computed = crc32fast::hash(payload_bytes);
    if computed != crc {
        return Err(TransportError::CrcMismatch {
            expected: crc,
            computed,
        });
    }
    let payload = decode_payload(kind, payload_bytes)?;
    Ok(Packet {
        seq: seq as u64,
        payload,
        flags: PacketFlags {
            endpoint: flag_bits & FLAG_ENDPOINT != 0,
            eos: flag_bits & FLAG_EOS != 0,
        },
    })
}

/// [`decode_packet`] plus the sequence check: the packet must carry exactly
/// the expected sequence number.
pub fn decode_and_verify(bytes: &[u8], expected_seq: u32) -> Result<Packet, TransportError> {
    let packet = decode_packet(bytes)?;
    if packet.seq != expected_seq as u64 {
        return Err(TransportError::SeqGap {
            expected: expected_seq,
            got: packet.seq as u32,
        });
    }
    Ok(packet)
}

/// Best-effort read of the seq field from raw bytes, for echoing in
/// failure acks.
pub fn peek_seq(bytes: &[u8]) -> u32 {
    if bytes.len() >= 12 {
        u32::from_le_bytes(bytes[8..12].try_into().unwrap())
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc32_check_value() {
        // IEEE CRC-32 check value for "123456789".
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF43926);
        // Bitwise reference implementation, reflected polynomial 0xEDB88320.
        fn crc32_bitwise(data: &[u8]) -> u32 {
            let mut crc = 0xFFFF_FFFFu32;
            for &b in data {
                crc ^= b as u32;
                for _ in 0..8 {
                    crc = if crc & 1 != 0 {
                        (crc >> 1) ^ 0xEDB8_8320
                    } else {
                        crc >> 1
                    };
                }
            }
            !crc
        }
        assert_eq!(crc32_bitwise(b"123456789"), 0xCBF43926);
        assert_eq!(crc32_bitwise(b""), 0);
        let blob: Vec<u8> = (0..255).collect();
        assert_eq!(crc32fast::hash(&blob), crc32_bitwise(&blob));
    }

    #[test]
    fn golden_header_bytes() {
        // Empty payload, endpoint flag, seq 7: exactly 20 bytes.
        let p = Packet::new(7, Payload::Empty, PacketFlags::ENDPOINT);
        let bytes = encode_packet(&p).unwrap();
        assert_eq!(
            bytes,
            vec![
                0x45, 0x4B, 0x52, 0x54, // "EKRT"
                0x01, // version
                0x00, // ptype Empty
                0x01, // flags: endpoint
                0x00, // reserved
                0x07, 0x00, 0x00, 0x00, // seq 7
                0x00, 0x00, 0x00, 0x00, // length 0
                0x00, 0x00, 0x00, 0x00, // crc32 of empty payload
            ]
        );
    }

    #[test]
    fn decode_rejects_each_header_fault() {
        let p = Packet::eos(3);
        let good = encode_packet(&p).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_packet(&bad),
            Err(TransportError::BadHeader(_))
        ));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_packet(&bad),
            Err(TransportError::BadHeader(_))
        ));

        let mut bad = good.clone();
        bad[5] = 77;
        assert!(matches!(
            decode_packet(&bad),
            Err(TransportError::BadHeader(_))
        ));

        let mut bad = good;
        bad[7] = 1;
        assert!(matches!(
            decode_packet(&bad),
            Err(TransportError::BadHeader(_))
        ));

        assert!(matches!(
            decode_packet(&[0u8; 10]),
            Err(TransportError::Truncated { .. })
        ));
    }

    #[test]
    fn payload_bit_flip_fails_crc() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let p = Packet::data(
            0,
            Payload::AudioChunk(AudioChunk {
                samples: (0..64).map(|i| (i * 3) as i16).collect(),
                sample_rate: 16000,
            }),
        );
        let good = encode_packet(&p).unwrap();
        for _ in 0..200 {
            let mut bad = good.clone();
            let bit = rng.gen_range(0..(bad.len() - HEADER_LEN) * 8);
            bad[HEADER_LEN + bit / 8] ^= 1 << (bit % 8);
            assert!(
                matches!(decode_packet(&bad), Err(TransportError::CrcMismatch { .. })),
                "single-bit payload flip must fail CRC"
            );
        }
    }

    #[test]
    fn seq_gap_names_expected() {
        let p = Packet::eos(6);
        let bytes = encode_packet(&p).unwrap();
        match decode_and_verify(&bytes, 5) {
            Err(TransportError::SeqGap { expected: 5, got: 6 }) => {}
            other => panic!("expected seq gap, got {other:?}"),
        }
    }

    #[test]
    fn ack_roundtrip() {
        let a = Ack {
            status: AckStatus::SeqGap,
            seq: 0xDEAD_BEEF,
        };
        let b = Ack::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_bytes().len(), ACK_LEN);
        assert!(Ack::from_bytes(&[9, 0, 0, 0, 0]).is_err());
    }

    #[test]
    fn roundtrip_all_payload_kinds() {
        let flags = PacketFlags {
            endpoint: true,
            eos: false,
        };
        let packets = vec![
            Packet::new(1, Payload::Empty, flags),
            Packet::data(
                2,
                Payload::AudioChunk(AudioChunk {
                    samples: vec![-32768, -1, 0, 1, 32767],
                    sample_rate: 16000,
                }),
            ),
            Packet::data(
                3,
                Payload::FrameBlock(FrameBlock {
                    frames: Matrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 0.0]]).unwrap(),
                }),
            ),
            Packet::data(
                4,
                Payload::FeatureBlock(FeatureMatrix {
                    data: Matrix::from_rows(&[vec![1.5, 2.5, -3.5]]).unwrap(),
                    first_frame_index: 977,
                }),
            ),
            Packet::data(
                5,
                Payload::LoglikBlock(LoglikBlock {
                    data: Matrix::from_rows(&[vec![-1.0, -2.0]]).unwrap(),
                    first_frame_index: 3,
                }),
            ),
            Packet::data(
                6,
                Payload::HypothesisSet(vec![
                    Hypothesis {
                        words: vec![4, 2, 9],
                        cost: 3.25,
                        is_final: true,
                    },
                    Hypothesis {
                        words: vec![],
                        cost: 0.5,
                        is_final: false,
                    },
                ]),
            ),
        ];
        for p in packets {
            let bytes = encode_packet(&p).unwrap();
            let back = decode_packet(&bytes).unwrap();
            assert_eq!(p, back, "round trip must be the identity");
        }
    }
}
