//! The typed unit of flow between components.
//!
//! A packet carries one payload block plus in-band control flags. `endpoint`
//! marks a segment boundary decided upstream (the decoder finalizes on it);
//! `eos` marks the last packet of a stream.

use crate::matrix::Matrix;

/// Raw audio samples as signed 16-bit PCM at a given rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

/// A block of cut frames, one frame per row, samples scaled to [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock {
    pub frames: Matrix,
}

/// Acoustic feature rows with the absolute index of the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Matrix,
    pub first_frame_index: u64,
}

impl FeatureMatrix {
    pub fn dims(&self) -> usize {
        self.data.cols()
    }

    pub fn frames(&self) -> usize {
        self.data.rows()
    }
}

/// Per-frame log-likelihood rows over pdf indices (natural log).
#[derive(Debug, Clone, PartialEq)]
pub struct LoglikBlock {
    pub data: Matrix,
    pub first_frame_index: u64,
}

impl LoglikBlock {
    pub fn n_pdfs(&self) -> usize {
        self.data.cols()
    }

    pub fn frames(&self) -> usize {
        self.data.rows()
    }
}

/// A decoded word sequence with its total tropical cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<u32>,
    pub cost: f64,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Empty,
    AudioChunk(AudioChunk),
    FrameBlock(FrameBlock),
    FeatureBlock(FeatureMatrix),
    LoglikBlock(LoglikBlock),
    HypothesisSet(Vec<Hypothesis>),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Empty => PayloadKind::Empty,
            Payload::AudioChunk(_) => PayloadKind::AudioChunk,
            Payload::FrameBlock(_) => PayloadKind::FrameBlock,
            Payload::FeatureBlock(_) => PayloadKind::FeatureBlock,
            Payload::LoglikBlock(_) => PayloadKind::LoglikBlock,
            Payload::HypothesisSet(_) => PayloadKind::HypothesisSet,
        }
    }
}

/// Payload kind codes. The numeric values are part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PayloadKind {
    Empty = 0,
    AudioChunk = 1,
    FrameBlock = 2,
    FeatureBlock = 3,
    LoglikBlock = 4,
    HypothesisSet = 5,
}

impl PayloadKind {
    pub fn from_code(code: u8) -> Option<PayloadKind> {
        match code {
            0 => Some(PayloadKind::Empty),
            1 => Some(PayloadKind::AudioChunk),
            2 => Some(PayloadKind::FrameBlock),
            3 => Some(PayloadKind::FeatureBlock),
            4 => Some(PayloadKind::LoglikBlock),
            5 => Some(PayloadKind::HypothesisSet),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PacketFlags {
    pub endpoint: bool,
    pub eos: bool,
}

impl PacketFlags {
    pub const NONE: PacketFlags = PacketFlags {
        endpoint: false,
        eos: false,
    };
    pub const ENDPOINT: PacketFlags = PacketFlags {
        endpoint: true,
        eos: false,
    };
    pub const EOS: PacketFlags = PacketFlags {
        endpoint: false,
        eos: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub seq: u64,
    pub payload: Payload,
    pub flags: PacketFlags,
}

impl Packet {
    pub fn new(seq: u64, payload: Payload, flags: PacketFlags) -> Self {
        Packet {
            seq,
            payload,
            flags,
        }
    }

    pub fn data(seq: u64, payload: Payload) -> Self {
        Packet::new(seq, payload, PacketFlags::NONE)
    }

    pub fn eos(seq: u64) -> Self {
        Packet::new(seq, Payload::Empty, PacketFlags::EOS)
    }

    /// An `Empty` payload is only legal as a pure control packet.
    pub fn is_valid(&self) -> bool {
        !matches!(self.payload, Payload::Empty) || self.flags.endpoint || self.flags.eos
    }
}
