//! Real-time streaming speech recognition pipeline framework.
//!
//! Concurrent components exchange typed packets through bounded pipes; a
//! chain links and supervises them. The crate provides the full online ASR
//! toolbox: audio framing, voice activity detection with endpointing, online
//! MFCC/filterbank features, a verified packet transport, pluggable acoustic
//! scoring, and frame-synchronous WFST decoding with N-best output.

pub mod decoder;
pub mod dsp;
pub mod error;
pub mod matrix;
pub mod packet;
pub mod pipeline;
pub mod scoring;
pub mod transport;
pub mod vad;

pub use error::{Error, PipeError, Result, TransportError};
pub use matrix::Matrix;
pub use packet::{
    AudioChunk, FeatureMatrix, FrameBlock, Hypothesis, LoglikBlock, Packet, PacketFlags, Payload,
    PayloadKind,
};
pub use pipeline::{Chain, Component, Pipe, PipeState, RunningChain};
