//! Chain components wrapping the streaming DSP operators.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::{AudioChunk, FeatureMatrix, FrameBlock, Payload, PayloadKind};
use crate::pipeline::{Boundary, Emit, StageComponent, StreamStage};

use super::extractor::FrameFeatureExtractor;
use super::framing::{FrameConfig, FrameCutter};
use super::ops::{cascade_flush, cascade_push, FeatureOp};

/// i16 PCM to [-1, 1) float.
pub fn pcm_to_f64(samples: &[i16]) -> Vec<f64> {
    samples.iter().map(|&s| s as f64 / 32768.0).collect()
}

/// Frame cutter: AudioChunk in, FrameBlock out.
pub struct FrameCutterStage {
    cutter: FrameCutter,
    sample_rate: u32,
}

impl FrameCutterStage {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        Ok(FrameCutterStage {
            cutter: FrameCutter::new(cfg)?,
            sample_rate: cfg.sample_rate,
        })
    }

    pub fn component(cfg: &FrameConfig) -> Result<StageComponent<Self>> {
        Ok(StageComponent::new(Self::new(cfg)?))
    }

    fn block(frames: Vec<Vec<f64>>) -> Result<Vec<Emit>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        Ok(vec![Emit::data(Payload::FrameBlock(FrameBlock {
            frames: Matrix::from_rows(&frames)?,
        }))])
    }
}

impl StreamStage for FrameCutterStage {
    fn name(&self) -> &str {
        "cutter"
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::AudioChunk
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::FrameBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        match payload {
            Payload::AudioChunk(AudioChunk {
                samples,
                sample_rate,
            }) => {
                if sample_rate != self.sample_rate {
                    return Err(Error::config(format!(
                        "audio arrives at {sample_rate} Hz but the chain is configured for {} Hz",
                        self.sample_rate
                    )));
                }
                Self::block(self.cutter.push(&pcm_to_f64(&samples)))
            }
            other => Err(Error::Chain(format!(
                "cutter received {:?} payload",
                other.kind()
            ))),
        }
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        match self.cutter.flush() {
            Some(tail) => Self::block(vec![tail]),
            None => Ok(Vec::new()),
        }
    }
}

/// Base feature extraction: FrameBlock in, FeatureBlock out, one row per frame.
pub struct FeatureExtractorStage {
    name: String,
    extractor: FrameFeatureExtractor,
    next_index: u64,
}

impl FeatureExtractorStage {
    pub fn new(name: impl Into<String>, extractor: FrameFeatureExtractor) -> Self {
        FeatureExtractorStage {
            name: name.into(),
            extractor,
            next_index: 0,
        }
    }

    pub fn component(
        name: impl Into<String>,
        extractor: FrameFeatureExtractor,
    ) -> StageComponent<Self> {
        StageComponent::new(Self::new(name, extractor))
    }
}

impl StreamStage for FeatureExtractorStage {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::FrameBlock
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::FeatureBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        let block = match payload {
            Payload::FrameBlock(b) => b,
            other => {
                return Err(Error::Chain(format!(
                    "feature extractor received {:?} payload",
                    other.kind()
                )))
            }
        };
        let mut data = Matrix::with_cols(self.extractor.out_dims());
        for frame in block.frames.iter_rows() {
            data.push_row(&self.extractor.process_frame(frame)?);
        }
        let first = self.next_index;
        self.next_index += data.rows() as u64;
        if data.is_empty() {
            return Ok(Vec::new());
        }
        Ok(vec![Emit::data(Payload::FeatureBlock(FeatureMatrix {
            data,
            first_frame_index: first,
        }))])
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        Ok(Vec::new())
    }
}

/// A streaming feature transform in the chain: FeatureBlock in/out.
pub struct FeatureOpStage {
    op: Box<dyn FeatureOp>,
    next_index: u64,
}

impl FeatureOpStage {
    pub fn new(op: Box<dyn FeatureOp>) -> Self {
        FeatureOpStage { op, next_index: 0 }
    }

    pub fn component(op: Box<dyn FeatureOp>) -> StageComponent<Self> {
        StageComponent::new(Self::new(op))
    }

    fn emit(&mut self, rows: Vec<Vec<f64>>) -> Result<Vec<Emit>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let data = Matrix::from_rows(&rows)?;
        let first = self.next_index;
        self.next_index += data.rows() as u64;
        Ok(vec![Emit::data(Payload::FeatureBlock(FeatureMatrix {
            data,
            first_frame_index: first,
        }))])
    }
}

impl StreamStage for FeatureOpStage {
    fn name(&self) -> &str {
        self.op.name()
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::FeatureBlock
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::FeatureBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        let block = match payload {
            Payload::FeatureBlock(b) => b,
            other => {
                return Err(Error::Chain(format!(
                    "feature op received {:?} payload",
                    other.kind()
                )))
            }
        };
        let mut rows = Vec::new();
        for row in block.data.iter_rows() {
            rows.extend(self.op.push(row)?);
        }
        self.emit(rows)
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        let rows = self.op.flush()?;
        self.emit(rows)
    }
}

/// One stream of a feature mixture: a base extractor plus a transform cascade.
pub struct MixtureStream {
    pub extractor: FrameFeatureExtractor,
    pub ops: Vec<Box<dyn FeatureOp>>,
}

impl MixtureStream {
    pub fn out_dims(&self) -> usize {
        let mut dims = self.extractor.out_dims();
        for op in &self.ops {
            dims = op.out_dims(dims);
        }
        dims
    }
}

/// Multi-stream feature mixture: every input frame feeds each stream, and
/// aligned output rows are concatenated in declared order. Streams may have
/// different look-ahead, so rows are queued until all streams produced them.
pub struct MixtureStage {
    streams: Vec<MixtureStream>,
    queues: Vec<std::collections::VecDeque<Vec<f64>>>,
    next_index: u64,
}

impl MixtureStage {
    pub fn new(streams: Vec<MixtureStream>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::config("[mixture] needs at least one stream"));
        }
        let queues = streams.iter().map(|_| std::collections::VecDeque::new()).collect();
        Ok(MixtureStage {
            streams,
            queues,
            next_index: 0,
        })
    }

    pub fn component(streams: Vec<MixtureStream>) -> Result<StageComponent<Self>> {
        Ok(StageComponent::new(Self::new(streams)?))
    }

    pub fn out_dims(&self) -> usize {
        self.streams.iter().map(|s| s.out_dims()).sum()
    }

    fn drain_aligned(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        while self.queues.iter().all(|q| !q.is_empty()) {
            let mut row = Vec::new();
            for q in &mut self.queues {
                row.extend(q.pop_front().unwrap());
            }
            rows.push(row);
        }
        Ok(rows)
    }

    fn emit(&mut self, rows: Vec<Vec<f64>>) -> Result<Vec<Emit>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let data = Matrix::from_rows(&rows)?;
        let first = self.next_index;
        self.next_index += data.rows() as u64;
        Ok(vec![Emit::data(Payload::FeatureBlock(FeatureMatrix {
            data,
            first_frame_index: first,
        }))])
    }
}

impl StreamStage for MixtureStage {
    fn name(&self) -> &str {
        "mixture"
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::FrameBlock
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::FeatureBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        let block = match payload {
            Payload::FrameBlock(b) => b,
            other => {
                return Err(Error::Chain(format!(
                    "mixture received {:?} payload",
                    other.kind()
                )))
            }
        };
        for frame in block.frames.iter_rows() {
            for (stream, queue) in self.streams.iter_mut().zip(&mut self.queues) {
                let base = stream.extractor.process_frame(frame)?;
                for out in cascade_push(&mut stream.ops, &base)? {
                    queue.push_back(out);
                }
            }
        }
        let rows = self.drain_aligned()?;
        self.emit(rows)
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        for (stream, queue) in self.streams.iter_mut().zip(&mut self.queues) {
            for out in cascade_flush(&mut stream.ops)? {
                queue.push_back(out);
            }
        }
        let rows = self.drain_aligned()?;
        for q in &self.queues {
            debug_assert!(q.is_empty(), "mixture streams disagree on row count");
        }
        self.emit(rows)
    }
}

/// Convenience composition of cutter, base extractor, and transform cascade
/// for in-process use (tests, model fitting, offline dumps). This is the same
/// code path the chain components run.
pub struct FeaturePipeline {
    pub cutter: FrameCutter,
    pub extractor: FrameFeatureExtractor,
    pub ops: Vec<Box<dyn FeatureOp>>,
}

impl FeaturePipeline {
    pub fn new(
        frame_cfg: &FrameConfig,
        extractor: FrameFeatureExtractor,
        ops: Vec<Box<dyn FeatureOp>>,
    ) -> Result<Self> {
        Ok(FeaturePipeline {
            cutter: FrameCutter::new(frame_cfg)?,
            extractor,
            ops,
        })
    }

    pub fn out_dims(&self) -> usize {
        let mut dims = self.extractor.out_dims();
        for op in &self.ops {
            dims = op.out_dims(dims);
        }
        dims
    }

    pub fn push_samples(&mut self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for frame in self.cutter.push(samples) {
            let base = self.extractor.process_frame(&frame)?;
            rows.extend(cascade_push(&mut self.ops, &base)?);
        }
        Ok(rows)
    }

    pub fn flush(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        if let Some(tail) = self.cutter.flush() {
            let base = self.extractor.process_frame(&tail)?;
            rows.extend(cascade_push(&mut self.ops, &base)?);
        }
        rows.extend(cascade_flush(&mut self.ops)?);
        Ok(rows)
    }
}

pub use super::ops::concat_streams as concat_feature_streams;
