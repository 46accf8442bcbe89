//! Stream framing: cut a continuous sample stream into overlapping frames.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Hann,
    Rectangular,
}

#[derive(Debug, Clone)]
pub struct FrameConfig {
    pub sample_rate: u32,
    /// Frame length in samples (default 400 = 25 ms at 16 kHz).
    pub frame_length: usize,
    /// Hop between frame starts in samples (default 160 = 10 ms).
    pub frame_shift: usize,
    /// Pre-emphasis coefficient in [0, 1).
    pub preemphasis: f64,
    pub window: WindowKind,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            sample_rate: 16000,
            frame_length: 400,
            frame_shift: 160,
            preemphasis: 0.97,
            window: WindowKind::Hamming,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::config("[frame] sample_rate must be positive"));
        }
        if self.frame_shift == 0 || self.frame_shift > self.frame_length {
            return Err(Error::config(format!(
                "[frame] requires 0 < frame_shift <= frame_length, got shift {} length {}",
                self.frame_shift, self.frame_length
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(Error::config(format!(
                "[frame] preemphasis must be in [0,1), got {}",
                self.preemphasis
            )));
        }
        Ok(())
    }

    /// Frames produced from `n` buffered samples: floor((n-L)/S)+1 for n >= L.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_length {
            0
        } else {
            (n - self.frame_length) / self.frame_shift + 1
        }
    }
}

/// Streaming frame cutter. Emits a frame whenever `frame_length` samples are
/// buffered, hopping by `frame_shift`. A stream shorter than one frame is
/// zero-padded into a single frame at flush; otherwise the sub-hop tail is
/// dropped.
pub struct FrameCutter {
    length: usize,
    shift: usize,
    buf: VecDeque<f64>,
    emitted: u64,
}

impl FrameCutter {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FrameCutter {
            length: cfg.frame_length,
            shift: cfg.frame_shift,
            buf: VecDeque::new(),
            emitted: 0,
        })
    }

    pub fn frames_emitted(&self) -> u64 {
        self.emitted
    }

    pub fn push(&mut self, samples: &[f64]) -> Vec<Vec<f64>> {
        self.buf.extend(samples.iter().copied());
        let mut out = Vec::new();
        while self.buf.len() >= self.length {
            let frame: Vec<f64> = self.buf.iter().take(self.length).copied().collect();
            self.buf.drain(..self.shift);
            out.push(frame);
        }
        self.emitted += out.len() as u64;
        out
    }

    /// End of stream: emit the zero-padded remainder only when no full frame
    /// was ever produced. Resets the cutter either way.
    pub fn flush(&mut self) -> Option<Vec<f64>> {
        let tail = if self.emitted == 0 && !self.buf.is_empty() {
            let mut frame: Vec<f64> = self.buf.iter().copied().collect();
            frame.resize(self.length, 0.0);
            Some(frame)
        } else {
            None
        };
        self.buf.clear();
        self.emitted = 0;
        tail
    }
}
