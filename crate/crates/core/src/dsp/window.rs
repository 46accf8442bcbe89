//! Frame conditioning: DC removal, pre-emphasis, analysis window.

use std::f64::consts::PI;

use super::framing::{FrameConfig, WindowKind};

pub fn make_window(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; len],
        WindowKind::Hamming => (0..len)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
            .collect(),
        WindowKind::Hann => (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
            .collect(),
    }
}

pub struct FrameConditioner {
    preemphasis: f64,
    window: Vec<f64>,
}

impl FrameConditioner {
    pub fn new(cfg: &FrameConfig) -> Self {
        FrameConditioner {
            preemphasis: cfg.preemphasis,
            window: make_window(cfg.window, cfg.frame_length),
        }
    }

    pub fn frame_length(&self) -> usize {
        self.window.len()
    }

    /// Remove the DC mean, apply pre-emphasis y[n] = x[n] - a*x[n-1]
    /// (y[0] = x[0] - a*x[0]), and multiply by the window.
    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.window.len(), "frame length mismatch");
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let a = self.preemphasis;
        let mut out = Vec::with_capacity(frame.len());
        let mut prev = frame[0] - mean;
        out.push((prev - a * prev) * self.window[0]);
        for (n, &x) in frame.iter().enumerate().skip(1) {
            let d = x - mean;
            out.push((d - a * prev) * self.window[n]);
            prev = d;
        }
        out
    }
}
