//! Magnitude/power spectrum over a power-of-two FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub struct SpectrumAnalyzer {
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(n_fft: usize) -> Result<Self> {
        if !n_fft.is_power_of_two() || n_fft < 2 {
            return Err(Error::config(format!(
                "n_fft must be a power of two >= 2, got {n_fft}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(SpectrumAnalyzer {
            n_fft,
            fft,
            buf: vec![Complex::default(); n_fft],
            scratch,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    /// Half-spectrum bin count: n_fft/2 + 1.
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// |DFT_k| for k = 0..n_fft/2. Frames shorter than n_fft are zero-padded.
    pub fn magnitude_spectrum(&mut self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() > self.n_fft {
            return Err(Error::DimMismatch(format!(
                "frame of {} samples exceeds n_fft {}",
                frame.len(),
                self.n_fft
            )));
        }
        for (slot, &x) in self.buf.iter_mut().zip(frame) {
            *slot = Complex::new(x, 0.0);
        }
        for slot in self.buf.iter_mut().skip(frame.len()) {
            *slot = Complex::default();
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        Ok(self.buf[..self.n_bins()].iter().map(|c| c.norm()).collect())
    }

    /// |DFT_k|^2 for k = 0..n_fft/2.
    pub fn power_spectrum(&mut self, frame: &[f64]) -> Result<Vec<f64>> {
        let mut mag = self.magnitude_spectrum(frame)?;
        for v in &mut mag {
            *v *= *v;
        }
        Ok(mag)
    }
}
