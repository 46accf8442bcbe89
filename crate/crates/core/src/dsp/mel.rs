//! Mel filter bank: triangular filters with centers equally spaced on the
//! HTK mel scale, applied to the power half-spectrum.

use crate::error::{Error, Result};

/// Floor applied before taking logs of filter outputs.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MelConfig {
    /// Power-of-two FFT size.
    pub n_fft: usize,
    /// Number of triangular filters.
    pub n_mels: usize,
    /// Lower band edge in Hz.
    pub fmin: f64,
    /// Upper band edge in Hz.
    pub fmax: f64,
    /// Cepstra kept by the DCT.
    pub n_ceps: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_fft: 512,
            n_mels: 24,
            fmin: 20.0,
            fmax: 8000.0,
            n_ceps: 13,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed filter bank. Each filter stores its first nonzero bin and the
/// weights from there on.
pub struct MelBank {
    filters: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl MelBank {
    pub fn new(cfg: &MelConfig, sample_rate: u32) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax && cfg.fmax <= nyquist) {
            return Err(Error::config(format!(
                "[mel] requires 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {}",
                cfg.fmin, cfg.fmax
            )));
        }
        if cfg.n_mels == 0 {
            return Err(Error::config("[mel] n_mels must be positive"));
        }
        let n_bins = cfg.n_fft / 2 + 1;
        let mel_lo = hz_to_mel(cfg.fmin);
        let mel_hi = hz_to_mel(cfg.fmax);
        // n_mels + 2 equally spaced points: edges and centers.
        let point = |i: usize| mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64;
        let bin_mel: Vec<f64> = (0..n_bins)
            .map(|k| hz_to_mel(k as f64 * sample_rate as f64 / cfg.n_fft as f64))
            .collect();
        let mut filters = Vec::with_capacity(cfg.n_mels);
        for i in 1..=cfg.n_mels {
            let (left, center, right) = (point(i - 1), point(i), point(i + 1));
            let mut start = None;
            let mut weights = Vec::new();
            for (k, &m) in bin_mel.iter().enumerate() {
                let w = if m >= left && m <= center {
                    (m - left) / (center - left)
                } else if m > center && m <= right {
                    (right - m) / (right - center)
                } else {
                    0.0
                };
                if w > 0.0 {
                    if start.is_none() {
                        start = Some(k);
                    }
                    weights.push(w);
                } else if start.is_some() {
                    break;
                }
            }
            filters.push((start.unwrap_or(0), weights));
        }
        Ok(MelBank { filters, n_bins })
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// First nonzero bin and weights of filter `i`, for inspection and tests.
    pub fn filter(&self, i: usize) -> (usize, &[f64]) {
        let (start, w) = &self.filters[i];
        (*start, w)
    }

    /// Triangular-filter dot products against a power half-spectrum.
    pub fn apply(&self, power: &[f64]) -> Result<Vec<f64>> {
        if power.len() != self.n_bins {
            return Err(Error::DimMismatch(format!(
                "spectrum has {} bins, filter bank expects {}",
                power.len(),
                self.n_bins
            )));
        }
        Ok(self
            .filters
            .iter()
            .map(|(start, w)| {
                w.iter()
                    .zip(&power[*start..])
                    .map(|(wi, pi)| wi * pi)
                    .sum::<f64>()
            })
            .collect())
    }

    /// `ln(max(x, LOG_FLOOR))` of each filter output.
    pub fn apply_log(&self, power: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply(power)?;
        for v in &mut out {
            *v = v.max(LOG_FLOOR).ln();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_fixed_point() {
        let m = hz_to_mel(1000.0);
        assert!((m - 1000.0).abs() < 0.05, "mel(1000 Hz) = {m}");
        assert!((mel_to_hz(hz_to_mel(440.0)) - 440.0).abs() < 1e-9);
    }

    #[test]
    fn flat_spectrum_yields_filter_areas() {
        let cfg = MelConfig::default();
        let bank = MelBank::new(&cfg, 16000).unwrap();
        let ones = vec![1.0; bank.n_bins()];
        let out = bank.apply(&ones).unwrap();
        // Direct filter-sum oracle.
        for (i, &v) in out.iter().enumerate() {
            let (_, w) = bank.filter(i);
            let mut area = 0.0;
            for &x in w {
                area += x;
            }
            assert!((v - area).abs() <= 1e-12 * area.max(1.0));
            assert!(area > 0.0, "filter {i} is empty");
        }
    }

    #[test]
    fn zero_spectrum_hits_log_floor() {
        let bank = MelBank::new(&MelConfig::default(), 16000).unwrap();
        let out = bank.apply_log(&vec![0.0; bank.n_bins()]).unwrap();
        for v in out {
            assert_eq!(v, LOG_FLOOR.ln());
        }
    }

    #[test]
    fn rejects_bad_band_edges() {
        let cfg = MelConfig {
            fmin: 9000.0,
            fmax: 8000.0,
            ..MelConfig::default()
        };
        assert!(MelBank::new(&cfg, 16000).is_err());
        let cfg = MelConfig {
            fmax: 9000.0,
            ..MelConfig::default()
        };
        assert!(MelBank::new(&cfg, 16000).is_err(), "fmax above nyquist");
    }
}
