//! Orthonormal DCT-II for cepstral coefficients.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub struct Dct {
    table: Vec<f64>,
    n_in: usize,
    n_out: usize,
}

impl Dct {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_out == 0 || n_out > n_in {
            return Err(Error::config(format!(
                "DCT requires 0 < n_ceps <= n_mels, got n_ceps {n_out} n_mels {n_in}"
            )));
        }
        let mut table = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let scale = if k == 0 {
                (1.0 / n_in as f64).sqrt()
            } else {
                (2.0 / n_in as f64).sqrt()
            };
            for n in 0..n_in {
                table.push(scale * (PI * k as f64 * (2.0 * n as f64 + 1.0) / (2.0 * n_in as f64)).cos());
            }
        }
        Ok(Dct { table, n_in, n_out })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_in, "DCT input length mismatch");
        (0..self.n_out)
            .map(|k| {
                self.table[k * self.n_in..(k + 1) * self.n_in]
                    .iter()
                    .zip(x)
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_loads_c0_only() {
        let dct = Dct::new(24, 13).unwrap();
        let c = 2.5;
        let out = dct.apply(&vec![c; 24]);
        assert!((out[0] - c * 24f64.sqrt()).abs() < 1e-12);
        for &v in &out[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_cosine_sum() {
        let n = 24;
        let dct = Dct::new(n, n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i * 31 % 17) as f64 - 8.0) / 8.0).collect();
        let out = dct.apply(&x);
        for k in 0..n {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            let direct: f64 = (0..n)
                .map(|i| x[i] * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .sum::<f64>()
                * scale;
            assert!((out[k] - direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn full_dct_is_orthonormal() {
        let n = 24;
        let dct = Dct::new(n, n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let y = dct.apply(&x);
        // Inverse via the transpose.
        let mut back = vec![0.0; n];
        for k in 0..n {
            for i in 0..n {
                back[i] += dct.table[k * n + i] * y[k];
            }
        }
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn rejects_more_ceps_than_mels() {
        assert!(Dct::new(24, 25).is_err());
    }
}
