//! Diagonal-covariance Gaussian mixture scorer with a closed form, enabling
//! end-to-end pipelines and tests without any deep learning runtime.
//!
//! Model text format: line 1 `n_pdfs dims`; then per pdf a line
//! `n_components` followed by one line per component holding
//! `weight mean[0..D) var[0..D)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::{FeatureMatrix, LoglikBlock};

use super::AcousticScorer;

#[derive(Debug, Clone)]
pub struct GmmComponentParams {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PreparedComponent {
    /// ln(weight) - (D ln 2pi + sum ln var)/2
    gconst: f64,
    mean: Vec<f64>,
    inv_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiagGmm {
    pdfs: Vec<Vec<GmmComponentParams>>,
    prepared: Vec<Vec<PreparedComponent>>,
    dims: usize,
}

impl DiagGmm {
    pub fn new(pdfs: Vec<Vec<GmmComponentParams>>, dims: usize) -> Result<Self> {
        if pdfs.is_empty() || dims == 0 {
            return Err(Error::format("GMM needs at least one pdf and one dim"));
        }
        for (p, comps) in pdfs.iter().enumerate() {
            if comps.is_empty() {
                return Err(Error::format(format!("pdf {p} has no components")));
            }
            let wsum: f64 = comps.iter().map(|c| c.weight).sum();
            if (wsum - 1.0).abs() > 1e-6 {
                return Err(Error::format(format!(
                    "pdf {p}: component weights sum to {wsum}, expected 1"
                )));
            }
            for (m, c) in comps.iter().enumerate() {
                if c.mean.len() != dims || c.var.len() != dims {
                    return Err(Error::DimMismatch(format!(
                        "pdf {p} component {m}: expected {dims} dims"
                    )));
                }
                if c.weight <= 0.0 {
                    return Err(Error::format(format!(
                        "pdf {p} component {m}: weight must be positive"
                    )));
                }
                if c.var.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                    return Err(Error::format(format!(
                        "pdf {p} component {m}: variances must be positive"
                    )));
                }
            }
        }
        let prepared = pdfs
            .iter()
            .map(|comps| {
                comps
                    .iter()
                    .map(|c| {
                        let log_det: f64 = c.var.iter().map(|v| v.ln()).sum();
                        PreparedComponent {
                            gconst: c.weight.ln()
                                - 0.5 * (dims as f64 * (2.0 * PI).ln() + log_det),
                            mean: c.mean.clone(),
                            inv_var: c.var.iter().map(|v| 1.0 / v).collect(),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(DiagGmm {
            pdfs,
            prepared,
            dims,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_pdfs(&self) -> usize {
        self.pdfs.len()
    }

    pub fn pdfs(&self) -> &[Vec<GmmComponentParams>] {
        &self.pdfs
    }

    /// log sum_m w_m N(x; mu_m, diag sigma^2_m), via log-sum-exp.
    pub fn log_likelihood(&self, pdf: usize, x: &[f64]) -> f64 {
        let comps = &self.prepared[pdf];
        let mut best = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(comps.len());
        for c in comps {
            let mut quad = 0.0;
            for ((&xv, &mv), &iv) in x.iter().zip(&c.mean).zip(&c.inv_var) {
                let d = xv - mv;
                quad += d * d * iv;
            }
            let t = c.gconst - 0.5 * quad;
            terms.push(t);
            if t > best {
                best = t;
            }
        }
        if terms.len() == 1 {
            return terms[0];
        }
        let sum: f64 = terms.iter().map(|t| (t - best).exp()).sum();
        best + sum.ln()
    }

    pub fn score_frame(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims {
            return Err(Error::DimMismatch(format!(
                "GMM expects {} dims, frame has {}",
                self.dims,
                x.len()
            )));
        }
        Ok((0..self.pdfs.len())
            .map(|p| self.log_likelihood(p, x))
            .collect())
    }

    pub fn parse_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let mut next_line = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(Ok(l)) => {
                        let t = l.trim().to_string();
                        if !t.is_empty() && !t.starts_with('#') {
                            return Ok(t);
                        }
                    }
                    Some(Err(e)) => return Err(Error::Io(e.to_string())),
                    None => return Err(Error::format("GMM file ends early")),
                }
            }
        };
        let header = next_line()?;
        let mut it = header.split_whitespace();
        let n_pdfs: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format("GMM header must start with n_pdfs"))?;
        let dims: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format("GMM header must give dims"))?;
        let mut pdfs = Vec::with_capacity(n_pdfs);
        for p in 0..n_pdfs {
            let n_comps: usize = next_line()?
                .parse()
                .map_err(|_| Error::format(format!("pdf {p}: bad component count")))?;
            let mut comps = Vec::with_capacity(n_comps);
            for m in 0..n_comps {
                let line = next_line()?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format(format!("pdf {p} component {m}: bad float")))?;
                if vals.len() != 1 + 2 * dims {
                    return Err(Error::format(format!(
                        "pdf {p} component {m}: {} values, expected {}",
                        vals.len(),
                        1 + 2 * dims
                    )));
                }
                comps.push(GmmComponentParams {
                    weight: vals[0],
                    mean: vals[1..1 + dims].to_vec(),
                    var: vals[1 + dims..].to_vec(),
                });
            }
            pdfs.push(comps);
        }
        DiagGmm::new(pdfs, dims)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        writeln!(w, "{} {}", self.n_pdfs(), self.dims).map_err(io)?;
        for comps in &self.pdfs {
            writeln!(w, "{}", comps.len()).map_err(io)?;
            for c in comps {
                let mut fields = vec![format!("{:?}", c.weight)];
                fields.extend(c.mean.iter().map(|v| format!("{v:?}")));
                fields.extend(c.var.iter().map(|v| format!("{v:?}")));
                writeln!(w, "{}", fields.join(" ")).map_err(io)?;
            }
        }
        Ok(())
    }
}

pub struct GmmScorer {
    model: DiagGmm,
}

impl GmmScorer {
    pub fn new(model: DiagGmm) -> Self {
        GmmScorer { model }
    }

    pub fn model(&self) -> &DiagGmm {
        &self.model
    }
}

impl AcousticScorer for GmmScorer {
    fn n_pdfs(&self) -> usize {
        self.model.n_pdfs()
    }

    fn input_dims(&self) -> Option<usize> {
        Some(self.model.dims())
    }

    fn score_block(&mut self, feats: &FeatureMatrix) -> Result<LoglikBlock> {
        let mut data = Matrix::with_cols(self.model.n_pdfs());
        for row in feats.data.iter_rows() {
            data.push_row(&self.model.score_frame(row)?);
        }
        Ok(LoglikBlock {
            data,
            first_frame_index: feats.first_frame_index,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn small_model() -> DiagGmm {
        DiagGmm::new(
            vec![
                vec![GmmComponentParams {
                    weight: 1.0,
                    mean: vec![0.0, 0.0],
                    var: vec![1.0, 1.0],
                }],
                vec![
                    GmmComponentParams {
                        weight: 0.25,
                        mean: vec![1.0, -1.0],
                        var: vec![0.5, 2.0],
                    },
                    GmmComponentParams {
                        weight: 0.75,
                        mean: vec![-2.0, 3.0],
                        var: vec![1.5, 0.25],
                    },
                ],
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_at_its_mean() {
        // Single component, unit variance, x = mean, D = 2: -ln(2 pi).
        let m = small_model();
        let ll = m.log_likelihood(0, &[0.0, 0.0]);
        assert!((ll + (2.0 * PI).ln()).abs() < 1e-12, "{ll}");
        assert!((ll + 1.83788).abs() < 1e-5);
    }

    #[test]
    fn equal_components_collapse() {
        let single = DiagGmm::new(
            vec![vec![GmmComponentParams {
                weight: 1.0,
                mean: vec![0.5, -0.5],
                var: vec![2.0, 0.7],
            }]],
            2,
        )
        .unwrap();
        let split = DiagGmm::new(
            vec![vec![
                GmmComponentParams {
                    weight: 0.5,
                    mean: vec![0.5, -0.5],
                    var: vec![2.0, 0.7],
                },
                GmmComponentParams {
                    weight: 0.5,
                    mean: vec![0.5, -0.5],
                    var: vec![2.0, 0.7],
                },
            ]],
            2,
        )
        .unwrap();
        for x in [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.25]] {
            let a = single.log_likelihood(0, &x);
            let b = split.log_likelihood(0, &x);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_mixture_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let dims = 5;
        let pdfs: Vec<Vec<GmmComponentParams>> = (0..4)
            .map(|_| {
                let n = rng.gen_range(1..4);
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter()
                    .map(|w| GmmComponentParams {
                        weight: w / total,
                        mean: (0..dims).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                        var: (0..dims).map(|_| rng.gen_range(0.3..2.0)).collect(),
                    })
                    .collect()
            })
            .collect();
        let model = DiagGmm::new(pdfs.clone(), dims).unwrap();

        for _ in 0..50 {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for (p, comps) in pdfs.iter().enumerate() {
                // Direct summation without log-sum-exp.
                let mut sum = 0.0;
                for c in comps {
                    let mut e = 0.0;
                    let mut det = 1.0;
                    for d in 0..dims {
                        let diff = x[d] - c.mean[d];
                        e += diff * diff / c.var[d];
                        det *= c.var[d];
                    }
                    sum += c.weight * (-0.5 * e).exp()
                        / ((2.0 * PI).powi(dims as i32) * det).sqrt();
                }
                let direct = sum.ln();
                let lse = model.log_likelihood(p, &x);
                assert!((direct - lse).abs() <= 1e-8, "pdf {p}: {direct} vs {lse}");
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        let m = small_model();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = DiagGmm::parse_text(&buf[..]).unwrap();
        assert_eq!(back.n_pdfs(), 2);
        assert_eq!(back.dims(), 2);
        for x in [[0.1, 0.2], [-1.0, 4.0]] {
            for p in 0..2 {
                assert!((m.log_likelihood(p, &x) - back.log_likelihood(p, &x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_weights_and_vars() {
        let bad_w = DiagGmm::new(
            vec![vec![GmmComponentParams {
                weight: 0.9,
                mean: vec![0.0],
                var: vec![1.0],
            }]],
            1,
        );
        assert!(bad_w.is_err());
        let bad_v = DiagGmm::new(
            vec![vec![GmmComponentParams {
                weight: 1.0,
                mean: vec![0.0],
                var: vec![0.0],
            }]],
            1,
        );
        assert!(bad_v.is_err());
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let m = small_model();
        assert!(m.score_frame(&[1.0, 2.0, 3.0]).is_err());
    }
}
