//! Voice activity detection: frame-level speech/silence classification and
//! three-step silence filtering with endpoint marking.
//!
//! The filter applies three rules to each run of consecutive silence frames:
//! runs no longer than `keep_silence` pass through untouched; frames of a run
//! beyond that are dropped; and when a run reaches `endpoint_silence` frames,
//! exactly one endpoint is marked to truncate the stream. Speech frames are
//! never dropped.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::{FrameBlock, Payload, PayloadKind};
use crate::pipeline::{Boundary, Emit, StageComponent, StreamStage};

#[derive(Debug, Clone)]
pub struct VadConfig {
    /// Log mean-square threshold for the default energy detector, for PCM
    /// scaled to [-1, 1].
    pub energy_threshold: f64,
    /// Silence runs up to this many frames are kept (T_keep).
    pub keep_silence: usize,
    /// A silence run reaching this many frames triggers an endpoint (T_ep).
    pub endpoint_silence: usize,
    /// Minimum silence frames retained after speech. Keeping the first
    /// `keep_silence` frames of every run already guarantees this whenever
    /// `hangover <= keep_silence`, which validation enforces.
    pub hangover: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            energy_threshold: -9.0,
            keep_silence: 30,
            endpoint_silence: 50,
            hangover: 10,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint_silence <= self.keep_silence {
            return Err(Error::config(format!(
                "[vad] endpoint_silence ({}) must exceed keep_silence ({})",
                self.endpoint_silence, self.keep_silence
            )));
        }
        if self.hangover > self.keep_silence {
            return Err(Error::config(format!(
                "[vad] hangover ({}) must not exceed keep_silence ({})",
                self.hangover, self.keep_silence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VadLabel {
    Speech,
    Silence,
}

/// Pluggable per-frame speech/silence predictor.
pub trait FramePredictor: Send {
    fn classify(&mut self, frame: &[f64]) -> VadLabel;
}

pub fn log_energy(frame: &[f64]) -> f64 {
    let ms = frame.iter().map(|x| x * x).sum::<f64>() / frame.len().max(1) as f64;
    (1e-12 + ms).ln()
}

/// Default detector: log mean-square energy against a threshold.
pub struct EnergyPredictor {
    pub threshold: f64,
}

impl FramePredictor for EnergyPredictor {
    fn classify(&mut self, frame: &[f64]) -> VadLabel {
        if log_energy(frame) > self.threshold {
            VadLabel::Speech
        } else {
            VadLabel::Silence
        }
    }
}

/// What the filter decided for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterStep {
    pub keep: bool,
    /// An endpoint fires after this frame's position in the stream.
    pub endpoint: bool,
}

/// Streaming three-rule silence filter.
pub struct SilenceFilter {
    keep_silence: usize,
    endpoint_silence: usize,
    run: usize,
    endpointed: bool,
}

impl SilenceFilter {
    pub fn new(cfg: &VadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SilenceFilter {
            keep_silence: cfg.keep_silence,
            endpoint_silence: cfg.endpoint_silence,
            run: 0,
            endpointed: false,
        })
    }

    pub fn step(&mut self, label: VadLabel) -> FilterStep {
        match label {
            VadLabel::Speech => {
                self.run = 0;
                self.endpointed = false;
                FilterStep {
                    keep: true,
                    endpoint: false,
                }
            }
            VadLabel::Silence => {
                self.run += 1;
                let keep = self.run <= self.keep_silence;
                let endpoint = self.run >= self.endpoint_silence && !self.endpointed;
                if endpoint {
                    self.endpointed = true;
                }
                FilterStep { keep, endpoint }
            }
        }
    }

    pub fn reset(&mut self) {
        self.run = 0;
        self.endpointed = false;
    }
}

/// Chain component: FrameBlock in, filtered FrameBlock out, endpoints marked
/// in-band. When an endpoint fires inside a block, the frames kept so far
/// close the current packet with the endpoint flag and later frames start a
/// new packet, so the boundary stays exact.
pub struct VadStage {
    predictor: Box<dyn FramePredictor>,
    filter: SilenceFilter,
}

impl VadStage {
    pub fn new(cfg: &VadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(VadStage {
            predictor: Box::new(EnergyPredictor {
                threshold: cfg.energy_threshold,
            }),
            filter: SilenceFilter::new(cfg)?,
        })
    }

    pub fn with_predictor(cfg: &VadConfig, predictor: Box<dyn FramePredictor>) -> Result<Self> {
        Ok(VadStage {
            predictor,
            filter: SilenceFilter::new(cfg)?,
        })
    }

    pub fn component(cfg: &VadConfig) -> Result<StageComponent<Self>> {
        Ok(StageComponent::new(Self::new(cfg)?))
    }
}

impl StreamStage for VadStage {
    fn name(&self) -> &str {
        "vad"
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::FrameBlock
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::FrameBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        let block = match payload {
            Payload::FrameBlock(b) => b,
            other => {
                return Err(Error::Chain(format!(
                    "vad received {:?} payload",
                    other.kind()
                )))
            }
        };
        let mut out = Vec::new();
        let mut kept: Vec<Vec<f64>> = Vec::new();
        for frame in block.frames.iter_rows() {
            let label = self.predictor.classify(frame);
            let step = self.filter.step(label);
            if step.keep {
                kept.push(frame.to_vec());
            }
            if step.endpoint {
                let payload = if kept.is_empty() {
                    Payload::Empty
                } else {
                    Payload::FrameBlock(FrameBlock {
                        frames: Matrix::from_rows(&std::mem::take(&mut kept))?,
                    })
                };
                out.push(Emit::endpoint(payload));
            }
        }
        if !kept.is_empty() {
            out.push(Emit::data(Payload::FrameBlock(FrameBlock {
                frames: Matrix::from_rows(&kept)?,
            })));
        }
        Ok(out)
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        // Nothing buffered: frames were forwarded or dropped on the spot.
        // eos subsumes the endpoint, the decoder finalizes on either.
        self.filter.reset();
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Offline reference: sees the whole label array at once and applies the
    /// three rules directly.
    pub fn offline_filter(labels: &[VadLabel], cfg: &VadConfig) -> (Vec<usize>, Vec<usize>) {
        let mut kept = Vec::new();
        let mut endpoints = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            if labels[i] == VadLabel::Speech {
                kept.push(i);
                i += 1;
                continue;
            }
            // Measure the whole silence run.
            let start = i;
            while i < labels.len() && labels[i] == VadLabel::Silence {
                i += 1;
            }
            let len = i - start;
            for j in start..start + len.min(cfg.keep_silence) {
                kept.push(j);
            }
            if len >= cfg.endpoint_silence {
                endpoints.push(start + cfg.endpoint_silence - 1);
            }
        }
        (kept, endpoints)
    }

    fn run_streaming(labels: &[VadLabel], cfg: &VadConfig) -> (Vec<usize>, Vec<usize>) {
        let mut filter = SilenceFilter::new(cfg).unwrap();
        let mut kept = Vec::new();
        let mut endpoints = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let step = filter.step(l);
            if step.keep {
                kept.push(i);
            }
            if step.endpoint {
                endpoints.push(i);
            }
        }
        (kept, endpoints)
    }

    fn cfg(keep: usize, ep: usize) -> VadConfig {
        VadConfig {
            keep_silence: keep,
            endpoint_silence: ep,
            hangover: keep.min(10),
            ..VadConfig::default()
        }
    }

    #[test]
    fn classify_energy_thresholds() {
        let mut vad = EnergyPredictor { threshold: -10.0 };
        assert_eq!(vad.classify(&vec![0.0; 400]), VadLabel::Silence);
        // Sine of amplitude 0.5: log mean square = ln(0.125) ~ -2.08.
        let sine: Vec<f64> = (0..400)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 100.0 * i as f64 / 16000.0).sin())
            .collect();
        assert!((log_energy(&sine) - 0.125f64.ln()).abs() < 0.01);
        assert_eq!(vad.classify(&sine), VadLabel::Speech);
    }

    #[test]
    fn pluggable_predictor_overrides_energy() {
        struct AlwaysSpeech;
        impl FramePredictor for AlwaysSpeech {
            fn classify(&mut self, _f: &[f64]) -> VadLabel {
                VadLabel::Speech
            }
        }
        let mut stage =
            VadStage::with_predictor(&VadConfig::default(), Box::new(AlwaysSpeech)).unwrap();
        let silence = FrameBlock {
            frames: Matrix::zeros(80, 4),
        };
        let out = stage.process(Payload::FrameBlock(silence)).unwrap();
        let total: usize = out
            .iter()
            .map(|e| match &e.payload {
                Payload::FrameBlock(b) => b.frames.rows(),
                _ => 0,
            })
            .sum();
        assert_eq!(total, 80, "constant-speech predictor keeps every frame");
    }

    #[test]
    fn short_silence_passes_untouched() {
        let mut labels = vec![VadLabel::Speech; 20];
        labels.extend(vec![VadLabel::Silence; 10]);
        labels.extend(vec![VadLabel::Speech; 20]);
        let (kept, endpoints) = run_streaming(&labels, &cfg(30, 40));
        assert_eq!(kept.len(), 50);
        assert!(endpoints.is_empty());
    }

    #[test]
    fn long_silence_dropped_and_endpointed() {
        // 20 speech + 50 silence, T_keep=30, T_ep=40: silence frames 21..50
        // forwarded, 31..50 of the run dropped, one endpoint at run length 40.
        let mut labels = vec![VadLabel::Speech; 20];
        labels.extend(vec![VadLabel::Silence; 50]);
        let (kept, endpoints) = run_streaming(&labels, &cfg(30, 40));
        let expect_kept: Vec<usize> = (0..50).collect();
        assert_eq!(kept, expect_kept);
        assert_eq!(endpoints, vec![20 + 40 - 1]);

        let (okept, oep) = offline_filter(&labels, &cfg(30, 40));
        assert_eq!(kept, okept);
        assert_eq!(endpoints, oep);
    }

    #[test]
    fn one_endpoint_per_run() {
        let mut labels = vec![VadLabel::Speech; 5];
        labels.extend(vec![VadLabel::Silence; 200]);
        labels.extend(vec![VadLabel::Speech; 5]);
        labels.extend(vec![VadLabel::Silence; 60]);
        let (_, endpoints) = run_streaming(&labels, &cfg(30, 50));
        assert_eq!(endpoints.len(), 2, "one endpoint per qualifying run");
    }

    #[test]
    fn streaming_matches_offline_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..400);
            let labels: Vec<VadLabel> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        VadLabel::Speech
                    } else {
                        VadLabel::Silence
                    }
                })
                .collect();
            let keep = rng.gen_range(0..20);
            let ep = keep + rng.gen_range(1..20);
            let c = cfg(keep, ep);
            assert_eq!(run_streaming(&labels, &c), offline_filter(&labels, &c));
        }
    }

    #[test]
    fn no_speech_frame_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let labels: Vec<VadLabel> = (0..1000)
            .map(|_| {
                if rng.gen_bool(0.7) {
                    VadLabel::Speech
                } else {
                    VadLabel::Silence
                }
            })
            .collect();
        let (kept, _) = run_streaming(&labels, &cfg(3, 5));
        for (i, &l) in labels.iter().enumerate() {
            if l == VadLabel::Speech {
                assert!(kept.contains(&i), "speech frame {i} was dropped");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(30, 30).validate().is_err());
        let bad = VadConfig {
            hangover: 31,
            keep_silence: 30,
            ..VadConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(VadConfig::default().validate().is_ok());
    }

    #[test]
    fn endpoint_splits_block_exactly() {
        // One block holding: 3 speech, 60 silence, 3 speech. T_keep=2, T_ep=4.
        let c = cfg(2, 4);
        let mut stage = VadStage::new(&c).unwrap();
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.push(vec![0.5; 8]);
        }
        for _ in 0..60 {
            rows.push(vec![0.0; 8]);
        }
        for _ in 0..3 {
            rows.push(vec![0.5; 8]);
        }
        let out = stage
            .process(Payload::FrameBlock(FrameBlock {
                frames: Matrix::from_rows(&rows).unwrap(),
            }))
            .unwrap();
        assert_eq!(out.len(), 2);
        // First packet: 3 speech + 2 kept silence frames, endpoint flagged.
        assert!(out[0].endpoint);
        match &out[0].payload {
            Payload::FrameBlock(b) => assert_eq!(b.frames.rows(), 5),
            other => panic!("unexpected {other:?}"),
        }
        // Second packet: the trailing speech, no flag.
        assert!(!out[1].endpoint);
        match &out[1].payload {
            Payload::FrameBlock(b) => assert_eq!(b.frames.rows(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
