//! Self-contained toy recognition task: a word-loop graph, a diagonal GMM
//! fitted to synthesized tone audio, and the matching chain configuration.
//! Everything is deterministic in the seed, so end-to-end tests need no
//! external corpus or trained model.
//!
//! Each word is a left-to-right sequence of pdfs; each emitting pdf maps to
//! a pure tone at its own frequency, and pdf 0 models silence. The GMM is
//! fitted on the exact features the chain computes for the synthesized
//! audio (including VAD filtering and CMVN warm-up), which makes the
//! reference transcript recoverable by construction.

use std::fmt::Write as _;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ekrt_core::decoder::{Transition, Wfst, WordTable};
use ekrt_core::dsp::{
    BaseFeatureKind, FrameConfig, FrameCutter, FrameFeatureExtractor, MelConfig, SlidingCmvn,
};
use ekrt_core::dsp::{FeatureOp, pcm_to_f64};
use ekrt_core::error::{Error, Result};
use ekrt_core::scoring::{DiagGmm, GmmComponentParams};
use ekrt_core::vad::{EnergyPredictor, FramePredictor, SilenceFilter, VadConfig};

use crate::wav::write_wav_mono16;

const SAMPLE_RATE: u32 = 16000;
const FRAMES_PER_PDF: usize = 6;
const INTER_WORD_SILENCE_FRAMES: usize = 12;
const LEAD_SILENCE_FRAMES: usize = 10;
const TONE_AMPLITUDE: f64 = 0.35;
const VAR_FLOOR: f64 = 1e-3;

const WORD_NAMES: [&str; 26] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
    "juliett", "kilo", "lima", "mike", "november", "oscar", "papa", "quebec", "romeo",
    "sierra", "tango", "uniform", "victor", "whiskey", "xray", "yankee", "zulu",
];

pub struct ToySpec {
    pub seed: u64,
    pub n_pdfs: usize,
    pub n_words: usize,
    /// Silence inserted mid-utterance; long enough a gap yields an endpoint
    /// and two decoding segments.
    pub gap_ms: u64,
}

pub struct ToyModel {
    pub graph: Wfst,
    pub words: WordTable,
    pub gmm: DiagGmm,
    pub samples: Vec<i16>,
    pub sample_rate: u32,
    /// Expected transcript, one word list per finalized segment.
    pub transcript: Vec<Vec<String>>,
    pub chain_config: String,
}

fn word_name(i: usize) -> String {
    WORD_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("word{}", i + 1))
}

/// Frame-synchronous synthesis plan: each entry is one frame's pdf.
fn synthesis_plan(
    word_pdfs: &[Vec<usize>],
    utterance: &[usize],
    gap_frames: usize,
) -> (Vec<usize>, Option<usize>) {
    let mut plan = Vec::new();
    plan.extend(std::iter::repeat(0).take(LEAD_SILENCE_FRAMES));
    let gap_after = if gap_frames > 0 {
        Some(utterance.len() / 2)
    } else {
        None
    };
    for (i, &w) in utterance.iter().enumerate() {
        for &pdf in &word_pdfs[w] {
            plan.extend(std::iter::repeat(pdf).take(FRAMES_PER_PDF));
        }
        let silence = if Some(i + 1) == gap_after {
            gap_frames
        } else {
            INTER_WORD_SILENCE_FRAMES
        };
        plan.extend(std::iter::repeat(0).take(silence));
    }
    (plan, gap_after)
}

pub fn make_toy_model(spec: &ToySpec) -> Result<ToyModel> {
    if spec.n_words < 1 {
        return Err(Error::config("toy model needs at least one word"));
    }
    if spec.n_pdfs < spec.n_words + 1 || spec.n_pdfs < 2 {
        return Err(Error::config(format!(
            "toy model needs at least {} pdfs for {} words (one per word plus silence)",
            spec.n_words + 1,
            spec.n_words
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Partition the emitting pdfs among the words, 1..=3 states each where
    // the budget allows.
    let emitting = spec.n_pdfs - 1;
    let mut counts = vec![emitting / spec.n_words; spec.n_words];
    for slot in counts.iter_mut().take(emitting % spec.n_words) {
        *slot += 1;
    }
    for c in &counts {
        debug_assert!(*c >= 1);
    }
    let mut next_pdf = 1usize;
    let word_pdfs: Vec<Vec<usize>> = counts
        .iter()
        .map(|&c| {
            let pdfs: Vec<usize> = (next_pdf..next_pdf + c).collect();
            next_pdf += c;
            pdfs
        })
        .collect();

    // Distinct tone per emitting pdf, spread geometrically over 300-3400 Hz.
    let n_emitting: usize = word_pdfs.iter().map(|p| p.len()).sum();
    let tone_of = |pdf: usize| -> f64 {
        if n_emitting == 1 {
            1000.0
        } else {
            300.0 * (3400.0f64 / 300.0).powf((pdf - 1) as f64 / (n_emitting - 1) as f64)
        }
    };

    // Utterance: every word once (shuffled), padded with random words to at
    // least eight entries.
    let mut utterance: Vec<usize> = (0..spec.n_words).collect();
    utterance.shuffle(&mut rng);
    while utterance.len() < 8 {
        utterance.push(rng.gen_range(0..spec.n_words));
    }

    let frame = FrameConfig::default();
    let shift = frame.frame_shift;
    let gap_frames = (spec.gap_ms as f64 / 1000.0 * SAMPLE_RATE as f64 / shift as f64).round()
        as usize;
    let (plan, gap_after) = synthesis_plan(&word_pdfs, &utterance, gap_frames);

    // Synthesize with a continuous phase accumulator; each plan entry owns
    // `shift` samples, plus a tail so the final frame window is complete.
    let total_samples = plan.len() * shift + (frame.frame_length - shift);
    let mut samples = Vec::with_capacity(total_samples);
    let mut phase = 0.0f64;
    for &pdf in &plan {
        if pdf == 0 {
            samples.extend(std::iter::repeat(0i16).take(shift));
        } else {
            let freq = tone_of(pdf);
            let step = 2.0 * PI * freq / SAMPLE_RATE as f64;
            for _ in 0..shift {
                phase += step;
                let v = TONE_AMPLITUDE * phase.sin();
                samples.push((v * 32767.0) as i16);
            }
        }
    }
    samples.resize(total_samples, 0);

    // Run exactly the chain's front end (cutter, VAD, MFCC, sliding CMVN)
    // and collect the normalized features per pdf label. Frames are labeled
    // by the plan entry that owns their window center.
    let vad_cfg = VadConfig::default();
    let mut cutter = FrameCutter::new(&frame)?;
    let mut predictor = EnergyPredictor {
        threshold: vad_cfg.energy_threshold,
    };
    let mut filter = SilenceFilter::new(&vad_cfg)?;
    let mut extractor =
        FrameFeatureExtractor::new(BaseFeatureKind::Mfcc, &frame, &MelConfig::default())?;
    let mut cmvn = SlidingCmvn::new(600, false)?;
    let mut per_pdf: Vec<Vec<Vec<f64>>> = vec![Vec::new(); spec.n_pdfs];

    let float_samples = pcm_to_f64(&samples);
    let frames = cutter.push(&float_samples);
    let mut endpoint_count = 0usize;
    for (t, raw) in frames.iter().enumerate() {
        let label = predictor.classify(raw);
        let step = filter.step(label);
        if step.endpoint {
            endpoint_count += 1;
        }
        if !step.keep {
            continue;
        }
        let base = extractor.process_frame(raw)?;
        let rows = cmvn.push(&base)?;
        let center = t * shift + frame.frame_length / 2;
        let plan_idx = (center / shift).min(plan.len() - 1);
        per_pdf[plan[plan_idx]].push(rows.into_iter().next().unwrap());
    }

    // Single diagonal Gaussian per pdf, variances floored.
    let dims = 13;
    let mut pdfs = Vec::with_capacity(spec.n_pdfs);
    for (p, rows) in per_pdf.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::format(format!(
                "toy synthesis produced no frames for pdf {p}"
            )));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dims];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dims];
        for r in rows {
            for (s, (v, m)) in var.iter_mut().zip(r.iter().zip(&mean)) {
                let d = v - m;
                *s += d * d;
            }
        }
        for s in &mut var {
            *s = (*s / n).max(VAR_FLOOR);
        }
        pdfs.push(vec![GmmComponentParams {
            weight: 1.0,
            mean,
            var,
        }]);
    }
    let gmm = DiagGmm::new(pdfs, dims)?;

    // Word-loop graph around hub state 0: an emitting entry arc carries the
    // word label, positional states self-loop, and a free epsilon arc exits
    // back to the hub.
    let mut graph = Wfst::new(0, 1);
    graph.set_final(0, 0.0);
    graph.add_arc(
        0,
        Transition {
            to: 0,
            ilabel: 1,
            olabel: 0,
            weight: 0.3,
        },
    );
    let word_entry_cost = 1.0 + (spec.n_words as f64).ln();
    let mut next_state = 1u32;
    for (w, pdfs) in word_pdfs.iter().enumerate() {
        let word_id = (w + 1) as u32;
        let states: Vec<u32> = (0..pdfs.len()).map(|i| next_state + i as u32).collect();
        next_state += pdfs.len() as u32;
        graph.add_arc(
            0,
            Transition {
                to: states[0],
                ilabel: (pdfs[0] + 1) as u32,
                olabel: word_id,
                weight: word_entry_cost,
            },
        );
        for (j, &s) in states.iter().enumerate() {
            graph.add_arc(
                s,
                Transition {
                    to: s,
                    ilabel: (pdfs[j] + 1) as u32,
                    olabel: 0,
                    weight: 0.35,
                },
            );
            if j + 1 < states.len() {
                graph.add_arc(
                    s,
                    Transition {
                        to: states[j + 1],
                        ilabel: (pdfs[j + 1] + 1) as u32,
                        olabel: 0,
                        weight: 0.35,
                    },
                );
            }
        }
        graph.add_arc(
            *states.last().unwrap(),
            Transition {
                to: 0,
                ilabel: 0,
                olabel: 0,
                weight: 0.0,
            },
        );
    }
    graph.validate()?;

    let words = WordTable::from_words((0..spec.n_words).map(word_name))?;

    // Expected transcript, split into two segments when the long gap fires
    // an endpoint inside the run.
    let names: Vec<String> = utterance.iter().map(|&w| word_name(w)).collect();
    let endpoint_expected = gap_frames >= vad_cfg.endpoint_silence;
    let transcript = match (gap_after, endpoint_expected) {
        (Some(split), true) => {
            debug_assert_eq!(endpoint_count, 1, "long gap must fire exactly one endpoint");
            vec![names[..split].to_vec(), names[split..].to_vec()]
        }
        _ => {
            debug_assert_eq!(endpoint_count, 0);
            vec![names]
        }
    };

    let mut chain_config = String::new();
    let _ = write!(
        chain_config,
        "[chain]\npipeline = replay cutter vad mfcc cmvn scorer decoder\n\n\
         [frame]\nsample_rate = {SAMPLE_RATE}\nframe_length_ms = 25\nframe_shift_ms = 10\n\n\
         [mel]\nn_fft = 512\nn_mels = 24\nn_ceps = 13\n\n\
         [vad]\nenergy_threshold = -9.0\nkeep_silence_ms = 300\nendpoint_silence_ms = 500\nhangover_ms = 100\n\n\
         [cmvn]\nwindow = 600\nnormalize_variance = false\n\n\
         [scorer]\nbackend = gmm\nmodel = gmm.txt\n\n\
         [decoder]\ngraph = graph.txt\nwords = words.txt\nbeam = 16.0\nmax_active = 7000\nacoustic_scale = 0.1\nnbest = 10\n"
    );

    Ok(ToyModel {
        graph,
        words,
        gmm,
        samples,
        sample_rate: SAMPLE_RATE,
        transcript,
        chain_config,
    })
}

/// Write graph.txt, words.txt, gmm.txt, audio.wav, transcript.txt, and
/// chain.conf into a directory.
pub fn write_toy_model(dir: &Path, model: &ToyModel) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(e.to_string()))?;
    let write = |name: &str, body: &str| -> Result<()> {
        std::fs::write(dir.join(name), body).map_err(|e| Error::Io(e.to_string()))
    };
    let mut graph_text = Vec::new();
    model.graph.write_text(&mut graph_text)?;
    write("graph.txt", std::str::from_utf8(&graph_text).unwrap())?;
    let mut words_text = Vec::new();
    model.words.write_text(&mut words_text)?;
    write("words.txt", std::str::from_utf8(&words_text).unwrap())?;
    let mut gmm_text = Vec::new();
    model.gmm.write_text(&mut gmm_text)?;
    write("gmm.txt", std::str::from_utf8(&gmm_text).unwrap())?;
    let transcript = model
        .transcript
        .iter()
        .map(|seg| seg.join(" "))
        .collect::<Vec<_>>()
        .join("\n");
    write("transcript.txt", &format!("{transcript}\n"))?;
    write("chain.conf", &model.chain_config)?;
    write_wav_mono16(&dir.join("audio.wav"), &model.samples, model.sample_rate)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let spec = ToySpec {
            seed: 1,
            n_pdfs: 8,
            n_words: 3,
            gap_ms: 0,
        };
        let a = make_toy_model(&spec).unwrap();
        let b = make_toy_model(&spec).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.transcript, b.transcript);
        let mut ga = Vec::new();
        a.graph.write_text(&mut ga).unwrap();
        let mut gb = Vec::new();
        b.graph.write_text(&mut gb).unwrap();
        assert_eq!(ga, gb);
        let mut ma = Vec::new();
        a.gmm.write_text(&mut ma).unwrap();
        let mut mb = Vec::new();
        b.gmm.write_text(&mut mb).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn single_word_loop() {
        let spec = ToySpec {
            seed: 2,
            n_pdfs: 4,
            n_words: 1,
            gap_ms: 0,
        };
        let m = make_toy_model(&spec).unwrap();
        assert_eq!(m.transcript.len(), 1);
        assert!(m.transcript[0].iter().all(|w| w == "alpha"));
    }

    #[test]
    fn gap_splits_transcript() {
        let spec = ToySpec {
            seed: 3,
            n_pdfs: 8,
            n_words: 3,
            gap_ms: 600,
        };
        let m = make_toy_model(&spec).unwrap();
        assert_eq!(m.transcript.len(), 2);
        let total: usize = m.transcript.iter().map(|s| s.len()).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn too_few_pdfs_rejected() {
        let spec = ToySpec {
            seed: 1,
            n_pdfs: 3,
            n_words: 3,
            gap_ms: 0,
        };
        assert!(make_toy_model(&spec).is_err());
    }
}
