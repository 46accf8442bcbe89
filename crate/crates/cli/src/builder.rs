//! Chain assembly from a configuration file, mirroring the classic online
//! pipeline: source, frame cutter, VAD, feature extraction and transforms,
//! probability estimation, and decoding, with optional client/server
//! transport in between.

use std::fs::File;
use std::io::BufReader;
use std::net::TcpStream;
use std::time::Duration;

use ekrt_core::decoder::{DecoderComponent, DecoderConfig, TokenDecoder, Wfst, WordTable};
use ekrt_core::dsp::{
    AffineOp, AffineTransform, BaseFeatureKind, DeltaAppender, FeatureExtractorStage, FeatureOp,
    FeatureOpStage, FrameConfig, FrameCutterStage, FrameFeatureExtractor, MelConfig,
    MixtureStage, MixtureStream, SlidingCmvn, Splicer,
};
use ekrt_core::error::{Error, Result};
use ekrt_core::matrix::read_matrix_text;
use ekrt_core::packet::{LoglikBlock, PayloadKind};
use ekrt_core::pipeline::Chain;
use ekrt_core::scoring::{
    AcousticScorer, DiagGmm, ExternalScorer, GmmScorer, ReplayScorer, ScorerStage,
};
use ekrt_core::transport::{ReceiverComponent, SenderComponent};
use ekrt_core::vad::{VadConfig, VadStage};

use crate::config::ChainConfig;
use crate::replay::{ReplayComponent, DEFAULT_CHUNK_MS};

/// Sources and connections the caller supplies from the command line.
#[derive(Default)]
pub struct ChainIo {
    /// Audio for the `replay` component: samples, sample rate, realtime.
    pub audio: Option<(Vec<i16>, u32, bool)>,
    /// Connection for the `sender` or `receiver` component.
    pub connection: Option<TcpStream>,
    /// Override for `[decoder] nbest`.
    pub nbest: Option<usize>,
}

/// What the builder learned about the chain, for rendering output.
pub struct ChainInfo {
    pub words: Option<WordTable>,
    /// Feature dimensionality at the chain's end, when it ends in features.
    pub feature_dims: Option<usize>,
    pub graph_warnings: Vec<String>,
}

pub fn frame_config(cfg: &ChainConfig) -> Result<FrameConfig> {
    let defaults = FrameConfig::default();
    let sample_rate = cfg.get_usize("frame", "sample_rate", defaults.sample_rate as usize)? as u32;
    let frame_length_ms = cfg.get_f64("frame", "frame_length_ms", 25.0)?;
    let frame_shift_ms = cfg.get_f64("frame", "frame_shift_ms", 10.0)?;
    let fc = FrameConfig {
        sample_rate,
        frame_length: (sample_rate as f64 * frame_length_ms / 1000.0).round() as usize,
        frame_shift: (sample_rate as f64 * frame_shift_ms / 1000.0).round() as usize,
        preemphasis: cfg.get_f64("frame", "preemphasis", defaults.preemphasis)?,
        window: match cfg.get_str("frame", "window", "hamming").as_str() {
            "hamming" => ekrt_core::dsp::WindowKind::Hamming,
            "hann" => ekrt_core::dsp::WindowKind::Hann,
            "rectangular" => ekrt_core::dsp::WindowKind::Rectangular,
            other => {
                return Err(Error::config(format!(
                    "[frame] window = '{other}' (expected hamming, hann, or rectangular)"
                )))
            }
        },
    };
    fc.validate()?;
    Ok(fc)
}

pub fn mel_config(cfg: &ChainConfig, sample_rate: u32) -> Result<MelConfig> {
    let d = MelConfig::default();
    Ok(MelConfig {
        n_fft: cfg.get_usize("mel", "n_fft", d.n_fft)?,
        n_mels: cfg.get_usize("mel", "n_mels", d.n_mels)?,
        fmin: cfg.get_f64("mel", "fmin", d.fmin)?,
        fmax: cfg.get_f64("mel", "fmax", (sample_rate / 2) as f64)?,
        n_ceps: cfg.get_usize("mel", "n_ceps", d.n_ceps)?,
    })
}

pub fn vad_config(cfg: &ChainConfig, frame: &FrameConfig) -> Result<VadConfig> {
    let d = VadConfig::default();
    let shift_ms = frame.frame_shift as f64 * 1000.0 / frame.sample_rate as f64;
    let to_frames = |ms: f64| (ms / shift_ms).round() as usize;
    let vc = VadConfig {
        energy_threshold: cfg.get_f64("vad", "energy_threshold", d.energy_threshold)?,
        keep_silence: to_frames(cfg.get_f64("vad", "keep_silence_ms", 300.0)?),
        endpoint_silence: to_frames(cfg.get_f64("vad", "endpoint_silence_ms", 500.0)?),
        hangover: to_frames(cfg.get_f64("vad", "hangover_ms", 100.0)?),
    };
    vc.validate()?;
    Ok(vc)
}

fn decoder_config(cfg: &ChainConfig, io: &ChainIo) -> Result<DecoderConfig> {
    let d = DecoderConfig::default();
    let dc = DecoderConfig {
        beam: cfg.get_f64("decoder", "beam", d.beam)?,
        max_active: cfg.get_usize("decoder", "max_active", d.max_active)?,
        acoustic_scale: cfg.get_f64("decoder", "acoustic_scale", d.acoustic_scale)?,
        nbest: match io.nbest {
            Some(k) => k,
            None => cfg.get_usize("decoder", "nbest", d.nbest)?,
        },
        non_final_cost: cfg.get_f64("decoder", "non_final_cost", d.non_final_cost)?,
    };
    dc.validate()?;
    Ok(dc)
}

fn base_extractor(
    kind: BaseFeatureKind,
    frame: &FrameConfig,
    mel: &MelConfig,
) -> Result<FrameFeatureExtractor> {
    FrameFeatureExtractor::new(kind, frame, mel)
}

/// Feature ops for one mixture stream, in the fixed order
/// deltas -> splice -> transform.
fn stream_ops(cfg: &ChainConfig, section: &str) -> Result<Vec<Box<dyn FeatureOp>>> {
    let mut ops: Vec<Box<dyn FeatureOp>> = Vec::new();
    let deltas = cfg.get_usize(section, "deltas", 0)?;
    if deltas > 0 {
        let hw = cfg.get_usize(section, "half_window", 2)?;
        ops.push(Box::new(DeltaAppender::new(deltas, hw)?));
    }
    let left = cfg.get_usize(section, "splice_left", 0)?;
    let right = cfg.get_usize(section, "splice_right", 0)?;
    if left > 0 || right > 0 {
        ops.push(Box::new(Splicer::new(left, right)));
    }
    if cfg.get(section, "transform").is_some() {
        let path = cfg.resolve_path(section, "transform")?;
        let m = read_matrix_text(BufReader::new(File::open(&path).map_err(|e| {
            Error::config(format!("[{section}] transform {}: {e}", path.display()))
        })?))?;
        ops.push(Box::new(AffineOp::new(AffineTransform::new(m, None)?)));
    }
    Ok(ops)
}

fn build_scorer(cfg: &ChainConfig) -> Result<(Box<dyn AcousticScorer>, Option<usize>)> {
    match cfg.get_str("scorer", "backend", "gmm").as_str() {
        "gmm" => {
            let path = cfg.resolve_path("scorer", "model")?;
            let file = File::open(&path).map_err(|e| {
                Error::config(format!("[scorer] model {}: {e}", path.display()))
            })?;
            let model = DiagGmm::parse_text(BufReader::new(file))?;
            let n = model.n_pdfs();
            Ok((Box::new(GmmScorer::new(model)), Some(n)))
        }
        "replay" => {
            let path = cfg.resolve_path("scorer", "table")?;
            let file = File::open(&path).map_err(|e| {
                Error::config(format!("[scorer] table {}: {e}", path.display()))
            })?;
            let data = read_matrix_text(BufReader::new(file))?;
            let n = data.cols();
            let table = LoglikBlock {
                data,
                first_frame_index: 0,
            };
            Ok((Box::new(ReplayScorer::new(table)), Some(n)))
        }
        "external" => {
            let command = cfg.require("scorer", "command")?.to_string();
            let timeout =
                Duration::from_secs_f64(cfg.get_f64("scorer", "timeout_secs", 5.0)?);
            let mut proc = std::process::Command::new("sh");
            proc.arg("-c").arg(&command);
            let scorer = ExternalScorer::spawn(proc, timeout)?;
            let n = scorer.n_pdfs();
            Ok((Box::new(scorer), Some(n)))
        }
        other => Err(Error::config(format!(
            "[scorer] backend = '{other}' (expected gmm, replay, or external)"
        ))),
    }
}

/// Instantiate the configured chain. Components are linked in the order
/// given by `[chain] pipeline`; payload-kind compatibility is validated at
/// start, dimension flow here.
pub fn build_chain(cfg: &ChainConfig, mut io: ChainIo) -> Result<(Chain, ChainInfo)> {
    let names = cfg.pipeline()?;
    let frame = frame_config(cfg)?;
    let mel = mel_config(cfg, frame.sample_rate)?;
    let capacity = cfg.get_usize("chain", "pipe_capacity", 32)?;
    let mut chain = Chain::with_capacity(capacity);
    let mut info = ChainInfo {
        words: None,
        feature_dims: None,
        graph_warnings: Vec::new(),
    };
    // Dimensionality flowing between feature stages, when known.
    let mut dims: Option<usize> = None;
    // Scorer output width, for validating the decoder graph.
    let mut n_pdfs: Option<usize> = None;
    let mut last_kind: Option<PayloadKind> = None;

    for name in &names {
        match name.as_str() {
            "replay" => {
                let (samples, sample_rate, realtime) = io.audio.take().ok_or_else(|| {
                    Error::config("pipeline uses 'replay' but no --wav audio was supplied")
                })?;
                if sample_rate != frame.sample_rate {
                    return Err(Error::config(format!(
                        "WAV is {sample_rate} Hz but [frame] sample_rate is {}",
                        frame.sample_rate
                    )));
                }
                let chunk_ms = cfg.get_u64("replay", "chunk_ms", DEFAULT_CHUNK_MS)?;
                chain.add(ReplayComponent::new(samples, sample_rate, chunk_ms, realtime));
                last_kind = Some(PayloadKind::AudioChunk);
            }
            "cutter" => {
                chain.add(FrameCutterStage::component(&frame)?);
                last_kind = Some(PayloadKind::FrameBlock);
            }
            "vad" => {
                let vc = vad_config(cfg, &frame)?;
                chain.add(VadStage::component(&vc)?);
                last_kind = Some(PayloadKind::FrameBlock);
            }
            "mfcc" | "fbank" => {
                let kind = if name == "mfcc" {
                    BaseFeatureKind::Mfcc
                } else {
                    BaseFeatureKind::Fbank
                };
                let ex = base_extractor(kind, &frame, &mel)?;
                dims = Some(ex.out_dims());
                chain.add(FeatureExtractorStage::component(name.clone(), ex));
                last_kind = Some(PayloadKind::FeatureBlock);
            }
            "mixture" => {
                let streams_raw = cfg.require("mixture", "streams")?.to_string();
                let mut streams = Vec::new();
                for stream_name in streams_raw.split_whitespace() {
                    let section = format!("mixture.{stream_name}");
                    let kind = match cfg.get_str(&section, "type", "mfcc").as_str() {
                        "mfcc" => BaseFeatureKind::Mfcc,
                        "fbank" => BaseFeatureKind::Fbank,
                        other => {
                            return Err(Error::config(format!(
                                "[{section}] type = '{other}' (expected mfcc or fbank)"
                            )))
                        }
                    };
                    streams.push(MixtureStream {
                        extractor: base_extractor(kind, &frame, &mel)?,
                        ops: stream_ops(cfg, &section)?,
                    });
                }
                let stage = MixtureStage::new(streams)?;
                dims = Some(stage.out_dims());
                chain.add(ekrt_core::pipeline::StageComponent::new(stage));
                last_kind = Some(PayloadKind::FeatureBlock);
            }
            "deltas" => {
                let order = cfg.get_usize("deltas", "order", 2)?;
                let hw = cfg.get_usize("deltas", "half_window", 2)?;
                let op = DeltaAppender::new(order, hw)?;
                dims = dims.map(|d| op.out_dims(d));
                chain.add(FeatureOpStage::component(Box::new(op)));
            }
            "splice" => {
                let left = cfg.get_usize("splice", "left", 3)?;
                let right = cfg.get_usize("splice", "right", 3)?;
                let op = Splicer::new(left, right);
                dims = dims.map(|d| op.out_dims(d));
                chain.add(FeatureOpStage::component(Box::new(op)));
            }
            "cmvn" => {
                let window = cfg.get_usize("cmvn", "window", 600)?;
                let variance = cfg.get_bool("cmvn", "normalize_variance", false)?;
                chain.add(FeatureOpStage::component(Box::new(SlidingCmvn::new(
                    window, variance,
                )?)));
            }
            "transform" => {
                let path = cfg.resolve_path("transform", "matrix")?;
                let m = read_matrix_text(BufReader::new(File::open(&path).map_err(|e| {
                    Error::config(format!("[transform] matrix {}: {e}", path.display()))
                })?))?;
                let t = AffineTransform::new(m, None)?;
                if let Some(d) = dims {
                    if t.in_dims() != d {
                        return Err(Error::config(format!(
                            "[transform] matrix expects {} input dims but the chain produces {d}",
                            t.in_dims()
                        )));
                    }
                }
                dims = Some(t.out_dims());
                chain.add(FeatureOpStage::component(Box::new(AffineOp::new(t))));
            }
            "scorer" => {
                let (scorer, pdfs) = build_scorer(cfg)?;
                if let (Some(model_dims), Some(flow)) = (scorer.input_dims(), dims) {
                    if model_dims != flow {
                        return Err(Error::config(format!(
                            "[scorer] model expects {model_dims} feature dims but the chain produces {flow}"
                        )));
                    }
                }
                n_pdfs = pdfs;
                chain.add(ScorerStage::component(scorer));
                last_kind = Some(PayloadKind::LoglikBlock);
            }
            "decoder" => {
                let graph_path = cfg.resolve_path("decoder", "graph")?;
                let file = File::open(&graph_path).map_err(|e| {
                    Error::config(format!("[decoder] graph {}: {e}", graph_path.display()))
                })?;
                let (graph, warnings) = Wfst::parse_text(BufReader::new(file))?;
                info.graph_warnings = warnings;
                if let Some(p) = n_pdfs {
                    let need = graph.max_ilabel() as usize;
                    if need > p {
                        return Err(Error::config(format!(
                            "[decoder] graph consumes input label {need} but the scorer provides only {p} pdfs"
                        )));
                    }
                }
                if let Some(words_path) = cfg.get("decoder", "words") {
                    let p = cfg.resolve_path("decoder", "words")?;
                    let file = File::open(&p).map_err(|e| {
                        Error::config(format!("[decoder] words {words_path}: {e}"))
                    })?;
                    info.words = Some(WordTable::parse_text(BufReader::new(file))?);
                }
                let dc = decoder_config(cfg, &io)?;
                let decoder = TokenDecoder::new(std::sync::Arc::new(graph), dc)?;
                let partials = cfg.get_bool("decoder", "partials", true)?;
                chain.add(DecoderComponent::new(decoder).with_partials(partials));
                last_kind = Some(PayloadKind::HypothesisSet);
            }
            "sender" => {
                let conn = io.connection.take().ok_or_else(|| {
                    Error::config("pipeline uses 'sender' but no connection was supplied")
                })?;
                let kind = last_kind.ok_or_else(|| {
                    Error::config("'sender' cannot be the first component in the pipeline")
                })?;
                let retries = cfg.get_usize("transport", "max_retries", 3)? as u32;
                chain.add(SenderComponent::new(conn, kind, retries));
            }
            "receiver" => {
                let conn = io.connection.take().ok_or_else(|| {
                    Error::config("pipeline uses 'receiver' but no connection was supplied")
                })?;
                let kind = match cfg.get_str("transport", "payload", "frames").as_str() {
                    "audio" => PayloadKind::AudioChunk,
                    "frames" => PayloadKind::FrameBlock,
                    "features" => PayloadKind::FeatureBlock,
                    "loglik" => PayloadKind::LoglikBlock,
                    other => {
                        return Err(Error::config(format!(
                            "[transport] payload = '{other}' (expected audio, frames, features, or loglik)"
                        )))
                    }
                };
                chain.add(ReceiverComponent::new(conn, kind));
                last_kind = Some(kind);
            }
            other => {
                return Err(Error::config(format!(
                    "unknown component '{other}' in [chain] pipeline"
                )))
            }
        }
    }
    info.feature_dims = dims;
    chain.validate()?;
    Ok((chain, info))
}
