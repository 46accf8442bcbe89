use std::io::{BufRead, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ekrt_core::packet::{Packet, Payload};
use ekrt_core::scoring::DiagGmm;

use ekrt_cli::builder::{build_chain, ChainIo};
use ekrt_cli::config::ChainConfig;
use ekrt_cli::rtf::bench_rtf;
use ekrt_cli::runner::run_chain_collect;
use ekrt_cli::toy::{make_toy_model, write_toy_model, ToySpec};
use ekrt_cli::wav::read_wav_mono16;

#[derive(Parser)]
#[command(name = "ekrt", version, about = "Streaming speech recognition pipeline tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from a WAV file and write them as a text matrix.
    Featurize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Pace the replay at 1x wall-clock speed.
        #[arg(long)]
        realtime: bool,
    },
    /// Classify speech/silence and report the silence filter's decisions.
    Vad {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decode a WAV file; prints `cost<TAB>words` per hypothesis, one block
    /// per finalized segment.
    Decode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Hypotheses per segment (overrides [decoder] nbest).
        #[arg(long)]
        nbest: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        realtime: bool,
    },
    /// Accept one connection and run the server half of the pipeline.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: String,
    },
    /// Stream a WAV through the client half of the pipeline to a server.
    Client {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        connect: String,
        #[arg(long)]
        realtime: bool,
    },
    /// Process files at full speed and report real-time factors.
    BenchRtf {
        #[arg(long)]
        config: PathBuf,
        /// WAV files to process; repeat the flag for a set.
        #[arg(long)]
        wav: Vec<PathBuf>,
    },
    /// Generate a deterministic toy recognition task (graph, GMM, word
    /// table, synthetic WAV, reference transcript, chain config).
    MakeToyModel {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        pdfs: usize,
        #[arg(long, default_value_t = 3)]
        words: usize,
        #[arg(long)]
        output_dir: PathBuf,
        /// Insert a silence gap of this length mid-utterance.
        #[arg(long, default_value_t = 0)]
        gap_ms: u64,
    },
    /// Serve a GMM model over the external-scorer line protocol
    /// (handshake `EKRT-SCORER 1 <n_pdfs>`, one line of scores per frame).
    GmmScorer {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Featurize {
            config,
            wav,
            output,
            realtime,
        } => featurize(&config, &wav, &output, realtime),
        Command::Vad {
            config,
            wav,
            output,
        } => vad(&config, &wav, output.as_deref()),
        Command::Decode {
            config,
            wav,
            nbest,
            output,
            realtime,
        } => decode(&config, &wav, nbest, output.as_deref(), realtime),
        Command::Serve { config, listen } => serve(&config, &listen),
        Command::Client {
            config,
            wav,
            connect,
            realtime,
        } => client(&config, &wav, &connect, realtime),
        Command::BenchRtf { config, wav } => {
            let cfg = ChainConfig::from_path(&config)?;
            let report = bench_rtf(&cfg, &wav)?;
            print!("{report}");
            Ok(())
        }
        Command::MakeToyModel {
            seed,
            pdfs,
            words,
            output_dir,
            gap_ms,
        } => {
            let model = make_toy_model(&ToySpec {
                seed,
                n_pdfs: pdfs,
                n_words: words,
                gap_ms,
            })?;
            write_toy_model(&output_dir, &model)?;
            println!(
                "toy model written to {} ({:.2} s of audio, {} segment(s))",
                output_dir.display(),
                model.samples.len() as f64 / model.sample_rate as f64,
                model.transcript.len()
            );
            Ok(())
        }
        Command::GmmScorer { model } => gmm_scorer(&model),
    }
}

fn load_audio(config: &ChainConfig, wav: &PathBuf) -> Result<(Vec<i16>, u32)> {
    let _ = config;
    Ok(read_wav_mono16(wav)?)
}

fn featurize(config: &PathBuf, wav: &PathBuf, output: &PathBuf, realtime: bool) -> Result<()> {
    let mut cfg = ChainConfig::from_path(config)?;
    cfg.truncate_pipeline_to_features()?;
    let (samples, sample_rate) = load_audio(&cfg, wav)?;
    let io = ChainIo {
        audio: Some((samples, sample_rate, realtime)),
        ..ChainIo::default()
    };
    let (chain, _info) = build_chain(&cfg, io)?;
    let packets = run_chain_collect(chain)?;
    let mut rows = ekrt_core::matrix::Matrix::with_cols(0);
    for p in &packets {
        if let Payload::FeatureBlock(f) = &p.payload {
            if rows.cols() == 0 && rows.rows() == 0 {
                rows = ekrt_core::matrix::Matrix::with_cols(f.dims());
            }
            for r in 0..f.frames() {
                rows.push_row(f.data.row(r));
            }
        }
    }
    let file = std::fs::File::create(output)
        .with_context(|| format!("cannot create {}", output.display()))?;
    ekrt_core::matrix::write_matrix_text(std::io::BufWriter::new(file), &rows)?;
    eprintln!("wrote {} frames x {} dims", rows.rows(), rows.cols());
    Ok(())
}

fn vad(config: &PathBuf, wav: &PathBuf, output: Option<&std::path::Path>) -> Result<()> {
    let mut cfg = ChainConfig::from_path(config)?;
    cfg.truncate_pipeline_after("vad")?;
    let (samples, sample_rate) = load_audio(&cfg, wav)?;
    let frame = ekrt_cli::builder::frame_config(&cfg)?;
    let frames_in = if samples.len() >= frame.frame_length {
        (samples.len() - frame.frame_length) / frame.frame_shift + 1
    } else if samples.is_empty() {
        0
    } else {
        1
    };
    let io = ChainIo {
        audio: Some((samples, sample_rate, false)),
        ..ChainIo::default()
    };
    let (chain, _info) = build_chain(&cfg, io)?;
    let packets = run_chain_collect(chain)?;
    let mut forwarded = 0usize;
    let mut endpoints = Vec::new();
    for p in &packets {
        if let Payload::FrameBlock(b) = &p.payload {
            forwarded += b.frames.rows();
        }
        if p.flags.endpoint {
            endpoints.push(forwarded);
        }
    }
    let mut report = format!(
        "frames_in={frames_in} forwarded={forwarded} dropped={} endpoints={}\n",
        frames_in.saturating_sub(forwarded),
        endpoints.len()
    );
    for (i, at) in endpoints.iter().enumerate() {
        report.push_str(&format!("endpoint {} after forwarded frame {at}\n", i + 1));
    }
    print!("{report}");
    if let Some(path) = output {
        std::fs::write(path, report)?;
    }
    Ok(())
}

fn render_hypotheses(
    packets: &[Packet],
    words: Option<&ekrt_core::decoder::WordTable>,
    partial_sink: &mut dyn FnMut(&str),
) -> Result<String> {
    let mut out = String::new();
    for p in packets {
        if let Payload::HypothesisSet(hyps) = &p.payload {
            let finalized = p.flags.endpoint || p.flags.eos;
            for h in hyps {
                let text = match words {
                    Some(t) => t.render(&h.words)?,
                    None => h
                        .words
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                };
                if finalized {
                    out.push_str(&format!("{:.6}\t{}\n", h.cost, text));
                } else {
                    partial_sink(&text);
                }
            }
        }
    }
    Ok(out)
}

fn decode(
    config: &PathBuf,
    wav: &PathBuf,
    nbest: Option<usize>,
    output: Option<&std::path::Path>,
    realtime: bool,
) -> Result<()> {
    let cfg = ChainConfig::from_path(config)?;
    let (samples, sample_rate) = load_audio(&cfg, wav)?;
    let io = ChainIo {
        audio: Some((samples, sample_rate, realtime)),
        nbest,
        ..ChainIo::default()
    };
    let (chain, info) = build_chain(&cfg, io)?;
    for w in &info.graph_warnings {
        eprintln!("graph warning: {w}");
    }
    let packets = run_chain_collect(chain)?;
    let mut last_partial = String::new();
    let text = render_hypotheses(&packets, info.words.as_ref(), &mut |partial| {
        if partial != last_partial {
            eprintln!("partial: {partial}");
            last_partial = partial.to_string();
        }
    })?;
    print!("{text}");
    if let Some(path) = output {
        std::fs::write(path, &text)?;
    }
    Ok(())
}

fn serve(config: &PathBuf, listen: &str) -> Result<()> {
    let cfg = ChainConfig::from_path(config)?;
    let listener =
        TcpListener::bind(listen).with_context(|| format!("cannot listen on {listen}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let (stream, peer) = listener.accept()?;
    eprintln!("connection from {peer}");
    stream.set_nodelay(true).ok();
    let io = ChainIo {
        connection: Some(stream),
        ..ChainIo::default()
    };
    let (chain, info) = build_chain(&cfg, io)?;
    let packets = run_chain_collect(chain)?;
    let text = render_hypotheses(&packets, info.words.as_ref(), &mut |_| {})?;
    print!("{text}");
    Ok(())
}

fn client(config: &PathBuf, wav: &PathBuf, connect: &str, realtime: bool) -> Result<()> {
    let cfg = ChainConfig::from_path(config)?;
    let (samples, sample_rate) = load_audio(&cfg, wav)?;
    let stream =
        TcpStream::connect(connect).with_context(|| format!("cannot connect to {connect}"))?;
    stream.set_nodelay(true).ok();
    let io = ChainIo {
        audio: Some((samples, sample_rate, realtime)),
        connection: Some(stream),
        ..ChainIo::default()
    };
    let (chain, _info) = build_chain(&cfg, io)?;
    run_chain_collect(chain)?;
    eprintln!("stream sent");
    Ok(())
}

fn gmm_scorer(model_path: &PathBuf) -> Result<()> {
    let file = std::fs::File::open(model_path)
        .with_context(|| format!("cannot open {}", model_path.display()))?;
    let model = DiagGmm::parse_text(std::io::BufReader::new(file))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "EKRT-SCORER 1 {}", model.n_pdfs())?;
    out.flush()?;
    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .context("malformed feature line")?;
        if frame.len() != model.dims() {
            bail!(
                "feature line has {} values, model expects {}",
                frame.len(),
                model.dims()
            );
        }
        let scores = model.score_frame(&frame)?;
        let text = scores
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{text}")?;
        out.flush()?;
    }
    Ok(())
}
