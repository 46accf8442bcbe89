//! Real-time-factor benchmarking: process files as fast as possible and
//! report processing time over audio duration.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use ekrt_core::error::Result;

use crate::builder::{build_chain, ChainIo};
use crate::config::ChainConfig;
use crate::runner::run_chain_collect;
use crate::wav::read_wav_mono16;

pub struct RtfEntry {
    pub name: String,
    pub audio_seconds: f64,
    pub processing_seconds: f64,
}

impl RtfEntry {
    pub fn rtf(&self) -> f64 {
        if self.audio_seconds > 0.0 {
            self.processing_seconds / self.audio_seconds
        } else {
            0.0
        }
    }
}

#[derive(Default)]
pub struct RtfReport {
    pub entries: Vec<RtfEntry>,
}

impl RtfReport {
    pub fn total_audio(&self) -> f64 {
        self.entries.iter().map(|e| e.audio_seconds).sum()
    }

    pub fn total_processing(&self) -> f64 {
        self.entries.iter().map(|e| e.processing_seconds).sum()
    }

    pub fn aggregate_rtf(&self) -> Option<f64> {
        let audio = self.total_audio();
        if audio > 0.0 {
            Some(self.total_processing() / audio)
        } else {
            None
        }
    }
}

impl fmt::Display for RtfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<32} {:>10} {:>10} {:>8}", "file", "audio[s]", "proc[s]", "RTF")?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<32} {:>10.3} {:>10.3} {:>8.3}",
                e.name,
                e.audio_seconds,
                e.processing_seconds,
                e.rtf()
            )?;
        }
        match self.aggregate_rtf() {
            Some(rtf) => writeln!(
                f,
                "{:<32} {:>10.3} {:>10.3} {:>8.3}",
                "total",
                self.total_audio(),
                self.total_processing(),
                rtf
            ),
            None => writeln!(f, "no audio processed"),
        }
    }
}

/// Build and run the configured chain once per file, as fast as possible
/// (replay pacing off), timing wall clock from start to full drain.
pub fn bench_rtf(cfg: &ChainConfig, wavs: &[PathBuf]) -> Result<RtfReport> {
    let mut report = RtfReport::default();
    for path in wavs {
        let (samples, sample_rate) = read_wav_mono16(path)?;
        let audio_seconds = samples.len() as f64 / sample_rate as f64;
        let io = ChainIo {
            audio: Some((samples, sample_rate, false)),
            ..ChainIo::default()
        };
        let (chain, _info) = build_chain(cfg, io)?;
        let start = Instant::now();
        run_chain_collect(chain)?;
        let processing_seconds = start.elapsed().as_secs_f64();
        report.entries.push(RtfEntry {
            name: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            audio_seconds,
            processing_seconds,
        });
    }
    Ok(report)
}
