//! Child-process scorer speaking a line-oriented text protocol, so acoustic
//! models from any ecosystem can plug in.
//!
//! Protocol: the child prints the handshake `EKRT-SCORER 1 <n_pdfs>` on
//! stdout, then for every input line of space-separated decimal feature
//! values it prints one line of `n_pdfs` log-likelihoods. Text is slower
//! than a binary pipe but debuggable and implementable in a few lines
//! anywhere.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::{FeatureMatrix, LoglikBlock};

use super::AcousticScorer;

pub const DEFAULT_FRAME_TIMEOUT: Duration = Duration::from_secs(5);
pub const HANDSHAKE_PREFIX: &str = "EKRT-SCORER 1 ";

pub struct ExternalScorer {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    n_pdfs: usize,
    timeout: Duration,
}

impl ExternalScorer {
    /// Spawn the scorer process and wait for its handshake.
    pub fn spawn(mut command: Command, timeout: Duration) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Scorer(format!("failed to spawn scorer process: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut scorer = ExternalScorer {
            child,
            stdin,
            lines,
            n_pdfs: 0,
            timeout,
        };
        let handshake = scorer.read_line("handshake")?;
        let n_pdfs = handshake
            .strip_prefix(HANDSHAKE_PREFIX)
            .and_then(|t| t.trim().parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Scorer(format!(
                    "bad scorer handshake '{handshake}', expected '{HANDSHAKE_PREFIX}<n_pdfs>'"
                ))
            })?;
        if n_pdfs == 0 {
            return Err(Error::Scorer("scorer declared zero pdfs".into()));
        }
        scorer.n_pdfs = n_pdfs;
        Ok(scorer)
    }

    fn read_line(&mut self, what: &str) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Scorer(format!("scorer pipe error: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Scorer(format!(
                "scorer timed out after {:?} waiting for {what}",
                self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "still running".into());
                Err(Error::Scorer(format!(
                    "scorer process closed stdout while waiting for {what} (status: {status})"
                )))
            }
        }
    }
}

impl AcousticScorer for ExternalScorer {
    fn n_pdfs(&self) -> usize {
        self.n_pdfs
    }

    fn score_block(&mut self, feats: &FeatureMatrix) -> Result<LoglikBlock> {
        let mut data = Matrix::with_cols(self.n_pdfs);
        for (t, row) in feats.data.iter_rows().enumerate() {
            let line = row
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(" ");
            self.stdin
                .write_all(line.as_bytes())
                .and_then(|_| self.stdin.write_all(b"\n"))
                .and_then(|_| self.stdin.flush())
                .map_err(|e| Error::Scorer(format!("writing frame to scorer: {e}")))?;
            let reply = self.read_line("a frame score")?;
            let vals: Vec<f64> = reply
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::Scorer(format!("malformed scorer line for frame {t}: '{reply}'"))
                })?;
            if vals.len() != self.n_pdfs {
                return Err(Error::Scorer(format!(
                    "scorer returned {} values for frame {t}, expected {}",
                    vals.len(),
                    self.n_pdfs
                )));
            }
            data.push_row(&vals);
        }
        Ok(LoglikBlock {
            data,
            first_frame_index: feats.first_frame_index,
        })
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> Command {
        let mut c = Command::new("sh");
        c.arg("-c").arg(script);
        c
    }

    fn block(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix {
            data: Matrix::from_rows(rows).unwrap(),
            first_frame_index: 0,
        }
    }

    #[test]
    fn echo_style_scorer_returns_fixed_row() {
        let script = r#"echo "EKRT-SCORER 1 3"; while read line; do echo "0.5 -1.25 2.0"; done"#;
        let mut s = ExternalScorer::spawn(sh(script), Duration::from_secs(10)).unwrap();
        assert_eq!(s.n_pdfs(), 3);
        let out = s
            .score_block(&block(&[vec![1.0, 2.0], vec![3.0, 4.0]]))
            .unwrap();
        assert_eq!(out.frames(), 2);
        for r in 0..2 {
            assert_eq!(out.data.row(r), &[0.5, -1.25, 2.0]);
        }
    }

    #[test]
    fn identity_scorer_round_trips_floats() {
        // cat echoes the feature line back; with n_pdfs == dims that is a
        // valid scorer, and shortest round-trip formatting is lossless.
        let script = r#"echo "EKRT-SCORER 1 2"; exec cat"#;
        let mut s = ExternalScorer::spawn(sh(script), Duration::from_secs(10)).unwrap();
        let rows = vec![vec![0.1, -3.0e-7], vec![1.0 / 3.0, 2.5]];
        let out = s.score_block(&block(&rows)).unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(out.data.row(i), &r[..]);
        }
    }

    #[test]
    fn bad_handshake_is_an_error() {
        match ExternalScorer::spawn(sh(r#"echo "HELLO 9""#), Duration::from_secs(10)) {
            Err(err) => assert!(err.to_string().contains("handshake"), "{err}"),
            Ok(_) => panic!("bad handshake must be rejected"),
        }
    }

    #[test]
    fn immediate_exit_is_an_error() {
        match ExternalScorer::spawn(sh("exit 3"), Duration::from_secs(10)) {
            Err(err) => assert!(err.to_string().contains("scorer"), "{err}"),
            Ok(_) => panic!("dead process must be rejected"),
        }
    }

    #[test]
    fn death_mid_stream_is_an_error() {
        let script = r#"echo "EKRT-SCORER 1 2"; read line; echo "1 2"; exit 0"#;
        let mut s = ExternalScorer::spawn(sh(script), Duration::from_secs(10)).unwrap();
        let ok = s.score_block(&block(&[vec![1.0]])).unwrap();
        assert_eq!(ok.data.row(0), &[1.0, 2.0]);
        let err = s.score_block(&block(&[vec![2.0]])).unwrap_err();
        assert!(err.to_string().contains("scorer"), "{err}");
    }

    #[test]
    fn wrong_width_is_an_error() {
        let script = r#"echo "EKRT-SCORER 1 3"; while read line; do echo "1 2"; done"#;
        let mut s = ExternalScorer::spawn(sh(script), Duration::from_secs(10)).unwrap();
        let err = s.score_block(&block(&[vec![1.0]])).unwrap_err();
        assert!(err.to_string().contains("expected 3"), "{err}");
    }
}
