//! Acoustic probability estimation: feature frames in, per-frame
//! log-likelihood rows over pdf indices out, via pluggable backends.

pub mod external;
pub mod gmm;
pub mod replay;

pub use external::ExternalScorer;
pub use gmm::{DiagGmm, GmmComponentParams, GmmScorer};
pub use replay::ReplayScorer;

use crate::error::{Error, Result};
use crate::packet::{FeatureMatrix, LoglikBlock, Payload, PayloadKind};
use crate::pipeline::{Boundary, Emit, StageComponent, StreamStage};

/// A probability estimator backend. Scores are natural-log likelihoods (or
/// log-posteriors; dividing out priors is the backend's responsibility).
pub trait AcousticScorer: Send {
    fn n_pdfs(&self) -> usize;
    /// Feature width the backend expects, when known up front.
    fn input_dims(&self) -> Option<usize> {
        None
    }
    fn score_block(&mut self, feats: &FeatureMatrix) -> Result<LoglikBlock>;
}

/// Chain component: FeatureBlock in, LoglikBlock out, flags pass through.
pub struct ScorerStage {
    scorer: Box<dyn AcousticScorer>,
}

impl ScorerStage {
    pub fn new(scorer: Box<dyn AcousticScorer>) -> Self {
        ScorerStage { scorer }
    }

    pub fn component(scorer: Box<dyn AcousticScorer>) -> StageComponent<Self> {
        StageComponent::new(Self::new(scorer))
    }
}

impl StreamStage for ScorerStage {
    fn name(&self) -> &str {
        "scorer"
    }

    fn input_kind(&self) -> PayloadKind {
        PayloadKind::FeatureBlock
    }

    fn output_kind(&self) -> PayloadKind {
        PayloadKind::LoglikBlock
    }

    fn process(&mut self, payload: Payload) -> Result<Vec<Emit>> {
        let feats = match payload {
            Payload::FeatureBlock(f) => f,
            other => {
                return Err(Error::Scorer(format!(
                    "scorer received {:?} payload",
                    other.kind()
                )))
            }
        };
        if feats.frames() == 0 {
            return Ok(Vec::new());
        }
        let block = self.scorer.score_block(&feats)?;
        Ok(vec![Emit::data(Payload::LoglikBlock(block))])
    }

    fn flush(&mut self, _boundary: Boundary) -> Result<Vec<Emit>> {
        Ok(Vec::new())
    }
}
