//! Table-replay backend: serves precomputed log-likelihood rows by absolute
//! frame index. Used as a deterministic oracle in end-to-end tests.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::{FeatureMatrix, LoglikBlock};

use super::AcousticScorer;

pub struct ReplayScorer {
    table: LoglikBlock,
}

impl ReplayScorer {
    pub fn new(table: LoglikBlock) -> Self {
        ReplayScorer { table }
    }
}

impl AcousticScorer for ReplayScorer {
    fn n_pdfs(&self) -> usize {
        self.table.n_pdfs()
    }

    fn score_block(&mut self, feats: &FeatureMatrix) -> Result<LoglikBlock> {
        let start = feats.first_frame_index;
        let end = start + feats.frames() as u64;
        let table_start = self.table.first_frame_index;
        let table_end = table_start + self.table.frames() as u64;
        if start < table_start || end > table_end {
            let missing = if start < table_start { start } else { table_end };
            return Err(Error::Scorer(format!(
                "replay table covers frames [{table_start}..{table_end}), \
                 request [{start}..{end}) misses frame {missing}"
            )));
        }
        let mut data = Matrix::with_cols(self.table.n_pdfs());
        for i in start..end {
            data.push_row(self.table.data.row((i - table_start) as usize));
        }
        Ok(LoglikBlock {
            data,
            first_frame_index: start,
        })
    }
}
