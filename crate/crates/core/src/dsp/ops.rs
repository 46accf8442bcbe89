//! Streaming feature transforms.
//!
//! Every operator consumes one row at a time and emits zero or more rows, so
//! a matrix processed packet-by-packet equals the same matrix processed in
//! one shot. `flush` drains look-ahead state at a segment boundary (edge rows
//! are replicated) and leaves the operator ready for the next segment;
//! causal operators without look-ahead keep their trailing statistics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::packet::FeatureMatrix;

pub trait FeatureOp: Send {
    fn name(&self) -> &'static str;
    fn out_dims(&self, in_dims: usize) -> usize;
    fn push(&mut self, row: &[f64]) -> Result<Vec<Vec<f64>>>;
    fn flush(&mut self) -> Result<Vec<Vec<f64>>>;
}

/// Push a row through a cascade of operators.
pub fn cascade_push(ops: &mut [Box<dyn FeatureOp>], row: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut rows = vec![row.to_vec()];
    for op in ops.iter_mut() {
        let mut next = Vec::new();
        for r in &rows {
            next.extend(op.push(r)?);
        }
        rows = next;
    }
    Ok(rows)
}

/// Flush a cascade front to back: rows drained from one operator still pass
/// through the operators after it before those flush in turn.
pub fn cascade_flush(ops: &mut [Box<dyn FeatureOp>]) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..ops.len() {
        let mut next = Vec::new();
        for r in &rows {
            next.extend(ops[i].push(r)?);
        }
        next.extend(ops[i].flush()?);
        rows = next;
    }
    Ok(rows)
}

/// Ring of pending rows addressed by absolute row index within the segment.
struct RowWindow {
    buf: VecDeque<Vec<f64>>,
    base: usize,
    arrived: usize,
}

impl RowWindow {
    fn new() -> Self {
        RowWindow {
            buf: VecDeque::new(),
            base: 0,
            arrived: 0,
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        self.buf.push_back(row);
        self.arrived += 1;
    }

    /// Row at index `i` clamped to the segment bounds [0, arrived).
    fn get_clamped(&self, i: isize) -> &[f64] {
        let idx = i.clamp(0, self.arrived as isize - 1) as usize;
        &self.buf[idx - self.base]
    }

    fn evict_below(&mut self, keep_from: isize) {
        while (self.base as isize) < keep_from && self.buf.len() > 1 {
            self.buf.pop_front();
            self.base += 1;
        }
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.base = 0;
        self.arrived = 0;
    }
}

/// Append first (and optionally second) order differentials:
/// `delta_t = sum_k k*(x[t+k] - x[t-k]) / (2*sum_k k^2)`, each order computed
/// from the previous order's sequence with edge replication.
pub struct DeltaAppender {
    order: usize,
    half_window: usize,
    denom: f64,
    window: RowWindow,
    next_out: usize,
}

impl DeltaAppender {
    pub fn new(order: usize, half_window: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::config(format!("delta order must be 1 or 2, got {order}")));
        }
        if half_window == 0 {
            return Err(Error::config("delta half_window must be positive"));
        }
        let denom = 2.0 * (1..=half_window).map(|k| (k * k) as f64).sum::<f64>();
        Ok(DeltaAppender {
            order,
            half_window,
            denom,
            window: RowWindow::new(),
            next_out: 0,
        })
    }

    fn lookahead(&self) -> usize {
        self.order * self.half_window
    }

    fn first_delta(&self, t: isize) -> Vec<f64> {
        let dims = self.window.get_clamped(t).len();
        let mut d = vec![0.0; dims];
        for k in 1..=self.half_window as isize {
            let fwd = self.window.get_clamped(t + k);
            let bwd = self.window.get_clamped(t - k);
            for (i, slot) in d.iter_mut().enumerate() {
                *slot += k as f64 * (fwd[i] - bwd[i]);
            }
        }
        for slot in &mut d {
            *slot /= self.denom;
        }
        d
    }

    fn emit_row(&self, t: isize) -> Vec<f64> {
        let mut out = self.window.get_clamped(t).to_vec();
        let d1 = self.first_delta(t);
        out.extend_from_slice(&d1);
        if self.order == 2 {
            // Second differential over the first-differential sequence, with
            // indices clamped to the rows that exist.
            let dims = d1.len();
            let hi = self.window.arrived as isize - 1;
            let mut d2 = vec![0.0; dims];
            for k in 1..=self.half_window as isize {
                let fwd = self.first_delta((t + k).clamp(0, hi));
                let bwd = self.first_delta((t - k).clamp(0, hi));
                for (i, slot) in d2.iter_mut().enumerate() {
                    *slot += k as f64 * (fwd[i] - bwd[i]);
                }
            }
            for slot in &mut d2 {
                *slot /= self.denom;
            }
            out.extend_from_slice(&d2);
        }
        out
    }
}

impl FeatureOp for DeltaAppender {
    fn name(&self) -> &'static str {
        "deltas"
    }

    fn out_dims(&self, in_dims: usize) -> usize {
        in_dims * (self.order + 1)
    }

    fn push(&mut self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.window.push(row.to_vec());
        let mut out = Vec::new();
        while self.next_out + self.lookahead() < self.window.arrived {
            out.push(self.emit_row(self.next_out as isize));
            self.next_out += 1;
            self.window
                .evict_below(self.next_out as isize - self.lookahead() as isize);
        }
        Ok(out)
    }

    fn flush(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        while self.next_out < self.window.arrived {
            out.push(self.emit_row(self.next_out as isize));
            self.next_out += 1;
        }
        self.window.reset();
        self.next_out = 0;
        Ok(out)
    }
}

/// Frame splicing: row t becomes the concatenation of rows t-left..t+right,
/// boundary rows replicated.
pub struct Splicer {
    left: usize,
    right: usize,
    window: RowWindow,
    next_out: usize,
}

impl Splicer {
    pub fn new(left: usize, right: usize) -> Self {
        Splicer {
            left,
            right,
            window: RowWindow::new(),
            next_out: 0,
        }
    }

    fn emit_row(&self, t: isize) -> Vec<f64> {
        let mut out = Vec::new();
        for off in -(self.left as isize)..=(self.right as isize) {
            out.extend_from_slice(self.window.get_clamped(t + off));
        }
        out
    }
}

impl FeatureOp for Splicer {
    fn name(&self) -> &'static str {
        "splice"
    }

    fn out_dims(&self, in_dims: usize) -> usize {
        in_dims * (self.left + self.right + 1)
    }

    fn push(&mut self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.window.push(row.to_vec());
        let mut out = Vec::new();
        while self.next_out + self.right < self.window.arrived {
            out.push(self.emit_row(self.next_out as isize));
            self.next_out += 1;
            self.window
                .evict_below(self.next_out as isize - self.left as isize);
        }
        Ok(out)
    }

    fn flush(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        while self.next_out < self.window.arrived {
            out.push(self.emit_row(self.next_out as isize));
            self.next_out += 1;
        }
        self.window.reset();
        self.next_out = 0;
        Ok(out)
    }
}

/// Floor for the standard deviation in variance normalization.
pub const STD_FLOOR: f64 = 1e-8;

/// Causal sliding-window mean (and optionally variance) normalization: each
/// row is normalized by statistics over the trailing `window` rows ending at
/// the current row, so the operator adds no look-ahead latency. The window
/// keeps filling across segment boundaries: there is no look-ahead to drain
/// and the trailing statistics stay warm for the next segment.
pub struct SlidingCmvn {
    window: usize,
    normalize_variance: bool,
    buf: VecDeque<Vec<f64>>,
}

impl SlidingCmvn {
    pub fn new(window: usize, normalize_variance: bool) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("[cmvn] window must be positive"));
        }
        Ok(SlidingCmvn {
            window,
            normalize_variance,
            buf: VecDeque::new(),
        })
    }
}

impl FeatureOp for SlidingCmvn {
    fn name(&self) -> &'static str {
        "cmvn"
    }

    fn out_dims(&self, in_dims: usize) -> usize {
        in_dims
    }

    fn push(&mut self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.buf.push_back(row.to_vec());
        if self.buf.len() > self.window {
            self.buf.pop_front();
        }
        let n = self.buf.len() as f64;
        let dims = row.len();
        let mut mean = vec![0.0; dims];
        for r in &self.buf {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut out = Vec::with_capacity(dims);
        if self.normalize_variance {
            let mut var = vec![0.0; dims];
            for r in &self.buf {
                for (s, (v, m)) in var.iter_mut().zip(r.iter().zip(&mean)) {
                    let d = v - m;
                    *s += d * d;
                }
            }
            for (i, &x) in row.iter().enumerate() {
                let sd = (var[i] / n).max(0.0).sqrt().max(STD_FLOOR);
                out.push((x - mean[i]) / sd);
            }
        } else {
            for (i, &x) in row.iter().enumerate() {
                out.push(x - mean[i]);
            }
        }
        Ok(vec![out])
    }

    fn flush(&mut self) -> Result<Vec<Vec<f64>>> {
        Ok(Vec::new())
    }
}

/// Precomputed affine feature transform (e.g. LDA+MLLT loaded from file).
#[derive(Debug, Clone)]
pub struct AffineTransform {
    weights: Matrix,
    bias: Option<Vec<f64>>,
}

impl AffineTransform {
    pub fn new(weights: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(Error::DimMismatch(format!(
                    "bias of {} values does not match {} output dims",
                    b.len(),
                    weights.rows()
                )));
            }
        }
        if !weights.all_finite() {
            return Err(Error::format("transform matrix contains non-finite values"));
        }
        Ok(AffineTransform { weights, bias })
    }

    pub fn identity(dims: usize) -> Self {
        let mut m = Matrix::zeros(dims, dims);
        for i in 0..dims {
            m.row_mut(i)[i] = 1.0;
        }
        AffineTransform {
            weights: m,
            bias: None,
        }
    }

    pub fn in_dims(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dims(&self) -> usize {
        self.weights.rows()
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dims() {
            return Err(Error::DimMismatch(format!(
                "transform expects {} input dims, row has {}",
                self.in_dims(),
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(self.out_dims());
        for r in 0..self.out_dims() {
            let mut acc = self.bias.as_ref().map_or(0.0, |b| b[r]);
            for (w, v) in self.weights.row(r).iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn apply(&self, feats: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut data = Matrix::with_cols(self.out_dims());
        for r in 0..feats.data.rows() {
            data.push_row(&self.apply_row(feats.data.row(r))?);
        }
        Ok(FeatureMatrix {
            data,
            first_frame_index: feats.first_frame_index,
        })
    }
}

pub struct AffineOp {
    transform: AffineTransform,
}

impl AffineOp {
    pub fn new(transform: AffineTransform) -> Self {
        AffineOp { transform }
    }
}

impl FeatureOp for AffineOp {
    fn name(&self) -> &'static str {
        "transform"
    }

    fn out_dims(&self, _in_dims: usize) -> usize {
        self.transform.out_dims()
    }

    fn push(&mut self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![self.transform.apply_row(row)?])
    }

    fn flush(&mut self) -> Result<Vec<Vec<f64>>> {
        Ok(Vec::new())
    }
}

/// Row-wise concatenation of feature streams covering identical frames.
pub fn concat_streams(blocks: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::DimMismatch("concat of zero streams".into()))?;
    for b in blocks {
        if b.first_frame_index != first.first_frame_index || b.frames() != first.frames() {
            return Err(Error::DimMismatch(format!(
                "streams cover different frames: [{}..{}) vs [{}..{})",
                first.first_frame_index,
                first.first_frame_index + first.frames() as u64,
                b.first_frame_index,
                b.first_frame_index + b.frames() as u64
            )));
        }
    }
    let parts: Vec<&Matrix> = blocks.iter().map(|b| &b.data).collect();
    Ok(FeatureMatrix {
        data: Matrix::hconcat(&parts)?,
        first_frame_index: first.first_frame_index,
    })
}
