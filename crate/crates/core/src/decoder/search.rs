//! Frame-synchronous token-passing beam search.
//!
//! Per frame: every active token relaxes the emitting arcs of its state with
//! cost `arc.weight - acoustic_scale * loglik[ilabel-1]`, merges per state,
//! closes over epsilon arcs, then prunes by beam width and active-token cap.
//!
//! Each state retains up to `nbest` tokens with pairwise distinct word
//! prefixes (min cost per prefix). If a complete sequence ranks in the true
//! top K, at every state along its best path its prefix ranks in that
//! state's top K distinct prefixes, so finalization recovers the exact top-K
//! distinct word sequences when no pruning applies.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::packet::Hypothesis;

use super::wfst::{StateId, Wfst};

#[derive(Debug, Clone)]
pub struct DecoderConfig {
    /// Tokens costlier than the frame's best plus this width are dropped.
    pub beam: f64,
    /// Cap on live tokens per frame; the cheapest survive.
    pub max_active: usize,
    /// Multiplier on acoustic log-likelihoods.
    pub acoustic_scale: f64,
    /// Word-sequence alternatives retained per state and returned at
    /// finalization.
    pub nbest: usize,
    /// Cost added to hypotheses ending outside a final state. With the
    /// infinite default they are suppressed whenever any final-state token
    /// survives, and returned unpenalized (flagged) otherwise.
    pub non_final_cost: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam: 16.0,
            max_active: 7000,
            acoustic_scale: 0.1,
            nbest: 10,
            non_final_cost: f64::INFINITY,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beam > 0.0) {
            return Err(Error::config(format!("[decoder] beam must be positive, got {}", self.beam)));
        }
        if self.max_active == 0 {
            return Err(Error::config("[decoder] max_active must be at least 1"));
        }
        if self.nbest == 0 {
            return Err(Error::config("[decoder] nbest must be at least 1"));
        }
        Ok(())
    }
}

const NO_BP: u32 = u32::MAX;
const HASH_SEED: u64 = 0xcbf2_9ce4_8422_2325;

fn mix_hash(h: u64, olabel: u32) -> u64 {
    if olabel == 0 {
        return h;
    }
    // splitmix64 step over the running hash xor the label.
    let mut z = h ^ ((olabel as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct BackEntry {
    pred: u32,
    olabel: u32,
}

#[derive(Debug, Clone, Copy)]
struct Tok {
    cost: f64,
    bp: u32,
    hash: u64,
}

/// Merge a candidate into a state's token list: one token per distinct word
/// prefix (identified by hash), min cost wins, list capped at `k` cheapest.
/// Ties keep the incumbent, so earlier (lower state id, earlier arc) wins.
/// Returns whether the list changed; `make_bp` runs only on acceptance.
fn merge_token(
    list: &mut Vec<Tok>,
    cost: f64,
    hash: u64,
    k: usize,
    make_bp: impl FnOnce() -> u32,
) -> bool {
    if let Some(i) = list.iter().position(|t| t.hash == hash) {
        if cost < list[i].cost {
            list[i] = Tok {
                cost,
                bp: make_bp(),
                hash,
            };
            list.sort_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap());
            return true;
        }
        return false;
    }
    if list.len() < k {
        let tok = Tok {
            cost,
            bp: make_bp(),
            hash,
        };
        let at = list.partition_point(|t| t.cost <= cost);
        list.insert(at, tok);
        return true;
    }
    if cost < list.last().map_or(f64::INFINITY, |t| t.cost) {
        list.pop();
        let tok = Tok {
            cost,
            bp: make_bp(),
            hash,
        };
        let at = list.partition_point(|t| t.cost <= cost);
        list.insert(at, tok);
        return true;
    }
    false
}

pub struct TokenDecoder {
    graph: Arc<Wfst>,
    cfg: DecoderConfig,
    arena: Vec<BackEntry>,
    active: BTreeMap<StateId, Vec<Tok>>,
    frames: u64,
}

impl TokenDecoder {
    pub fn new(graph: Arc<Wfst>, cfg: DecoderConfig) -> Result<Self> {
        cfg.validate()?;
        let mut dec = TokenDecoder {
            graph,
            cfg,
            arena: Vec::new(),
            active: BTreeMap::new(),
            frames: 0,
        };
        dec.reset();
        Ok(dec)
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Wfst {
        &self.graph
    }

    /// Frames consumed since the last reset.
    pub fn frames_decoded(&self) -> u64 {
        self.frames
    }

    pub fn has_tokens(&self) -> bool {
        !self.active.is_empty()
    }

    /// Live token count (diagnostics).
    pub fn n_active(&self) -> usize {
        self.active.values().map(|v| v.len()).sum()
    }

    /// Single zero-cost token at the start state, epsilon-closed.
    pub fn reset(&mut self) {
        self.arena.clear();
        self.active.clear();
        self.active.insert(
            self.graph.start(),
            vec![Tok {
                cost: 0.0,
                bp: NO_BP,
                hash: HASH_SEED,
            }],
        );
        self.epsilon_closure();
        self.frames = 0;
    }

    fn push_bp(arena: &mut Vec<BackEntry>, pred: u32, olabel: u32) -> u32 {
        arena.push(BackEntry { pred, olabel });
        (arena.len() - 1) as u32
    }

    fn epsilon_closure(&mut self) {
        let mut queue: VecDeque<StateId> = self.active.keys().copied().collect();
        let mut queued: BTreeSet<StateId> = queue.iter().copied().collect();
        let k = self.cfg.nbest;
        while let Some(s) = queue.pop_front() {
            queued.remove(&s);
            let toks = match self.active.get(&s) {
                Some(t) => t.clone(),
                None => continue,
            };
            for arc in self.graph.arcs(s) {
                if arc.ilabel != 0 {
                    continue;
                }
                for tok in &toks {
                    let cost = tok.cost + arc.weight;
                    let hash = mix_hash(tok.hash, arc.olabel);
                    let arena = &mut self.arena;
                    let pred = tok.bp;
                    let olabel = arc.olabel;
                    let changed = merge_token(
                        self.active.entry(arc.to).or_default(),
                        cost,
                        hash,
                        k,
                        || Self::push_bp(arena, pred, olabel),
                    );
                    if changed && queued.insert(arc.to) {
                        queue.push_back(arc.to);
                    }
                }
            }
        }
    }

    /// Consume one log-likelihood row.
    pub fn advance(&mut self, loglik_row: &[f64]) -> Result<()> {
        let max_ilabel = self.graph.max_ilabel() as usize;
        if loglik_row.len() < max_ilabel {
            return Err(Error::DecodeFailure(format!(
                "log-likelihood row has {} pdfs but the graph consumes label {max_ilabel}",
                loglik_row.len()
            )));
        }
        let k = self.cfg.nbest;
        let scale = self.cfg.acoustic_scale;
        let mut next: BTreeMap<StateId, Vec<Tok>> = BTreeMap::new();
        for (&s, toks) in &self.active {
            for arc in self.graph.arcs(s) {
                if arc.ilabel == 0 {
                    continue;
                }
                let step = arc.weight - scale * loglik_row[(arc.ilabel - 1) as usize];
                for tok in toks {
                    let cost = tok.cost + step;
                    let hash = mix_hash(tok.hash, arc.olabel);
                    let arena = &mut self.arena;
                    let pred = tok.bp;
                    let olabel = arc.olabel;
                    merge_token(next.entry(arc.to).or_default(), cost, hash, k, || {
                        Self::push_bp(arena, pred, olabel)
                    });
                }
            }
        }
        self.active = next;
        self.epsilon_closure();
        self.prune();
        self.frames += 1;
        Ok(())
    }

    fn prune(&mut self) {
        let best = self
            .active
            .values()
            .flatten()
            .map(|t| t.cost)
            .fold(f64::INFINITY, f64::min);
        if best.is_infinite() {
            return;
        }
        let cutoff = best + self.cfg.beam;
        for toks in self.active.values_mut() {
            toks.retain(|t| t.cost <= cutoff);
        }
        self.active.retain(|_, toks| !toks.is_empty());

        let total: usize = self.active.values().map(|v| v.len()).sum();
        if total > self.cfg.max_active {
            let mut all: Vec<(f64, StateId, usize)> = Vec::with_capacity(total);
            for (&s, toks) in &self.active {
                for (i, t) in toks.iter().enumerate() {
                    all.push((t.cost, s, i));
                }
            }
            all.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            all.truncate(self.cfg.max_active);
            let mut keep: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
            for (_, s, i) in all {
                keep.entry(s).or_default().push(i);
            }
            let old = std::mem::take(&mut self.active);
            for (s, toks) in old {
                if let Some(idxs) = keep.get(&s) {
                    let kept: Vec<Tok> = idxs.iter().map(|&i| toks[i]).collect();
                    self.active.insert(s, kept);
                }
            }
        }
    }

    fn trace_words(&self, mut bp: u32) -> Vec<u32> {
        let mut words = Vec::new();
        while bp != NO_BP {
            let e = self.arena[bp as usize];
            if e.olabel != 0 {
                words.push(e.olabel);
            }
            bp = e.pred;
        }
        words.reverse();
        words
    }

    /// Best in-flight hypothesis, final weights ignored. Non-destructive.
    pub fn partial_best(&self) -> Result<Hypothesis> {
        let mut best: Option<(f64, StateId, &Tok)> = None;
        for (&s, toks) in &self.active {
            if let Some(t) = toks.first() {
                let better = match &best {
                    None => true,
                    Some((c, bs, _)) => t.cost < *c || (t.cost == *c && s < *bs),
                };
                if better {
                    best = Some((t.cost, s, t));
                }
            }
        }
        let (cost, _, tok) =
            best.ok_or_else(|| Error::DecodeFailure("no active tokens (all pruned)".into()))?;
        Ok(Hypothesis {
            words: self.trace_words(tok.bp),
            cost,
            is_final: false,
        })
    }

    /// Finalize the current segment: add final weights, collect up to `k`
    /// distinct word sequences by ascending cost, then reset for the next
    /// segment.
    pub fn finalize_nbest(&mut self, k: usize) -> Result<Vec<Hypothesis>> {
        if self.active.is_empty() {
            return Err(Error::DecodeFailure(
                "no active tokens at finalization".into(),
            ));
        }
        fn merge(
            candidates: &mut BTreeMap<Vec<u32>, (f64, bool)>,
            words: Vec<u32>,
            cost: f64,
            is_final: bool,
        ) {
            candidates
                .entry(words)
                .and_modify(|slot| {
                    if cost < slot.0 {
                        *slot = (cost, is_final);
                    }
                })
                .or_insert((cost, is_final));
        }
        let mut candidates: BTreeMap<Vec<u32>, (f64, bool)> = BTreeMap::new();
        for (&s, toks) in &self.active {
            match self.graph.final_weight(s) {
                Some(fw) => {
                    for t in toks {
                        merge(&mut candidates, self.trace_words(t.bp), t.cost + fw, true);
                    }
                }
                None => {
                    if self.cfg.non_final_cost.is_finite() {
                        for t in toks {
                            merge(
                                &mut candidates,
                                self.trace_words(t.bp),
                                t.cost + self.cfg.non_final_cost,
                                false,
                            );
                        }
                    }
                }
            }
        }
        if candidates.is_empty() {
            // Truncated audio: nothing reached a final state. Degrade
            // gracefully with flagged, unpenalized hypotheses.
            for (&s, toks) in &self.active {
                if self.graph.final_weight(s).is_none() {
                    for t in toks {
                        merge(&mut candidates, self.trace_words(t.bp), t.cost, false);
                    }
                }
            }
        }
        let mut list: Vec<Hypothesis> = candidates
            .into_iter()
            .map(|(words, (cost, is_final))| Hypothesis {
                words,
                cost,
                is_final,
            })
            .collect();
        list.sort_by(|a, b| {
            a.cost
                .partial_cmp(&b.cost)
                .unwrap()
                .then_with(|| a.words.cmp(&b.words))
        });
        list.truncate(k);
        self.reset();
        Ok(list)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::wfst::Transition;

    fn arc(to: StateId, ilabel: u32, olabel: u32, weight: f64) -> Transition {
        Transition {
            to,
            ilabel,
            olabel,
            weight,
        }
    }

    fn cfg_wide() -> DecoderConfig {
        DecoderConfig {
            beam: f64::INFINITY,
            max_active: usize::MAX,
            acoustic_scale: 0.1,
            nbest: 10,
            ..DecoderConfig::default()
        }
    }

    /// 0 -(1:1, 0.5)-> 1, state 1 final.
    fn linear_graph() -> Arc<Wfst> {
        let mut g = Wfst::new(0, 2);
        g.add_arc(0, arc(1, 1, 1, 0.5));
        g.set_final(1, 0.0);
        Arc::new(g)
    }

    #[test]
    fn single_advance_cost() {
        let mut d = TokenDecoder::new(linear_graph(), cfg_wide()).unwrap();
        d.advance(&[-1.0]).unwrap();
        let h = d.partial_best().unwrap();
        // 0.5 - 0.1 * (-1) = 0.6
        assert!((h.cost - 0.6).abs() < 1e-12);
        assert_eq!(h.words, vec![1]);
    }

    #[test]
    fn beam_prunes_expensive_token() {
        let mut g = Wfst::new(0, 3);
        g.add_arc(0, arc(1, 1, 0, 2.0));
        g.add_arc(0, arc(2, 1, 0, 3.5));
        g.set_final(1, 0.0);
        g.set_final(2, 0.0);
        let cfg = DecoderConfig {
            beam: 1.0,
            acoustic_scale: 0.0,
            ..cfg_wide()
        };
        let mut d = TokenDecoder::new(Arc::new(g), cfg).unwrap();
        d.advance(&[0.0]).unwrap();
        assert_eq!(d.n_active(), 1, "token at cost 3.5 exceeds 2.0 + beam 1.0");
    }

    #[test]
    fn reset_is_idempotent_and_deterministic() {
        let mut d = TokenDecoder::new(linear_graph(), cfg_wide()).unwrap();
        d.advance(&[-0.5]).unwrap();
        d.reset();
        let first = {
            d.advance(&[-0.5]).unwrap();
            let h = d.partial_best().unwrap();
            (h.words.clone(), h.cost)
        };
        d.reset();
        d.reset();
        d.advance(&[-0.5]).unwrap();
        let h = d.partial_best().unwrap();
        assert_eq!((h.words, h.cost), first);
    }

    #[test]
    fn finalize_on_final_start_state() {
        let mut g = Wfst::new(0, 1);
        g.set_final(0, 0.75);
        g.add_arc(0, arc(0, 1, 0, 0.0));
        let mut d = TokenDecoder::new(Arc::new(g), cfg_wide()).unwrap();
        let hyps = d.finalize_nbest(5).unwrap();
        assert_eq!(hyps.len(), 1);
        assert!(hyps[0].words.is_empty());
        assert!((hyps[0].cost - 0.75).abs() < 1e-15);
        assert!(hyps[0].is_final);
    }

    #[test]
    fn partial_after_zero_frames_is_empty() {
        let d = TokenDecoder::new(linear_graph(), cfg_wide()).unwrap();
        let h = d.partial_best().unwrap();
        assert!(h.words.is_empty());
        assert_eq!(h.cost, 0.0);
    }

    #[test]
    fn deterministic_linear_sequence() {
        // 0 -1:7-> 1 -2:9-> 2 -1:4-> 3(final)
        let mut g = Wfst::new(0, 4);
        g.add_arc(0, arc(1, 1, 7, 0.1));
        g.add_arc(1, arc(2, 2, 9, 0.2));
        g.add_arc(2, arc(3, 1, 4, 0.3));
        g.set_final(3, 0.0);
        let mut d = TokenDecoder::new(Arc::new(g), cfg_wide()).unwrap();
        for _ in 0..3 {
            d.advance(&[-1.0, -2.0]).unwrap();
        }
        let hyps = d.finalize_nbest(3).unwrap();
        assert_eq!(hyps.len(), 1);
        assert_eq!(hyps[0].words, vec![7, 9, 4]);
    }

    #[test]
    fn two_parallel_paths_rank_by_cost() {
        // Two words over one frame: costs 1.0 and 1.3.
        let mut g = Wfst::new(0, 2);
        g.add_arc(0, arc(1, 1, 1, 1.0));
        g.add_arc(0, arc(1, 1, 2, 1.3));
        g.set_final(1, 0.0);
        let cfg = DecoderConfig {
            acoustic_scale: 0.0,
            ..cfg_wide()
        };
        let mut d = TokenDecoder::new(Arc::new(g), cfg).unwrap();
        d.advance(&[0.0]).unwrap();
        let hyps = d.finalize_nbest(2).unwrap();
        assert_eq!(hyps.len(), 2);
        assert_eq!(hyps[0].words, vec![1]);
        assert!((hyps[0].cost - 1.0).abs() < 1e-12);
        assert_eq!(hyps[1].words, vec![2]);
        assert!((hyps[1].cost - 1.3).abs() < 1e-12);
        // K beyond the distinct sequences returns everything, no padding.
        d.advance(&[0.0]).unwrap();
        let hyps = d.finalize_nbest(10).unwrap();
        assert_eq!(hyps.len(), 2);
    }

    #[test]
    fn non_final_tokens_flagged_when_nothing_is_final() {
        // One frame ends mid-word: only non-final states alive.
        let mut g = Wfst::new(0, 3);
        g.add_arc(0, arc(1, 1, 3, 0.5));
        g.add_arc(1, arc(2, 1, 0, 0.5));
        g.set_final(2, 0.0);
        let mut d = TokenDecoder::new(Arc::new(g), cfg_wide()).unwrap();
        d.advance(&[0.0]).unwrap();
        let hyps = d.finalize_nbest(3).unwrap();
        assert_eq!(hyps.len(), 1);
        assert!(!hyps[0].is_final);
        assert_eq!(hyps[0].words, vec![3]);
    }

    #[test]
    fn endpoint_segmentation_equals_independent_decodes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        // Word loop: 0 -1:1-> 1 -2:0-> 0, plus 0 -3:2-> 0. Final at 0.
        let mut g = Wfst::new(0, 2);
        g.add_arc(0, arc(1, 1, 1, 0.3));
        g.add_arc(1, arc(0, 2, 0, 0.2));
        g.add_arc(0, arc(0, 3, 2, 0.4));
        g.set_final(0, 0.1);
        let g = Arc::new(g);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(-4.0..0.0)).collect())
            .collect();
        let split = 6;

        let mut joint = TokenDecoder::new(Arc::clone(&g), cfg_wide()).unwrap();
        for row in &rows[..split] {
            joint.advance(row).unwrap();
        }
        let seg1 = joint.finalize_nbest(4).unwrap();
        for row in &rows[split..] {
            joint.advance(row).unwrap();
        }
        let seg2 = joint.finalize_nbest(4).unwrap();

        let mut fresh1 = TokenDecoder::new(Arc::clone(&g), cfg_wide()).unwrap();
        for row in &rows[..split] {
            fresh1.advance(row).unwrap();
        }
        let mut fresh2 = TokenDecoder::new(Arc::clone(&g), cfg_wide()).unwrap();
        for row in &rows[split..] {
            fresh2.advance(row).unwrap();
        }
        assert_eq!(seg1, fresh1.finalize_nbest(4).unwrap());
        assert_eq!(seg2, fresh2.finalize_nbest(4).unwrap());
    }

    #[test]
    fn short_loglik_row_is_an_error() {
        let mut d = TokenDecoder::new(linear_graph(), cfg_wide()).unwrap();
        assert!(d.advance(&[]).is_err());
    }

    #[test]
    fn dead_end_leads_to_decode_failure() {
        // State 1 has no arcs and is not final; two frames kill all tokens.
        let mut g = Wfst::new(0, 2);
        g.add_arc(0, arc(1, 1, 0, 0.0));
        g.set_final(0, 0.0);
        let mut d = TokenDecoder::new(Arc::new(g), cfg_wide()).unwrap();
        d.advance(&[0.0]).unwrap();
        d.advance(&[0.0]).unwrap();
        assert!(d.partial_best().is_err());
        assert!(d.finalize_nbest(1).is_err());
    }
}
