//! Weighted finite-state transducer over the tropical semiring, with the
//! AT&T-style text format.
//!
//! Input label 0 is epsilon (non-emitting); input label k >= 1 consumes one
//! frame and indexes scorer column k-1. Output label 0 is epsilon; output
//! label w >= 1 indexes the word table.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type StateId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub to: StateId,
    pub ilabel: u32,
    pub olabel: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wfst {
    start: StateId,
    arcs: Vec<Vec<Transition>>,
    finals: Vec<Option<f64>>,
}

impl Wfst {
    pub fn new(start: StateId, n_states: usize) -> Self {
        Wfst {
            start,
            arcs: vec![Vec::new(); n_states],
            finals: vec![None; n_states],
        }
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn n_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self, s: StateId) -> &[Transition] {
        &self.arcs[s as usize]
    }

    pub fn final_weight(&self, s: StateId) -> Option<f64> {
        self.finals[s as usize]
    }

    pub fn add_arc(&mut self, from: StateId, arc: Transition) {
        self.grow(from.max(arc.to));
        self.arcs[from as usize].push(arc);
    }

    pub fn set_final(&mut self, s: StateId, weight: f64) {
        self.grow(s);
        self.finals[s as usize] = Some(weight);
    }

    fn grow(&mut self, s: StateId) {
        let need = s as usize + 1;
        if self.arcs.len() < need {
            self.arcs.resize(need, Vec::new());
            self.finals.resize(need, None);
        }
    }

    /// Largest emitting input label; scorer rows must cover it.
    pub fn max_ilabel(&self) -> u32 {
        self.arcs
            .iter()
            .flatten()
            .map(|a| a.ilabel)
            .max()
            .unwrap_or(0)
    }

    pub fn states_reachable_from_start(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_states()];
        let mut queue = VecDeque::new();
        if (self.start as usize) < self.n_states() {
            seen[self.start as usize] = true;
            queue.push_back(self.start);
        }
        while let Some(s) = queue.pop_front() {
            for arc in &self.arcs[s as usize] {
                if !seen[arc.to as usize] {
                    seen[arc.to as usize] = true;
                    queue.push_back(arc.to);
                }
            }
        }
        seen
    }

    /// Graph-level invariants. Hard failures: no reachable final state, or an
    /// epsilon cycle with negative total cost (it would break closure).
    /// Soft findings come back as warnings: final states the start cannot
    /// reach, and dead-end states where tokens can only die.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !self.finals.iter().any(|f| f.is_some()) {
            return Err(Error::format("graph has no final state"));
        }
        let reachable = self.states_reachable_from_start();
        let mut any_reachable_final = false;
        for (s, f) in self.finals.iter().enumerate() {
            if f.is_some() {
                if reachable[s] {
                    any_reachable_final = true;
                } else {
                    warnings.push(format!("final state {s} is unreachable from the start"));
                }
            }
        }
        if !any_reachable_final {
            return Err(Error::format(
                "no final state is reachable from the start state",
            ));
        }
        for (s, arcs) in self.arcs.iter().enumerate() {
            if arcs.is_empty() && self.finals[s].is_none() && reachable[s] {
                warnings.push(format!("state {s} is a dead end (no arcs, not final)"));
            }
        }
        // Bellman-Ford over the epsilon subgraph from a virtual all-states
        // source; any further relaxation after n rounds is a negative cycle.
        let n = self.n_states();
        let mut dist = vec![0.0f64; n];
        for round in 0..=n {
            let mut improved = false;
            for (u, arcs) in self.arcs.iter().enumerate() {
                for arc in arcs {
                    if arc.ilabel == 0 {
                        let cand = dist[u] + arc.weight;
                        if cand < dist[arc.to as usize] {
                            dist[arc.to as usize] = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
            if round == n {
                return Err(Error::format(
                    "graph has an epsilon cycle with negative total cost",
                ));
            }
        }
        Ok(warnings)
    }

    /// Parse the text format: arc lines `src dst ilabel olabel weight`,
    /// final lines `state [weight]`. The first line's first field is the
    /// start state.
    pub fn parse_text<R: BufRead>(reader: R) -> Result<(Wfst, Vec<String>)> {
        let mut start: Option<StateId> = None;
        let mut graph = Wfst::new(0, 0);
        for (ln, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let num = |tok: &str, what: &str| -> Result<f64> {
                tok.parse::<f64>().map_err(|_| {
                    Error::format(format!("line {}: bad {what} '{tok}'", ln + 1))
                })
            };
            let id = |tok: &str, what: &str| -> Result<StateId> {
                tok.parse::<StateId>().map_err(|_| {
                    Error::format(format!("line {}: bad {what} '{tok}'", ln + 1))
                })
            };
            match fields.len() {
                5 => {
                    let src = id(fields[0], "source state")?;
                    let arc = Transition {
                        to: id(fields[1], "destination state")?,
                        ilabel: id(fields[2], "input label")?,
                        olabel: id(fields[3], "output label")?,
                        weight: num(fields[4], "weight")?,
                    };
                    if start.is_none() {
                        start = Some(src);
                    }
                    graph.add_arc(src, arc);
                }
                2 => {
                    let s = id(fields[0], "final state")?;
                    let w = num(fields[1], "final weight")?;
                    if start.is_none() {
                        start = Some(s);
                    }
                    graph.set_final(s, w);
                }
                1 => {
                    let s = id(fields[0], "final state")?;
                    if start.is_none() {
                        start = Some(s);
                    }
                    graph.set_final(s, 0.0);
                }
                n => {
                    return Err(Error::format(format!(
                        "line {}: expected 5 fields (arc) or 1-2 fields (final), got {n}",
                        ln + 1
                    )));
                }
            }
        }
        let start = start.ok_or_else(|| Error::format("empty graph file"))?;
        graph.start = start;
        graph.grow(start);
        let warnings = graph.validate()?;
        Ok((graph, warnings))
    }

    /// Dump the text format; the start state's lines come first so parsing
    /// the output reproduces the graph.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        let write_state = |w: &mut W, s: usize, this: &Wfst| -> Result<()> {
            for arc in &this.arcs[s] {
                writeln!(
                    w,
                    "{} {} {} {} {:?}",
                    s, arc.to, arc.ilabel, arc.olabel, arc.weight
                )
                .map_err(io)?;
            }
            Ok(())
        };
        let start = self.start as usize;
        // A start state with no arcs must still own the first line.
        if self.arcs[start].is_empty() {
            if let Some(fw) = self.finals[start] {
                writeln!(w, "{} {:?}", start, fw).map_err(io)?;
            }
        } else {
            write_state(&mut w, start, self)?;
        }
        for s in 0..self.n_states() {
            if s != start {
                write_state(&mut w, s, self)?;
            }
        }
        for (s, f) in self.finals.iter().enumerate() {
            if let Some(fw) = f {
                if s == start && self.arcs[start].is_empty() {
                    continue;
                }
                writeln!(w, "{s} {fw:?}").map_err(io)?;
            }
        }
        Ok(())
    }
}
