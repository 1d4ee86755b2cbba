//! The Clever-Hans edge-lookup baseline and a teacher-forced evaluator.
//!
//! Given the true target prefix, every position after the leading node is a
//! deterministic edge lookup, so a predictor that only knows the graph gets all of
//! them right and guesses the leading node. Its sequence accuracy is therefore its
//! leading-node accuracy, `1/D` in expectation.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::graph::{NodeId, PathStarGraph};
use crate::tokenizer::{TargetVariant, TokenizedSample};

/// Successor and predecessor tables of a path-star graph, edges pointing away from
/// the start.
#[derive(Debug, Clone)]
pub struct EdgeLookup {
    start: NodeId,
    leading: Vec<NodeId>,
    next: HashMap<NodeId, NodeId>,
    prev: HashMap<NodeId, NodeId>,
}

impl EdgeLookup {
    pub fn new(graph: &PathStarGraph) -> Self {
        let edges = graph.edges();
        Self {
            start: graph.start(),
            leading: graph.leading_nodes(),
            next: edges.iter().filter(|&&(u, _)| u != graph.start()).copied().collect(),
            prev: edges.iter().map(|&(u, v)| (v, u)).collect(),
        }
    }

    /// The unique node after `node`, walking away from the start.
    pub fn successor(&self, node: NodeId) -> Option<NodeId> {
        self.next.get(&node).copied()
    }

    pub fn predecessor(&self, node: NodeId) -> Option<NodeId> {
        self.prev.get(&node).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// Forward targets `s l ... t`. With `final_target`, position `M` is answered
    /// with `t` from the query instead of an edge lookup.
    CleverHans { final_target: bool },
    /// Reversed targets `t ... l s`, walked by predecessor lookup.
    Reversed,
    /// The single-token target `l_t`.
    LeadingOnly,
}

impl Predictor {
    pub fn for_variant(variant: TargetVariant) -> Self {
        match variant {
            TargetVariant::FullForward => Predictor::CleverHans { final_target: false },
            TargetVariant::Reversed => Predictor::Reversed,
            TargetVariant::LeadingOnly => Predictor::LeadingOnly,
        }
    }

    /// Predicts the next target token from the true `prefix` of the target region.
    /// `None` when the prefix walks off the graph.
    pub fn predict<R: Rng + ?Sized>(
        self,
        lookup: &EdgeLookup,
        target: NodeId,
        arm_len: usize,
        prefix: &[NodeId],
        rng: &mut R,
    ) -> Option<NodeId> {
        match self {
            Predictor::CleverHans { final_target } => chc_predict(lookup, target, arm_len, final_target, prefix, rng),
            Predictor::Reversed => chc_predict_reversed(lookup, target, prefix),
            Predictor::LeadingOnly => guess_leading(lookup, rng),
        }
    }
}

fn guess_leading<R: Rng + ?Sized>(lookup: &EdgeLookup, rng: &mut R) -> Option<NodeId> {
    lookup.leading.choose(rng).copied()
}

/// Forward edge-lookup cheat: `s`, then a uniform guess over the leading nodes,
/// then successors of the previous true token.
pub fn chc_predict<R: Rng + ?Sized>(
    lookup: &EdgeLookup,
    target: NodeId,
    arm_len: usize,
    final_target: bool,
    prefix: &[NodeId],
    rng: &mut R,
) -> Option<NodeId> {
    match prefix.len() {
        0 => Some(lookup.start),
        1 => guess_leading(lookup, rng),
        k if final_target && k + 1 == arm_len => Some(target),
        _ => lookup.successor(*prefix.last()?),
    }
}

/// Reversed targets need no guess: `t` is given and every predecessor is unique.
pub fn chc_predict_reversed(lookup: &EdgeLookup, target: NodeId, prefix: &[NodeId]) -> Option<NodeId> {
    match prefix.last() {
        None => Some(target),
        Some(&node) => lookup.predecessor(node),
    }
}

/// Per-position and whole-sequence accuracy of a teacher-forced evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionReport {
    /// Correct predictions at each target position.
    pub position_correct: Vec<usize>,
    /// Samples whose every position was predicted correctly.
    pub sequence_correct: usize,
    pub sample_count: usize,
}

impl PositionReport {
    fn empty(positions: usize) -> Self {
        Self { position_correct: vec![0; positions], sequence_correct: 0, sample_count: 0 }
    }

    fn merge(mut self, other: Self) -> Self {
        if self.position_correct.len() < other.position_correct.len() {
            self.position_correct.resize(other.position_correct.len(), 0);
        }
        for (a, b) in self.position_correct.iter_mut().zip(&other.position_correct) {
            *a += b;
        }
        self.sequence_correct += other.sequence_correct;
        self.sample_count += other.sample_count;
        self
    }

    pub fn position_accuracy(&self) -> Vec<f64> {
        self.position_correct.iter().map(|&c| ratio(c, self.sample_count)).collect()
    }

    pub fn sequence_accuracy(&self) -> f64 {
        ratio(self.sequence_correct, self.sample_count)
    }

    /// `key=value` lines, positions numbered from 1.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("samples={}\nsequence_accuracy={:.6}\n", self.sample_count, self.sequence_accuracy());
        for (i, acc) in self.position_accuracy().iter().enumerate() {
            let _ = writeln!(out, "position_{}_accuracy={acc:.6}", i + 1);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("position  correct  accuracy\n");
        for (i, (&c, acc)) in self.position_correct.iter().zip(self.position_accuracy()).enumerate() {
            let _ = writeln!(out, "{:>8}  {c:>7}  {acc:.4}", i + 1);
        }
        let _ = writeln!(out, "{:>8}  {:>7}  {:.4}", "sequence", self.sequence_correct, self.sequence_accuracy());
        out
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Scores `predictor` on every sample, conditioning each position on the true
/// prefix. Sample `i` draws from its own ChaCha stream, so the result does not
/// depend on thread count.
pub fn teacher_forced_eval(predictor: Predictor, samples: &[TokenizedSample], seed: u64) -> PositionReport {
    let positions = samples.iter().map(|s| s.target_tokens().len()).max().unwrap_or(0);
    samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            score_sample(predictor, sample, positions, &mut rng)
        })
        .reduce(|| PositionReport::empty(positions), PositionReport::merge)
}

fn score_sample<R: Rng + ?Sized>(
    predictor: Predictor,
    sample: &TokenizedSample,
    positions: usize,
    rng: &mut R,
) -> PositionReport {
    let graph = sample.instance.graph();
    let lookup = EdgeLookup::new(graph);
    let truth = sample.target_tokens();
    let mut report = PositionReport::empty(positions);
    let mut all = true;
    for k in 0..truth.len() {
        let hit =
            predictor.predict(&lookup, sample.instance.target(), graph.arm_len(), &truth[..k], rng) == Some(truth[k]);
        report.position_correct[k] += usize::from(hit);
        all &= hit;
    }
    report.sequence_correct = usize::from(all);
    report.sample_count = 1;
    report
}
