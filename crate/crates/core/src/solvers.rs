//! RASP programs that solve the path-star task on a serialized `[Q, G]` prefix.
//!
//! A program succeeds when its output sequence contains an edge-sized window
//! holding both the target `t` and its leading node `l_t`. Windows are the edge
//! slots of `G` (stride 3, or 4 with double markers) plus the window starting at
//! the `/` token of `Q`, which [`Solver::BackTarget`] uses as its scratch slot.
//!
//! Token encoding inside the interpreter: node `n` is `n + 1`, so every real node
//! is positive and `is_true` (`x > 0`) separates nodes from the negative
//! sentinels [`NULL_A`] and [`NULL_B`]. Special tokens follow the nodes.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{NodeId, TaskInstance};
use crate::rasp::{ExecutionTrace, Machine, Predicate, RaspError, Seq, Value};
use crate::tokenizer::{PermMode, QPosition, TokenizedSample};

pub const NULL_A: Value = -99;
pub const NULL_B: Value = -89;

const EQ: Predicate = Predicate::Equals;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("{solver} requires {requirement}")]
    Precondition { solver: Solver, requirement: &'static str },
    #[error(transparent)]
    Rasp(#[from] RaspError),
}

/// The tokenized `[Q, G]` prefix in interpreter encoding, BOS/EOS and target removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverInput {
    pub tokens: Seq,
    /// Position of the first edge token.
    pub g_start: usize,
    /// Position of the `/` token.
    pub q_start: usize,
    pub q_position: QPosition,
    pub perm_mode: PermMode,
    pub marker_count: usize,
    pub num_arms: usize,
    pub arm_len: usize,
    pub vocab_size: usize,
}

impl SolverInput {
    pub fn from_sample(sample: &TokenizedSample) -> Self {
        let offset = usize::from(sample.options.include_bos_eos);
        let prefix = &sample.tokens[offset..sample.prefix_len];
        let tokens = prefix.iter().map(|&t| Value::from(t) + 1).collect();
        let graph = sample.instance.graph();
        let (g_start, q_start) = match sample.options.q_position {
            QPosition::Start => (4, 0),
            QPosition::End => (0, prefix.len() - 4),
        };
        Self {
            tokens: Seq::new(tokens),
            g_start,
            q_start,
            q_position: sample.options.q_position,
            perm_mode: sample.options.perm_mode,
            marker_count: sample.options.edge_marker_count,
            num_arms: graph.num_arms(),
            arm_len: graph.arm_len(),
            vocab_size: graph.vocab_size(),
        }
    }

    pub fn encode_node(node: NodeId) -> Value {
        Value::from(node) + 1
    }

    pub fn stride(&self) -> usize {
        2 + self.marker_count
    }

    fn edge_count(&self) -> usize {
        self.num_arms * (self.arm_len - 1)
    }

    /// Start positions of every window checked by [`validate_output`].
    pub fn window_starts(&self) -> Vec<usize> {
        let mut starts: Vec<usize> = (0..self.edge_count()).map(|k| self.g_start + k * self.stride()).collect();
        starts.push(self.q_start);
        starts
    }
}

/// Position-derived helper lanes shared by the programs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lanes {
    pub idx: Seq,
    /// The input with `Q` replaced by [`NULL_A`].
    pub masked_x: Seq,
    /// Only the first node of every edge; [`NULL_A`] elsewhere.
    pub i_nodes: Seq,
    /// Only the second node of every edge; [`NULL_A`] elsewhere.
    pub j_nodes: Seq,
}

/// Builds `masked_x`, `i_nodes` and `j_nodes` from positions alone.
pub fn node_lanes(m: &mut Machine, input: &SolverInput) -> Result<Lanes, RaspError> {
    let seq = &input.tokens;
    let idx = m.indices(seq);
    let null = m.full(seq, NULL_A);
    let q0 = input.q_start as Value;
    let in_q = m.seq_map(&idx, &m.full(seq, q0), |p, q| Value::from(p >= q && p < q + 4))?;
    let masked_x = m.where_(&in_q, &null, seq)?;
    let rel = m.offset(&idx, -(input.g_start as Value));
    let stride = input.stride() as Value;
    let phase = m.seq_map(&rel, &m.full(seq, stride), Value::rem_euclid)?;
    let is_i = m.equals(&phase, &m.full(seq, 0))?;
    let is_j = m.equals(&phase, &m.full(seq, 1))?;
    let i_nodes = m.where_(&is_i, &masked_x, &null)?;
    let j_nodes = m.where_(&is_j, &masked_x, &null)?;
    Ok(Lanes { idx, masked_x, i_nodes, j_nodes })
}

/// True iff some window holds both `t` and `l_t`.
pub fn validate_output(state: &Seq, input: &SolverInput, instance: &TaskInstance) -> bool {
    !validity_windows(state, input, instance).is_empty()
}

/// Start positions of the windows that hold both `t` and `l_t`.
pub fn validity_windows(state: &Seq, input: &SolverInput, instance: &TaskInstance) -> Vec<usize> {
    let t = SolverInput::encode_node(instance.target());
    let lead = SolverInput::encode_node(instance.leading());
    let width = input.stride();
    input
        .window_starts()
        .into_iter()
        .filter(|&p| {
            let w = &state.values()[p..(p + width).min(state.len())];
            w.contains(&t) && w.contains(&lead)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    BackTarget,
    BackwardTargets,
    ForwardStart,
    LogDoubling,
    ArmsConstant,
    Causal,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::BackTarget,
        Solver::BackwardTargets,
        Solver::ForwardStart,
        Solver::LogDoubling,
        Solver::ArmsConstant,
        Solver::Causal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::BackTarget => "back_target",
            Solver::BackwardTargets => "backward_targets",
            Solver::ForwardStart => "forward_start",
            Solver::LogDoubling => "log_doubling",
            Solver::ArmsConstant => "arms_constant",
            Solver::Causal => "causal",
        }
    }

    pub fn marker_count(self) -> usize {
        if self == Solver::LogDoubling {
            2
        } else {
            1
        }
    }

    /// Hard requirements; inputs violating them are rejected.
    pub fn check(self, input: &SolverInput) -> Result<(), SolverError> {
        if input.marker_count != self.marker_count() {
            let requirement =
                if self.marker_count() == 2 { "two `|` markers per edge" } else { "one `|` marker per edge" };
            return Err(SolverError::Precondition { solver: self, requirement });
        }
        if self == Solver::Causal && input.q_position != QPosition::Start {
            return Err(SolverError::Precondition { solver: self, requirement: "Q before G" });
        }
        Ok(())
    }

    /// Whether the program is expected to succeed on every input with this
    /// serialization order. Only the constant-depth program depends on it.
    pub fn supports(self, perm_mode: PermMode) -> bool {
        self != Solver::ArmsConstant || perm_mode != PermMode::EdgeWise
    }

    /// Number of loop steps the program takes for arm length `m`.
    pub fn loop_iterations(self, arm_len: usize) -> usize {
        match self {
            Solver::BackTarget | Solver::BackwardTargets | Solver::ForwardStart => arm_len.saturating_sub(2),
            Solver::LogDoubling => doubling_steps(arm_len),
            Solver::ArmsConstant => 0,
            Solver::Causal => arm_len - 1,
        }
    }

    /// Runs the program on `input` and returns the final state with its trace.
    pub fn run(self, input: &SolverInput, config: SolverConfig) -> Result<SolverRun, SolverError> {
        self.check(input)?;
        let mut m = if config.audit_increments { Machine::new().with_increment_audit() } else { Machine::new() };
        let lanes = node_lanes(&mut m, input)?;
        let state = match self {
            Solver::BackTarget => back_target(&mut m, input, &lanes, config.debug_markers)?,
            Solver::BackwardTargets => backward_targets(&mut m, input, &lanes)?,
            Solver::ForwardStart => forward_start(&mut m, input, &lanes)?,
            Solver::LogDoubling => log_doubling(&mut m, input, &lanes, DoublingKeys::Fixed)?,
            Solver::ArmsConstant => arms_constant(&mut m, input, &lanes)?,
            Solver::Causal => causal(&mut m, input, &lanes, CausalVariant::FIXED)?,
        };
        Ok(SolverRun { state, loop_iterations: self.loop_iterations(input.arm_len), trace: m.into_trace() })
    }

    /// Runs the program on a tokenized sample and checks the result against its instance.
    pub fn solve(self, sample: &TokenizedSample) -> Result<SolverReport, SolverError> {
        self.solve_with(sample, SolverConfig::default())
    }

    pub fn solve_with(self, sample: &TokenizedSample, config: SolverConfig) -> Result<SolverReport, SolverError> {
        let input = SolverInput::from_sample(sample);
        let run = self.run(&input, config)?;
        let valid = validate_output(&run.state, &input, &sample.instance);
        Ok(SolverReport {
            kqv_count: run.trace.attention_ops(),
            valid,
            loop_iterations: run.loop_iterations,
            final_state: run.state,
            trace: run.trace,
        })
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Solver::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| format!("unknown solver `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverConfig {
    /// Write arm-position markers into the state (back_target only). Cosmetic.
    pub debug_markers: bool,
    /// Note positional offsets other than +/-1 in the trace.
    pub audit_increments: bool,
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub state: Seq,
    pub loop_iterations: usize,
    pub trace: ExecutionTrace,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub final_state: Seq,
    pub valid: bool,
    /// Attention-equivalent operations in the trace.
    pub kqv_count: usize,
    pub loop_iterations: usize,
    pub trace: ExecutionTrace,
}

/// `ceil(log2(m - 1))`, zero for `m <= 2`.
pub fn doubling_steps(arm_len: usize) -> usize {
    let span = arm_len.saturating_sub(1);
    if span <= 1 {
        0
    } else {
        (usize::BITS - (span - 1).leading_zeros()) as usize
    }
}

/// Broadcasts the token at a fixed position to every row.
fn read_at(m: &mut Machine, seq: &Seq, idx: &Seq, pos: usize, causal: bool) -> Result<Seq, RaspError> {
    // rows that cannot see `pos` get a default that matches no lane filler
    let at = m.full(seq, pos as Value);
    m.kqv(idx, &at, seq, EQ, NULL_B, causal)
}

/// Symbols written by the debug mode of [`back_target`]; never compared against.
fn arm_marker(input: &SolverInput, step: usize, connecting: bool) -> Value {
    (input.vocab_size + 10 + 2 * step + usize::from(connecting)) as Value
}

/// Walks `t` back one edge per step, keeping the walk state in the `/` slot.
fn back_target(m: &mut Machine, input: &SolverInput, lanes: &Lanes, debug: bool) -> Result<Seq, RaspError> {
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let seq = &input.tokens;
    let arm_len = input.arm_len;
    let scratch = input.q_start;
    let write_mask = m.equals(idx, &m.full(seq, scratch as Value))?;

    let t = read_at(m, seq, idx, input.q_start + 2, false)?;
    let target_idx = m.kqv(j_nodes, &t, idx, EQ, NULL_A, false)?;
    let mut cur_state = m.where_(&write_mask, &target_idx, seq)?;
    if arm_len == 2 {
        cur_state = m.where_(&write_mask, &t, &cur_state)?;
    }

    for step in 0..arm_len.saturating_sub(2) {
        if debug {
            let at = m.full(seq, cur_state[scratch]);
            let here = m.equals(idx, &at)?;
            cur_state = m.where_(&here, &m.full(seq, arm_marker(input, step, false)), &cur_state)?;
        }
        let masked = m.where_(&write_mask, &cur_state, &m.full(seq, NULL_A - 1))?;
        let cur_idx = m.offset(&masked, -1);
        if debug {
            let at = m.full(seq, cur_idx[scratch]);
            let here = m.equals(idx, &at)?;
            cur_state = m.where_(&here, &m.full(seq, arm_marker(input, step, true)), &cur_state)?;
        }
        let connecting_token = m.kqv(idx, &cur_idx, i_nodes, EQ, NULL_A, false)?;
        cur_state = m.where_(&write_mask, &connecting_token, &cur_state)?;
        if step + 3 < arm_len {
            let next_idx = m.kqv(j_nodes, &connecting_token, idx, EQ, NULL_A, false)?;
            cur_state = m.where_(&write_mask, &next_idx, &cur_state)?;
        }
    }
    Ok(cur_state)
}

struct Finals {
    is_final: Seq,
    final_nodes: Seq,
    final_idx: Seq,
    final_idx_slash: Seq,
    is_final_slash: Seq,
}

/// Final nodes occur exactly once in `masked_x`; marks them and the `|` after them.
fn find_finals(m: &mut Machine, seq: &Seq, lanes: &Lanes) -> Result<Finals, RaspError> {
    let Lanes { idx, masked_x, j_nodes, .. } = lanes;
    let null = m.full(seq, NULL_A);
    let same = m.select(masked_x, masked_x, EQ, false)?;
    let counts = m.sel_width(&same);
    let is_final = m.equals(&counts, &m.full(seq, 1))?;
    let final_nodes = m.where_(&is_final, j_nodes, &null)?;
    let final_idx = m.where_(&is_final, idx, &null)?;
    let next = m.offset(idx, 1);
    let final_idx_slash = m.where_(&is_final, &next, &null)?;
    let is_final_slash = m.kqv(&next, idx, &is_final, EQ, 0, false)?;
    Ok(Finals { is_final, final_nodes, final_idx, final_idx_slash, is_final_slash })
}

/// Walks every final node back to its leading node in parallel; the result lands in
/// the `|` slot of each arm's final edge.
fn backward_targets(m: &mut Machine, input: &SolverInput, lanes: &Lanes) -> Result<Seq, RaspError> {
    let seq = &input.tokens;
    let f = find_finals(m, seq, lanes)?;
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let mut connecting_nodes = m.kqv(&f.final_idx_slash, idx, &f.final_nodes, EQ, NULL_A, false)?;
    for _ in 0..input.arm_len.saturating_sub(2) {
        let connecting_idxs = m.kqv(j_nodes, &connecting_nodes, idx, EQ, NULL_A, false)?;
        let back = m.offset(&connecting_idxs, -1);
        connecting_nodes = m.kqv(idx, &back, i_nodes, EQ, NULL_A, false)?;
    }
    m.where_(&f.is_final_slash, &connecting_nodes, seq)
}

/// Walks every leading node out to its final node; the result overwrites the first
/// token of each start edge.
fn forward_start(m: &mut Machine, input: &SolverInput, lanes: &Lanes) -> Result<Seq, RaspError> {
    let seq = &input.tokens;
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let s = read_at(m, seq, idx, input.q_start + 1, false)?;
    let is_start = m.equals(i_nodes, &s)?;
    let start_idx = m.where_(&is_start, idx, &m.full(seq, NULL_A))?;
    let after_start = m.offset(&start_idx, 1);
    let leading_nodes = m.kqv(idx, &after_start, j_nodes, EQ, NULL_A, false)?;
    let mut connecting_nodes = leading_nodes;
    for _ in 0..input.arm_len.saturating_sub(2) {
        let connecting_idxs = m.kqv(i_nodes, &connecting_nodes, idx, EQ, NULL_A, false)?;
        let fwd = m.offset(&connecting_idxs, 1);
        connecting_nodes = m.kqv(idx, &fwd, j_nodes, EQ, NULL_A, false)?;
    }
    m.where_(&is_start, &connecting_nodes, seq)
}

/// Which lane a doubling step matches its pointer against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(not(test), allow(dead_code))]
enum DoublingKeys {
    /// The edge's own `j` (for `k1`) or `i` (for `k2`). Every key is unique, so
    /// each step is an exact pointer jump.
    Fixed,
    /// The other edge's current `k2` (for `k1`) or `k1` (for `k2`). Pointers that
    /// have already moved can match several edges with different values.
    Moving,
}

/// Pointer doubling over edges `(i, j, k1, k2)`: `k1` extends each edge towards the
/// start and `k2` towards the final node, doubling the span per step.
fn log_doubling(m: &mut Machine, input: &SolverInput, lanes: &Lanes, keys: DoublingKeys) -> Result<Seq, RaspError> {
    let seq = &input.tokens;
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let null_a = m.full(seq, NULL_A);

    let i_mask = m.not_equals(i_nodes, &null_a)?;
    let i_nodes_pos = m.where_(&i_mask, idx, &null_a)?;
    let j_mask = m.is_true(j_nodes, NULL_A);
    let j_nodes_pos = m.where_(&j_mask, idx, &null_a)?;
    let i_plus2 = m.offset(&i_nodes_pos, 2);
    let j_plus2 = m.offset(&j_nodes_pos, 2);
    let k1_nodes_pos = m.kqv(idx, &i_plus2, idx, EQ, NULL_B, false)?;
    let k2_nodes_pos = m.kqv(idx, &j_plus2, idx, EQ, NULL_A, false)?;
    let mut k1_nodes = m.kqv(&k1_nodes_pos, idx, i_nodes, EQ, NULL_B, false)?;
    let mut k2_nodes = m.kqv(&k2_nodes_pos, idx, j_nodes, EQ, NULL_A, false)?;

    let write_state = |m: &mut Machine, k1: &Seq, k2: &Seq| -> Result<Seq, RaspError> {
        let has_k1 = m.is_true(k1, 0);
        let s = m.where_(&has_k1, k1, seq)?;
        let has_k2 = m.is_true(k2, 0);
        m.where_(&has_k2, k2, &s)
    };
    let mut cur_state = write_state(m, &k1_nodes, &k2_nodes)?;

    for _ in 0..doubling_steps(input.arm_len) {
        // this k1 == other edge's end: take the other k1
        let (keys1, step1) = match keys {
            DoublingKeys::Fixed => (j_nodes, 1),
            DoublingKeys::Moving => (&k2_nodes, -1),
        };
        let to_k1 = m.offset(idx, step1);
        let connecting_k1_pos = m.kqv(keys1, &k1_nodes, &to_k1, EQ, NULL_B, false)?;
        let new_k1 = m.kqv(idx, &connecting_k1_pos, &k1_nodes, EQ, NULL_B, false)?;
        let found = m.is_true(&new_k1, 0);
        k1_nodes = m.where_(&found, &new_k1, &k1_nodes)?;

        // this k2 == other edge's start: take the other k2
        let (keys2, step2) = match keys {
            DoublingKeys::Fixed => (i_nodes, 3),
            DoublingKeys::Moving => (&k1_nodes, 1),
        };
        let to_k2 = m.offset(idx, step2);
        let connecting_k2_pos = m.kqv(keys2, &k2_nodes, &to_k2, EQ, NULL_A, false)?;
        let new_k2 = m.kqv(idx, &connecting_k2_pos, &k2_nodes, EQ, NULL_A, false)?;
        let found = m.is_true(&new_k2, 0);
        k2_nodes = m.where_(&found, &new_k2, &k2_nodes)?;

        cur_state = write_state(m, &k1_nodes, &k2_nodes)?;
    }

    // one extra hop for arm lengths that are not a power of two: j == k1 elsewhere, take that k2
    let next = m.offset(idx, 1);
    let conn = m.kqv(&k1_nodes, j_nodes, &next, EQ, NULL_A, false)?;
    let new_j = m.kqv(idx, &conn, &k2_nodes, EQ, NULL_A, false)?;
    let found = m.is_true(&new_j, 0);
    let j_nodes = m.where_(&found, &new_j, j_nodes)?;
    let at_j = m.is_true(&j_nodes_pos, 0);
    m.where_(&at_j, &j_nodes, &cur_state)
}

/// Jumps from each final edge back a fixed distance to the arm's leading node.
/// Correct only when arms are serialized contiguously.
fn arms_constant(m: &mut Machine, input: &SolverInput, lanes: &Lanes) -> Result<Seq, RaspError> {
    let seq = &input.tokens;
    let f = find_finals(m, seq, lanes)?;
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let stride = input.stride() as Value;
    let arm_len = input.arm_len as Value;
    let leading_nodes = if arm_len >= 3 {
        let leading_idx = m.offset(&f.final_idx, -((arm_len - 3) * stride + 1));
        m.kqv(idx, &leading_idx, i_nodes, EQ, NULL_A, false)?
    } else {
        // a one-node arm: the final node is its own leading node
        m.kqv(idx, &f.final_idx, j_nodes, EQ, NULL_A, false)?
    };
    let leading_nodes = m.kqv(&f.final_idx_slash, idx, &leading_nodes, EQ, NULL_A, false)?;
    debug_assert!(f.is_final.len() == seq.len());
    m.where_(&f.is_final_slash, &leading_nodes, seq)
}

/// Causal forward propagation. The leading node of every arm rides in the `|` slot
/// of the arm's current edge. Rule 1 pulls the next node into the current edge when
/// the connecting edge came earlier; rule 2 pushes the leading node into the
/// connecting edge's slot when it comes later.
///
/// Two details differ from a direct transcription, selectable for comparison:
/// rows without a current edge are filled with [`NULL_B`] so they cannot match the
/// lane filler [`NULL_A`], and a push never overwrites a row that already tracks
/// an edge, since the row that pushed stays live and would otherwise push again
/// every step, undoing later pulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CausalVariant {
    j_filler: Value,
    keep_live: bool,
}

impl CausalVariant {
    const FIXED: Self = Self { j_filler: NULL_B, keep_live: true };
    #[cfg(test)]
    const LITERAL: Self = Self { j_filler: NULL_A, keep_live: false };
}

fn causal(m: &mut Machine, input: &SolverInput, lanes: &Lanes, variant: CausalVariant) -> Result<Seq, RaspError> {
    let seq = &input.tokens;
    let Lanes { idx, i_nodes, j_nodes, .. } = lanes;
    let null = m.full(seq, NULL_A);
    let filler = m.full(seq, variant.j_filler);
    let s = read_at(m, seq, idx, input.q_start + 1, true)?;
    let is_start = m.equals(i_nodes, &s)?;
    let start_idx = m.where_(&is_start, idx, &null)?;
    let next = m.offset(idx, 1);

    // leading node of each start edge, copied into that edge's `|`
    let start_plus2 = m.offset(&start_idx, 2);
    let leading_idx = m.kqv(&start_plus2, idx, &next, EQ, NULL_A, true)?;
    let leading_nodes = m.kqv(idx, &leading_idx, j_nodes, EQ, NULL_A, true)?;
    let has_leading = m.is_true(&leading_nodes, 0);
    let mut cur_state = m.where_(&has_leading, &leading_nodes, seq)?;

    let start_plus1 = m.offset(&start_idx, 1);
    let cur_j_idx = m.kqv(&start_plus1, idx, &next, EQ, NULL_A, true)?;
    let mut cur_k_nodes = leading_nodes;
    let has_j = m.is_true(&cur_j_idx, 0);
    let mut cur_j_nodes = m.where_(&has_j, j_nodes, &filler)?;

    let prev = m.offset(idx, -1);
    let plus2 = m.offset(idx, 2);
    for _ in 0..input.arm_len - 1 {
        // rule 1: connecting edge is earlier
        let before = m.select(i_nodes, &cur_j_nodes, EQ, true)?;
        let is_before = m.sel_width(&before);
        let connecting_i_idx = m.kqv(i_nodes, &cur_j_nodes, idx, EQ, NULL_A, true)?;
        let connecting_i_node = m.kqv(&prev, &connecting_i_idx, j_nodes, EQ, NULL_A, true)?;
        cur_j_nodes = m.where_(&is_before, &connecting_i_node, &cur_j_nodes)?;
        cur_state = m.where_(&is_before, &connecting_i_node, &cur_state)?;

        // rule 2: connecting edge is later
        let after = m.select(&cur_j_nodes, i_nodes, EQ, true)?;
        let is_after = m.sel_width(&after);
        let connecting_i_idx = m.kqv(&cur_j_nodes, i_nodes, idx, EQ, NULL_A, true)?;
        let connecting_k_idx = m.kqv(&plus2, idx, &connecting_i_idx, EQ, NULL_A, true)?;
        let slot = m.offset(&connecting_k_idx, 1);
        let connecting_k_node = m.kqv(idx, &slot, &cur_k_nodes, EQ, NULL_A, true)?;
        let new_after = m.is_true(&connecting_k_node, 0);
        cur_k_nodes = m.where_(&new_after, &connecting_k_node, &cur_k_nodes)?;

        let cur_j_idx_at_i = m.where_(&is_after, &next, &null)?;
        let cur_j_idx = m.kqv(&cur_j_idx_at_i, idx, &next, EQ, NULL_A, true)?;
        let has_j = m.is_true(&cur_j_idx, 0);
        let new_cur_j_nodes = m.where_(&has_j, j_nodes, &null)?;
        let fresh = if variant.keep_live {
            m.seq_map(&new_cur_j_nodes, &cur_j_nodes, |new, cur| Value::from(new > 0 && cur <= 0))?
        } else {
            m.is_true(&new_cur_j_nodes, 0)
        };
        cur_j_nodes = m.where_(&fresh, &new_cur_j_nodes, &cur_j_nodes)?;
        cur_state = m.where_(&new_after, &cur_k_nodes, &cur_state)?;
    }
    Ok(cur_state)
}
