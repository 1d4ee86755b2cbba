//! Path-star graphs: a start node with `D` disjoint arms of `M - 1` nodes each.
//!
//! Node ids are 0-based integers in `[0, |V|)`. Printed labels start from 1; that
//! mapping lives in the tokenizer's display layer only.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::GraphError;

pub type NodeId = u32;

/// A start node plus `D` arms, each listed leading node first and final node last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathStarGraph {
    start: NodeId,
    arms: Vec<Vec<NodeId>>,
    vocab_size: usize,
}

impl PathStarGraph {
    pub fn new(start: NodeId, arms: Vec<Vec<NodeId>>, vocab_size: usize) -> Result<Self, GraphError> {
        if arms.len() < 2 {
            return Err(GraphError::TooFewArms(arms.len()));
        }
        let arm_nodes = arms[0].len();
        if arm_nodes < 1 {
            return Err(GraphError::ArmTooShort(arm_nodes + 1));
        }
        if arms.iter().any(|a| a.len() != arm_nodes) {
            return Err(GraphError::RaggedArms);
        }
        let mut seen = HashSet::with_capacity(arms.len() * arm_nodes + 1);
        for &node in std::iter::once(&start).chain(arms.iter().flatten()) {
            if node as usize >= vocab_size {
                return Err(GraphError::NodeOutOfRange { node, vocab_size });
            }
            if !seen.insert(node) {
                return Err(GraphError::DuplicateNode(node));
            }
        }
        Ok(Self { start, arms, vocab_size })
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn arms(&self) -> &[Vec<NodeId>] {
        &self.arms
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of arms, `D`.
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Arm length `M`, counting the start node.
    pub fn arm_len(&self) -> usize {
        self.arms[0].len() + 1
    }

    pub fn node_count(&self) -> usize {
        self.num_arms() * (self.arm_len() - 1) + 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.start).chain(self.arms.iter().flatten().copied())
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes().any(|n| n == node)
    }

    pub fn leading_nodes(&self) -> Vec<NodeId> {
        self.arms.iter().map(|a| a[0]).collect()
    }

    pub fn final_nodes(&self) -> Vec<NodeId> {
        self.arms.iter().map(|a| a[a.len() - 1]).collect()
    }

    /// Index of the arm ending in `node`, if `node` is a final node.
    pub fn arm_ending_in(&self, node: NodeId) -> Option<usize> {
        self.arms.iter().position(|a| a[a.len() - 1] == node)
    }

    /// All `D(M-1)` edges, arm by arm, each oriented away from the start.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges = Vec::with_capacity(self.node_count() - 1);
        for arm in &self.arms {
            let mut prev = self.start;
            for &node in arm {
                edges.push((prev, node));
                prev = node;
            }
        }
        edges
    }

    /// Edges of one arm, in order from the start outwards.
    pub fn arm_edges(&self, arm: usize) -> Vec<(NodeId, NodeId)> {
        let mut prev = self.start;
        self.arms[arm]
            .iter()
            .map(|&node| {
                let e = (prev, node);
                prev = node;
                e
            })
            .collect()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.edges().iter().filter(|(u, v)| *u == node || *v == node).count()
    }

    fn adjacency(&self) -> HashMap<NodeId, Vec<NodeId>> {
        let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for (u, v) in self.edges() {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
        adj
    }

    /// True when both graphs have the same start and the same set of arms,
    /// regardless of the order the arms are stored in.
    pub fn same_graph(&self, other: &Self) -> bool {
        self.start == other.start
            && self.vocab_size == other.vocab_size
            && self.arms.len() == other.arms.len()
            && self.arms.iter().all(|a| other.arms.contains(a))
    }
}

/// Draws `D(M-1)+1` distinct ids uniformly from `[0, vocab_size)`.
///
/// The id range is shuffled with one Fisher-Yates pass; the first id becomes the
/// start, the next `M-1` fill arm 0 from leading to final node, and so on.
pub fn sample_graph<R: Rng + ?Sized>(
    vocab_size: usize,
    num_arms: usize,
    arm_len: usize,
    rng: &mut R,
) -> Result<PathStarGraph, GraphError> {
    check_shape(vocab_size, num_arms, arm_len)?;
    let mut ids: Vec<NodeId> = (0..vocab_size as NodeId).collect();
    ids.shuffle(rng);
    let start = ids[0];
    let arms = ids[1..num_arms * (arm_len - 1) + 1].chunks(arm_len - 1).map(<[NodeId]>::to_vec).collect();
    PathStarGraph::new(start, arms, vocab_size)
}

fn check_shape(vocab_size: usize, num_arms: usize, arm_len: usize) -> Result<(), GraphError> {
    if num_arms < 2 {
        return Err(GraphError::TooFewArms(num_arms));
    }
    if arm_len < 2 {
        return Err(GraphError::ArmTooShort(arm_len));
    }
    let required = num_arms * (arm_len - 1) + 1;
    if vocab_size < required {
        return Err(GraphError::VocabTooSmall { vocab_size, required });
    }
    Ok(())
}

/// A graph together with the chosen target final node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskInstance {
    graph: PathStarGraph,
    target: NodeId,
    target_arm_index: usize,
}

impl TaskInstance {
    pub fn new(graph: PathStarGraph, target: NodeId) -> Result<Self, GraphError> {
        let target_arm_index = graph.arm_ending_in(target).ok_or(GraphError::NotFinal(target))?;
        Ok(Self { graph, target, target_arm_index })
    }

    pub fn with_arm(graph: PathStarGraph, arm: usize) -> Self {
        let target = *graph.arms[arm].last().expect("arms are non-empty");
        Self { graph, target, target_arm_index: arm }
    }

    pub fn graph(&self) -> &PathStarGraph {
        &self.graph
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn target_arm_index(&self) -> usize {
        self.target_arm_index
    }

    pub fn start(&self) -> NodeId {
        self.graph.start
    }

    /// The leading node `l_t` of the target arm.
    pub fn leading(&self) -> NodeId {
        self.graph.arms[self.target_arm_index][0]
    }

    /// `R_t`: the start node followed by the target arm.
    pub fn target_path(&self) -> Vec<NodeId> {
        std::iter::once(self.graph.start).chain(self.graph.arms[self.target_arm_index].iter().copied()).collect()
    }

    pub fn same_task(&self, other: &Self) -> bool {
        self.target == other.target && self.graph.same_graph(&other.graph)
    }
}

/// Picks the target uniformly among the final nodes.
pub fn sample_target<R: Rng + ?Sized>(graph: PathStarGraph, rng: &mut R) -> TaskInstance {
    let arm = rng.gen_range(0..graph.num_arms());
    TaskInstance::with_arm(graph, arm)
}

/// Hop count between two nodes, by breadth-first search over the undirected edges.
pub fn graph_distance(graph: &PathStarGraph, from: NodeId, to: NodeId) -> Result<usize, GraphError> {
    let adj = graph.adjacency();
    for node in [from, to] {
        if !adj.contains_key(&node) {
            return Err(GraphError::UnknownNode(node));
        }
    }
    let dist = bfs(&adj, from);
    Ok(dist[&to])
}

fn bfs(adj: &HashMap<NodeId, Vec<NodeId>>, from: NodeId) -> HashMap<NodeId, usize> {
    let mut dist = HashMap::with_capacity(adj.len());
    dist.insert(from, 0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for &v in &adj[&u] {
            if let Entry::Vacant(e) = dist.entry(v) {
                e.insert(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Computes `R_t` from distances alone: every node at least as close to `t` as
/// to any other final node, ordered by distance from the start.
///
/// Does not look at the arm layout, so it cross-checks [`TaskInstance::target_path`].
pub fn target_arm_oracle(graph: &PathStarGraph, target: NodeId) -> Result<Vec<NodeId>, GraphError> {
    let finals = graph.final_nodes();
    if !finals.contains(&target) {
        return Err(GraphError::NotFinal(target));
    }
    let adj = graph.adjacency();
    let from_final: Vec<HashMap<NodeId, usize>> = finals.iter().map(|&f| bfs(&adj, f)).collect();
    let from_target = bfs(&adj, target);
    let from_start = bfs(&adj, graph.start);
    let mut arm: Vec<NodeId> =
        adj.keys().copied().filter(|r| from_final.iter().all(|df| from_target[r] <= df[r])).collect();
    arm.sort_by_key(|r| from_start[r]);
    Ok(arm)
}

/// Number of distinct (graph, target) pairs: `|V|! / (|V| - D(M-1) - 1)! * D`.
///
/// Arms are treated as ordered, so every assignment of ids to arm positions counts once.
pub fn count_instances(vocab_size: usize, num_arms: usize, arm_len: usize) -> Result<BigUint, GraphError> {
    check_shape(vocab_size, num_arms, arm_len)?;
    let nodes = num_arms * (arm_len - 1) + 1;
    let falling = ((vocab_size - nodes + 1)..=vocab_size).fold(BigUint::from(1u32), |acc, k| acc * BigUint::from(k));
    Ok(falling * BigUint::from(num_arms))
}
