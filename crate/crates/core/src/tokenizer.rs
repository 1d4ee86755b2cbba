//! Serialization of task instances into token sequences and back.
//!
//! A sample is `[BOS] G Q R [EOS]` (or `[BOS] Q G R [EOS]`), where each edge of `G`
//! is `u v |` (optionally `u v | |`), `Q` is `/ s t =` and `R` is the target region.
//! Surface forms print node ids 1-based, so node id 3 is written `4`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::TokenError;
use crate::graph::{NodeId, PathStarGraph, TaskInstance};

pub type Token = u32;

/// Node ids `0..|V|` followed by five special tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    node_count: usize,
}

impl Vocabulary {
    pub fn new(node_count: usize) -> Self {
        Self { node_count }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `|V| + 5`.
    pub fn size(&self) -> usize {
        self.node_count + 5
    }

    pub fn edge_mark(&self) -> Token {
        self.node_count as Token
    }

    pub fn q_open(&self) -> Token {
        self.node_count as Token + 1
    }

    pub fn q_close(&self) -> Token {
        self.node_count as Token + 2
    }

    pub fn bos(&self) -> Token {
        self.node_count as Token + 3
    }

    pub fn eos(&self) -> Token {
        self.node_count as Token + 4
    }

    pub fn is_node(&self, token: Token) -> bool {
        (token as usize) < self.node_count
    }

    pub fn surface(&self, token: Token) -> Result<String, TokenError> {
        let n = self.node_count as Token;
        Ok(match token {
            t if t < n => (t + 1).to_string(),
            t if t == n => "|".into(),
            t if t == n + 1 => "/".into(),
            t if t == n + 2 => "=".into(),
            t if t == n + 3 => "BOS".into(),
            t if t == n + 4 => "EOS".into(),
            t => return Err(TokenError::OutOfVocabulary(t)),
        })
    }

    pub fn parse_token(&self, word: &str) -> Result<Token, TokenError> {
        match word {
            "|" => Ok(self.edge_mark()),
            "/" => Ok(self.q_open()),
            "=" => Ok(self.q_close()),
            "BOS" => Ok(self.bos()),
            "EOS" => Ok(self.eos()),
            _ => match word.parse::<u64>() {
                Ok(label) if label >= 1 && label <= self.node_count as u64 => Ok(label as Token - 1),
                _ => Err(TokenError::UnknownToken(word.to_string())),
            },
        }
    }

    pub fn render(&self, tokens: &[Token]) -> Result<String, TokenError> {
        let words = tokens.iter().map(|&t| self.surface(t)).collect::<Result<Vec<_>, _>>()?;
        Ok(words.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PermMode {
    /// Every edge is placed uniformly at random.
    EdgeWise,
    /// Whole arms are shuffled; edges inside an arm keep their order.
    ArmWise,
    /// Arms in stored order, edges in order.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QPosition {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetVariant {
    /// `R_t` from the start node to the target.
    FullForward,
    /// `R_t` from the target back to the start node.
    Reversed,
    /// Only the leading node `l_t`.
    LeadingOnly,
}

macro_rules! named_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    _ => Err(format!("unknown value `{s}`")),
                }
            }
        }
    };
}

named_enum!(PermMode { EdgeWise => "edge", ArmWise => "arm", None => "none" });
named_enum!(QPosition { Start => "start", End => "end" });
named_enum!(TargetVariant { FullForward => "forward", Reversed => "reversed", LeadingOnly => "leading" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenizationOptions {
    pub perm_mode: PermMode,
    pub q_position: QPosition,
    pub target_variant: TargetVariant,
    /// 1 or 2 `|` tokens after every edge.
    pub edge_marker_count: usize,
    pub include_bos_eos: bool,
}

impl Default for TokenizationOptions {
    fn default() -> Self {
        Self {
            perm_mode: PermMode::EdgeWise,
            q_position: QPosition::End,
            target_variant: TargetVariant::FullForward,
            edge_marker_count: 1,
            include_bos_eos: true,
        }
    }
}

impl TokenizationOptions {
    /// Tokens per serialized edge.
    pub fn edge_arity(&self) -> usize {
        2 + self.edge_marker_count
    }
}

/// A serialized instance. `tokens[..prefix_len]` holds `G` and `Q` (and BOS);
/// the target region runs from `prefix_len` up to EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSample {
    pub tokens: Vec<Token>,
    pub prefix_len: usize,
    pub instance: TaskInstance,
    pub options: TokenizationOptions,
}

impl TokenizedSample {
    pub fn vocab(&self) -> Vocabulary {
        Vocabulary::new(self.instance.graph().vocab_size())
    }

    pub fn target_tokens(&self) -> &[Token] {
        let end = self.tokens.len() - usize::from(self.options.include_bos_eos);
        &self.tokens[self.prefix_len..end]
    }

    /// Tokens with BOS/EOS removed.
    pub fn body(&self) -> &[Token] {
        if self.options.include_bos_eos {
            &self.tokens[1..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }

    /// Edges in serialized order.
    pub fn serialized_edges(&self) -> Vec<(NodeId, NodeId)> {
        let body = self.body();
        let g_start = match self.options.q_position {
            QPosition::Start => 4,
            QPosition::End => 0,
        };
        let arity = self.options.edge_arity();
        let edges = self.instance.graph().node_count() - 1;
        (0..edges)
            .map(|k| {
                let p = g_start + k * arity;
                (body[p], body[p + 1])
            })
            .collect()
    }

    /// Same tokens, boundary and options, and the same graph and target up to arm order.
    pub fn same_sample(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.prefix_len == other.prefix_len
            && self.options == other.options
            && self.instance.same_task(&other.instance)
    }
}

/// Serializes `instance`, drawing the edge or arm order from `rng` as `options` require.
pub fn tokenize<R: Rng + ?Sized>(
    instance: &TaskInstance,
    options: TokenizationOptions,
    rng: &mut R,
) -> TokenizedSample {
    let graph = instance.graph();
    let edges = match options.perm_mode {
        PermMode::None => graph.edges(),
        PermMode::EdgeWise => {
            let mut edges = graph.edges();
            edges.shuffle(rng);
            edges
        }
        PermMode::ArmWise => {
            let mut order: Vec<usize> = (0..graph.num_arms()).collect();
            order.shuffle(rng);
            order.into_iter().flat_map(|a| graph.arm_edges(a)).collect()
        }
    };
    tokenize_with_edges(instance, options, &edges)
}

/// Serializes `instance` with the arms emitted in the given order.
pub fn tokenize_with_arm_order(
    instance: &TaskInstance,
    options: TokenizationOptions,
    arm_order: &[usize],
) -> TokenizedSample {
    let graph = instance.graph();
    let edges: Vec<_> = arm_order.iter().flat_map(|&a| graph.arm_edges(a)).collect();
    tokenize_with_edges(instance, options, &edges)
}

/// Serializes `instance` with an explicit edge order. `edges` must be a permutation
/// of the graph's edges.
pub fn tokenize_with_edges(
    instance: &TaskInstance,
    options: TokenizationOptions,
    edges: &[(NodeId, NodeId)],
) -> TokenizedSample {
    let graph = instance.graph();
    debug_assert_eq!(edges.len(), graph.node_count() - 1);
    let vocab = Vocabulary::new(graph.vocab_size());
    let mut tokens = Vec::with_capacity(edges.len() * options.edge_arity() + graph.arm_len() + 6);
    if options.include_bos_eos {
        tokens.push(vocab.bos());
    }
    let q = [vocab.q_open(), instance.start(), instance.target(), vocab.q_close()];
    if options.q_position == QPosition::Start {
        tokens.extend_from_slice(&q);
    }
    for &(u, v) in edges {
        tokens.extend_from_slice(&[u, v]);
        tokens.extend(std::iter::repeat_n(vocab.edge_mark(), options.edge_marker_count));
    }
    if options.q_position == QPosition::End {
        tokens.extend_from_slice(&q);
    }
    let prefix_len = tokens.len();
    tokens.extend(target_region(instance, options.target_variant));
    if options.include_bos_eos {
        tokens.push(vocab.eos());
    }
    TokenizedSample { tokens, prefix_len, instance: instance.clone(), options }
}

fn target_region(instance: &TaskInstance, variant: TargetVariant) -> Vec<NodeId> {
    match variant {
        TargetVariant::FullForward => instance.target_path(),
        TargetVariant::Reversed => {
            let mut path = instance.target_path();
            path.reverse();
            path
        }
        TargetVariant::LeadingOnly => vec![instance.leading()],
    }
}

/// Space-separated surface forms of every token.
pub fn detokenize(sample: &TokenizedSample) -> Result<String, TokenError> {
    sample.vocab().render(&sample.tokens)
}

/// Parses a line in the surface grammar. The permutation mode cannot be recovered
/// from a single line, so it is supplied by the caller (normally from the file header).
///
/// Arms of the reconstructed graph are ordered by the first appearance of their
/// leading edge.
pub fn parse_sample(line: &str, vocab: &Vocabulary, perm_mode: PermMode) -> Result<TokenizedSample, TokenError> {
    let tokens = line.split_whitespace().map(|w| vocab.parse_token(w)).collect::<Result<Vec<_>, _>>()?;
    let include_bos_eos = tokens.first() == Some(&vocab.bos());
    if include_bos_eos != (tokens.last() == Some(&vocab.eos())) || tokens.len() < 2 && include_bos_eos {
        return Err(TokenError::BadTarget("unbalanced BOS/EOS".into()));
    }
    let offset = usize::from(include_bos_eos);
    let body = &tokens[offset..tokens.len() - offset];
    if body.is_empty() {
        return Err(TokenError::MissingQuery);
    }
    if body[1..].iter().any(|&t| t == vocab.bos() || t == vocab.eos()) {
        return Err(TokenError::BadTarget("stray BOS/EOS".into()));
    }

    let q_open = body.iter().position(|&t| t == vocab.q_open()).ok_or(TokenError::MissingQuery)?;
    if body.get(q_open + 3) != Some(&vocab.q_close()) || !body[q_open + 1..q_open + 3].iter().all(|&t| vocab.is_node(t))
    {
        return Err(TokenError::MissingQuery);
    }
    let (start, target) = (body[q_open + 1], body[q_open + 2]);
    let q_position = if q_open == 0 { QPosition::Start } else { QPosition::End };

    let g_begin = if q_position == QPosition::Start { 4 } else { 0 };
    let g_limit = if q_position == QPosition::Start { body.len() } else { q_open };
    let (edges, markers, g_end) = parse_edges(body, g_begin, g_limit, q_position == QPosition::End, vocab, offset)?;
    let target_begin = if q_position == QPosition::End { q_open + 4 } else { g_end };
    if q_position == QPosition::End && g_end != q_open {
        return Err(TokenError::MalformedEdge(g_end + offset));
    }

    let graph = assemble_graph(start, &edges, vocab.node_count())?;
    let instance = TaskInstance::new(graph, target)?;
    let target_region_tokens = &body[target_begin..];
    if let Some(i) = target_region_tokens.iter().position(|&t| !vocab.is_node(t)) {
        return Err(TokenError::MalformedEdge(target_begin + i + offset));
    }
    let target_variant = infer_variant(&instance, target_region_tokens)?;

    let options = TokenizationOptions {
        perm_mode,
        q_position,
        target_variant,
        edge_marker_count: markers.unwrap_or(1),
        include_bos_eos,
    };
    Ok(TokenizedSample { prefix_len: target_begin + offset, tokens, instance, options })
}

type ParsedEdges = (Vec<(NodeId, NodeId)>, Option<usize>, usize);

fn parse_edges(
    body: &[Token],
    begin: usize,
    limit: usize,
    strict: bool,
    vocab: &Vocabulary,
    offset: usize,
) -> Result<ParsedEdges, TokenError> {
    let mark = vocab.edge_mark();
    let mut edges = Vec::new();
    let mut markers: Option<usize> = None;
    let mut p = begin;
    while p < limit {
        let (u, v) = (body[p], body.get(p + 1).copied());
        if !vocab.is_node(u) {
            return Err(TokenError::MalformedEdge(p + offset));
        }
        let Some(v) = v.filter(|&v| p + 1 < limit && vocab.is_node(v)) else {
            if strict {
                return Err(TokenError::MalformedEdge(p + offset));
            }
            break;
        };
        let run = body[p + 2..limit].iter().take_while(|&&t| t == mark).count();
        if run == 0 {
            if strict {
                return Err(TokenError::MalformedEdge(p + offset));
            }
            break;
        }
        if u == v {
            return Err(TokenError::DuplicateInEdge(p + offset));
        }
        match markers {
            None if run <= 2 => markers = Some(run),
            Some(m) if m == run => {}
            _ => return Err(TokenError::MalformedEdge(p + offset)),
        }
        edges.push((u, v));
        p += 2 + run;
    }
    Ok((edges, markers, p))
}

fn assemble_graph(start: NodeId, edges: &[(NodeId, NodeId)], vocab_size: usize) -> Result<PathStarGraph, TokenError> {
    use std::collections::HashMap;
    let mut next: HashMap<NodeId, NodeId> = HashMap::new();
    let mut heads = Vec::new();
    for &(u, v) in edges {
        if u == start {
            heads.push(v);
        } else if next.insert(u, v).is_some() {
            return Err(TokenError::NotPathStar(format!("node {} branches", u + 1)));
        }
    }
    if heads.is_empty() {
        return Err(TokenError::NotPathStar("start node has no edges".into()));
    }
    let arms: Vec<Vec<NodeId>> = heads
        .iter()
        .map(|&lead| {
            let mut arm = vec![lead];
            while let Some(&n) = next.get(arm.last().unwrap()) {
                if arm.len() > edges.len() {
                    break;
                }
                arm.push(n);
            }
            arm
        })
        .collect();
    if arms.iter().map(Vec::len).sum::<usize>() != edges.len() {
        return Err(TokenError::NotPathStar("edges not reachable from the start node".into()));
    }
    Ok(PathStarGraph::new(start, arms, vocab_size)?)
}

fn infer_variant(instance: &TaskInstance, region: &[Token]) -> Result<TargetVariant, TokenError> {
    let variant = match region {
        [] => return Err(TokenError::BadTarget("empty target region".into())),
        [_] => TargetVariant::LeadingOnly,
        [first, ..] if *first == instance.start() => TargetVariant::FullForward,
        _ => TargetVariant::Reversed,
    };
    if target_region(instance, variant) != region {
        return Err(TokenError::BadTarget(format!("target region does not match the {variant} arm")));
    }
    Ok(variant)
}

/// The original sample plus `extra` samples over the same graph with distinct
/// other targets drawn without replacement. Each sample gets its own edge order.
pub fn structured_expand<R: Rng + ?Sized>(
    instance: &TaskInstance,
    extra: usize,
    rng: &mut R,
    options: TokenizationOptions,
) -> Result<Vec<TokenizedSample>, TokenError> {
    let max = instance.graph().num_arms() - 1;
    if extra < 1 || extra > max {
        return Err(TokenError::StructuredCount { s: extra, max });
    }
    let others: Vec<usize> = (0..=max).filter(|&a| a != instance.target_arm_index()).collect();
    let mut out = Vec::with_capacity(extra + 1);
    out.push(tokenize(instance, options, rng));
    for arm in others.choose_multiple(rng, extra).copied().collect::<Vec<_>>() {
        let sibling = TaskInstance::with_arm(instance.graph().clone(), arm);
        out.push(tokenize(&sibling, options, rng));
    }
    Ok(out)
}

/// Redraws the serialization order of `G` for every sample; `Q` and targets are kept.
pub fn epoch_reshuffle<R: Rng + ?Sized>(samples: &[TokenizedSample], rng: &mut R) -> Vec<TokenizedSample> {
    samples.iter().map(|s| tokenize(&s.instance, s.options, rng)).collect()
}
