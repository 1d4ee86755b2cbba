//! Path-star graph task: instance generation, tokenization, an instrumented RASP
//! interpreter, hand-written RASP solvers and a Clever-Hans baseline.

pub mod chc;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod rasp;
pub mod solvers;
pub mod tokenizer;

pub use chc::{teacher_forced_eval, PositionReport, Predictor};
pub use error::{GraphError, TokenError};
pub use graph::{count_instances, sample_graph, sample_target, NodeId, PathStarGraph, TaskInstance};
pub use rasp::{ExecutionTrace, Machine, Predicate, Seq};
pub use solvers::{validate_output, Solver, SolverConfig, SolverInput, SolverReport};
pub use tokenizer::{
    detokenize, parse_sample, tokenize, PermMode, QPosition, TargetVariant, Token, TokenizationOptions,
    TokenizedSample, Vocabulary,
};
