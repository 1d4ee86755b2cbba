//! Python bindings for the `pathstar` crate, importable as `pathstar`.

use std::str::FromStr;

use pathstar::chc::{teacher_forced_eval, Predictor};
use pathstar::graph::{self, NodeId};
use pathstar::solvers::{Solver, SolverConfig};
use pathstar::tokenizer::{self, PermMode, QPosition, TargetVariant, TokenizationOptions, Vocabulary};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: FromStr>(s: &str) -> PyResult<T>
where
    T::Err: ToString,
{
    s.parse().map_err(value_err)
}

/// A path-star graph with 0-based node ids.
#[pyclass(name = "Graph", module = "pathstar", frozen, from_py_object)]
#[derive(Clone)]
struct PyGraph(graph::PathStarGraph);

#[pymethods]
impl PyGraph {
    #[new]
    fn new(start: NodeId, arms: Vec<Vec<NodeId>>, vocab_size: usize) -> PyResult<Self> {
        graph::PathStarGraph::new(start, arms, vocab_size).map(Self).map_err(value_err)
    }

    #[getter]
    fn start(&self) -> NodeId {
        self.0.start()
    }

    #[getter]
    fn arms(&self) -> Vec<Vec<NodeId>> {
        self.0.arms().to_vec()
    }

    #[getter]
    fn num_arms(&self) -> usize {
        self.0.num_arms()
    }

    #[getter]
    fn arm_len(&self) -> usize {
        self.0.arm_len()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }

    fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.0.edges()
    }

    fn leading_nodes(&self) -> Vec<NodeId> {
        self.0.leading_nodes()
    }

    fn final_nodes(&self) -> Vec<NodeId> {
        self.0.final_nodes()
    }

    fn __repr__(&self) -> String {
        format!("Graph(start={}, arms={:?}, vocab_size={})", self.0.start(), self.0.arms(), self.0.vocab_size())
    }
}

/// A graph together with a target final node.
#[pyclass(name = "Instance", module = "pathstar", frozen, from_py_object)]
#[derive(Clone)]
struct PyInstance(graph::TaskInstance);

#[pymethods]
impl PyInstance {
    #[new]
    fn new(graph: &PyGraph, target: NodeId) -> PyResult<Self> {
        graph::TaskInstance::new(graph.0.clone(), target).map(Self).map_err(value_err)
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph(self.0.graph().clone())
    }

    #[getter]
    fn target(&self) -> NodeId {
        self.0.target()
    }

    #[getter]
    fn leading(&self) -> NodeId {
        self.0.leading()
    }

    /// Start node through target, inclusive.
    fn target_path(&self) -> Vec<NodeId> {
        self.0.target_path()
    }

    fn __repr__(&self) -> String {
        format!("Instance(target={}, graph={})", self.0.target(), PyGraph(self.0.graph().clone()).__repr__())
    }
}

/// A tokenized sample. `text` is the whitespace-separated surface form.
#[pyclass(name = "Sample", module = "pathstar", frozen, from_py_object)]
#[derive(Clone)]
struct PySample(tokenizer::TokenizedSample);

#[pymethods]
impl PySample {
    #[getter]
    fn tokens(&self) -> Vec<u32> {
        self.0.tokens.clone()
    }

    #[getter]
    fn prefix_len(&self) -> usize {
        self.0.prefix_len
    }

    #[getter]
    fn instance(&self) -> PyInstance {
        PyInstance(self.0.instance.clone())
    }

    #[getter]
    fn target_tokens(&self) -> Vec<u32> {
        self.0.target_tokens().to_vec()
    }

    #[getter]
    fn text(&self) -> PyResult<String> {
        tokenizer::detokenize(&self.0).map_err(value_err)
    }

    fn serialized_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.0.serialized_edges()
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("Sample({:?})", self.text()?))
    }
}

/// Outcome of running one solver program on one sample.
#[pyclass(name = "SolverResult", module = "pathstar", frozen, get_all)]
struct PySolverResult {
    final_state: Vec<i64>,
    valid: bool,
    kqv_count: usize,
    loop_iterations: usize,
    non_causal_attention: usize,
}

#[pymethods]
impl PySolverResult {
    fn __repr__(&self) -> String {
        format!(
            "SolverResult(valid={}, kqv_count={}, loop_iterations={})",
            if self.valid { "True" } else { "False" },
            self.kqv_count,
            self.loop_iterations
        )
    }
}

fn options(perm: &str, q_pos: &str, variant: &str, markers: usize, bos_eos: bool) -> PyResult<TokenizationOptions> {
    Ok(TokenizationOptions {
        perm_mode: parse::<PermMode>(perm)?,
        q_position: parse::<QPosition>(q_pos)?,
        target_variant: parse::<TargetVariant>(variant)?,
        edge_marker_count: markers,
        include_bos_eos: bos_eos,
    })
}

#[pyfunction]
#[pyo3(signature = (vocab_size, num_arms, arm_len, seed=0))]
fn sample_graph(vocab_size: usize, num_arms: usize, arm_len: usize, seed: u64) -> PyResult<PyGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    graph::sample_graph(vocab_size, num_arms, arm_len, &mut rng).map(PyGraph).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (vocab_size, num_arms, arm_len, seed=0))]
fn sample_instance(vocab_size: usize, num_arms: usize, arm_len: usize, seed: u64) -> PyResult<PyInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = graph::sample_graph(vocab_size, num_arms, arm_len, &mut rng).map_err(value_err)?;
    Ok(PyInstance(graph::sample_target(g, &mut rng)))
}

/// Exact number of distinct task instances, as a Python int.
#[pyfunction]
fn count_instances(py: Python<'_>, vocab_size: usize, num_arms: usize, arm_len: usize) -> PyResult<Py<PyAny>> {
    let z = graph::count_instances(vocab_size, num_arms, arm_len).map_err(value_err)?;
    let int = py.import("builtins")?.getattr("int")?;
    Ok(int.call1((z.to_string(),))?.unbind())
}

#[pyfunction]
#[pyo3(signature = (instance, perm="edge", q_pos="end", variant="forward", markers=1, bos_eos=true, seed=0))]
fn tokenize(
    instance: &PyInstance,
    perm: &str,
    q_pos: &str,
    variant: &str,
    markers: usize,
    bos_eos: bool,
    seed: u64,
) -> PyResult<PySample> {
    let opts = options(perm, q_pos, variant, markers, bos_eos)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PySample(tokenizer::tokenize(&instance.0, opts, &mut rng)))
}

/// The sample plus `extra` siblings over the same graph with distinct targets.
#[pyfunction]
#[pyo3(signature = (instance, extra, perm="edge", q_pos="end", variant="forward", markers=1, bos_eos=true, seed=0))]
#[allow(clippy::too_many_arguments)]
fn structured_expand(
    instance: &PyInstance,
    extra: usize,
    perm: &str,
    q_pos: &str,
    variant: &str,
    markers: usize,
    bos_eos: bool,
    seed: u64,
) -> PyResult<Vec<PySample>> {
    let opts = options(perm, q_pos, variant, markers, bos_eos)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = tokenizer::structured_expand(&instance.0, extra, &mut rng, opts).map_err(value_err)?;
    Ok(group.into_iter().map(PySample).collect())
}

#[pyfunction]
#[pyo3(signature = (line, vocab_size, perm="edge"))]
fn parse_sample(line: &str, vocab_size: usize, perm: &str) -> PyResult<PySample> {
    tokenizer::parse_sample(line, &Vocabulary::new(vocab_size), parse(perm)?).map(PySample).map_err(value_err)
}

#[pyfunction]
fn vocab_size(node_count: usize) -> usize {
    Vocabulary::new(node_count).size()
}

#[pyfunction]
fn solver_names() -> Vec<&'static str> {
    Solver::ALL.iter().map(|s| s.name()).collect()
}

#[pyfunction]
#[pyo3(signature = (solver, sample, debug_markers=false))]
fn solve(py: Python<'_>, solver: &str, sample: &PySample, debug_markers: bool) -> PyResult<PySolverResult> {
    let solver: Solver = parse(solver)?;
    let config = SolverConfig { debug_markers, ..Default::default() };
    let r = py.detach(|| solver.solve_with(&sample.0, config)).map_err(value_err)?;
    Ok(PySolverResult {
        final_state: r.final_state.values().to_vec(),
        valid: r.valid,
        kqv_count: r.kqv_count,
        loop_iterations: r.loop_iterations,
        non_causal_attention: r.trace.non_causal_attention(),
    })
}

/// Teacher-forced accuracy of the edge-lookup predictor matching the samples' target variant.
#[pyfunction]
#[pyo3(signature = (samples, seed=0, final_target=false))]
fn chc_eval(py: Python<'_>, samples: Vec<PySample>, seed: u64, final_target: bool) -> PyResult<Py<PyAny>> {
    let Some(first) = samples.first() else { return Err(PyValueError::new_err("no samples")) };
    let predictor = match Predictor::for_variant(first.0.options.target_variant) {
        Predictor::CleverHans { .. } => Predictor::CleverHans { final_target },
        p => p,
    };
    let samples: Vec<_> = samples.into_iter().map(|s| s.0).collect();
    let report = py.detach(|| teacher_forced_eval(predictor, &samples, seed));
    let out = pyo3::types::PyDict::new(py);
    out.set_item("samples", report.sample_count)?;
    out.set_item("sequence_accuracy", report.sequence_accuracy())?;
    out.set_item("position_accuracy", report.position_accuracy())?;
    Ok(out.into_any().unbind())
}

#[pymodule]
#[pyo3(name = "pathstar")]
fn pathstar_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PySolverResult>()?;
    m.add_function(wrap_pyfunction!(sample_graph, m)?)?;
    m.add_function(wrap_pyfunction!(sample_instance, m)?)?;
    m.add_function(wrap_pyfunction!(count_instances, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(structured_expand, m)?)?;
    m.add_function(wrap_pyfunction!(parse_sample, m)?)?;
    m.add_function(wrap_pyfunction!(vocab_size, m)?)?;
    m.add_function(wrap_pyfunction!(solver_names, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(chc_eval, m)?)?;
    Ok(())
}
