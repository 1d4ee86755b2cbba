//! The `pathstar` command line: `gen`, `solve`, `eval` and `count`.
//!
//! Exit codes: 0 success, 1 usage or constraint error, 2 a solver run inside its
//! supported regime was not 100% valid.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chc::{teacher_forced_eval, Predictor};
use crate::dataset::{read_dataset, write_dataset, DatasetHeader};
use crate::graph::{count_instances, sample_graph, sample_target, NodeId, TaskInstance};
use crate::solvers::{Solver, SolverConfig};
use crate::tokenizer::{
    structured_expand, tokenize, PermMode, QPosition, TargetVariant, TokenizationOptions, TokenizedSample,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pathstar", version, about = "Path-star task generator, RASP solvers and baseline evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset file.
    Gen(GenArgs),
    /// Run a RASP solver over a dataset and report validity.
    Solve(SolveArgs),
    /// Teacher-forced evaluation of the edge-lookup baseline.
    Eval(EvalArgs),
    /// Print the number of distinct (graph, target) instances.
    Count(ShapeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    /// Number of arms.
    #[arg(long = "D", default_value_t = 2)]
    pub num_arms: usize,
    /// Arm length, counting the start node.
    #[arg(long = "M", default_value_t = 5)]
    pub arm_len: usize,
    /// Number of possible node ids.
    #[arg(long = "vocab", default_value_t = 100)]
    pub vocab_size: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Number of graphs to draw. With --structured S each yields S+1 lines.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "edge")]
    pub perm: PermMode,
    #[arg(long = "q-pos", default_value = "end")]
    pub q_pos: QPosition,
    #[arg(long, default_value = "forward")]
    pub variant: TargetVariant,
    /// `|` tokens after each edge (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub markers: usize,
    /// Extra samples per graph with other targets.
    #[arg(long, default_value_t = 0)]
    pub structured: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave out the BOS and EOS tokens.
    #[arg(long)]
    pub no_bos_eos: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a test split of this many graphs, disjoint from the main split.
    #[arg(long, requires = "test_out")]
    pub test_n: Option<usize>,
    #[arg(long, requires = "test_n")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub solver: Solver,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also fail (exit 2) on runs outside the solver's supported regime.
    #[arg(long)]
    pub strict: bool,
    /// Write readability markers into back_target states.
    #[arg(long)]
    pub debug_markers: bool,
    /// Omit the per-sample lines.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Answer position M with the target from the query.
    #[arg(long)]
    pub final_target: bool,
    /// Seed for the leading-node guesses.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Append a human-readable table.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::usage(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a, stdout),
        Command::Solve(a) => cmd_solve(&a, stdout, stderr),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Count(a) => cmd_count(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

type TaskKey = (NodeId, Vec<Vec<NodeId>>, NodeId);

/// Identifies a (graph, target) pair regardless of arm order.
fn task_key(instance: &TaskInstance) -> TaskKey {
    let mut arms = instance.graph().arms().to_vec();
    arms.sort_unstable();
    (instance.start(), arms, instance.target())
}

/// All samples drawn from stream `stream` of `seed`.
fn draw_group(args: &GenArgs, options: TokenizationOptions, stream: u64) -> Result<Vec<TokenizedSample>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(stream);
    let s = &args.shape;
    let graph = sample_graph(s.vocab_size, s.num_arms, s.arm_len, &mut rng)?;
    let instance = sample_target(graph, &mut rng);
    if args.structured == 0 {
        Ok(vec![tokenize(&instance, options, &mut rng)])
    } else {
        Ok(structured_expand(&instance, args.structured, &mut rng, options)?)
    }
}

fn gen_options(args: &GenArgs) -> Result<TokenizationOptions, CliError> {
    if !(1..=2).contains(&args.markers) {
        return Err(CliError::usage(format!("--markers must be 1 or 2, got {}", args.markers)));
    }
    if args.structured > 0 && args.structured + 1 > args.shape.num_arms {
        return Err(CliError::usage(format!(
            "S must be <= D-1 (got S={} with D={})",
            args.structured, args.shape.num_arms
        )));
    }
    Ok(TokenizationOptions {
        perm_mode: args.perm,
        q_position: args.q_pos,
        target_variant: args.variant,
        edge_marker_count: args.markers,
        include_bos_eos: !args.no_bos_eos,
    })
}

fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let options = gen_options(args)?;
    let s = &args.shape;
    let header = DatasetHeader {
        num_arms: s.num_arms,
        arm_len: s.arm_len,
        vocab_size: s.vocab_size,
        options,
        structured: args.structured,
        seed: args.seed,
    };
    let groups: Vec<Vec<TokenizedSample>> =
        (0..args.n as u64).into_par_iter().map(|i| draw_group(args, options, i)).collect::<Result<_, _>>()?;
    let train: Vec<TokenizedSample> = groups.into_iter().flatten().collect();

    if let (Some(test_n), Some(test_out)) = (args.test_n, &args.test_out) {
        let seen: HashSet<TaskKey> = train.iter().map(|t| task_key(&t.instance)).collect();
        let mut test = Vec::new();
        let mut stream = args.n as u64;
        let mut accepted = 0;
        let budget = args.n as u64 + 100 * (test_n as u64 + 1);
        while accepted < test_n {
            if stream >= budget {
                return Err(CliError::usage("could not draw a disjoint test split; the instance space is too small"));
            }
            let group = draw_group(args, options, stream)?;
            stream += 1;
            if group.iter().all(|t| !seen.contains(&task_key(&t.instance))) {
                test.extend(group);
                accepted += 1;
            }
        }
        with_output(Some(test_out), stdout, |w| Ok(write_dataset(w, &header, &test)?))?;
    }
    with_output(args.out.as_deref(), stdout, |w| Ok(write_dataset(w, &header, &train)?))?;
    Ok(EXIT_OK)
}

fn load(path: &Path) -> Result<(DatasetHeader, Vec<TokenizedSample>), CliError> {
    let file = File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(read_dataset(BufReader::new(file))?)
}

/// Aggregate outcome of one `solve` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub solver: Solver,
    pub samples: usize,
    pub valid: usize,
    pub kqv_min: usize,
    pub kqv_max: usize,
    pub kqv_mean: f64,
    pub loop_iterations: usize,
    pub in_regime: bool,
}

impl SolveSummary {
    pub fn validity(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            self.valid as f64 / self.samples as f64
        }
    }
}

fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let (header, samples) = load(&args.input)?;
    let solver = args.solver;
    let o = &header.options;
    if o.edge_marker_count != solver.marker_count() {
        return Err(CliError::usage(format!(
            "{solver} needs markers={} but the dataset has markers={}",
            solver.marker_count(),
            o.edge_marker_count
        )));
    }
    if solver == Solver::Causal && o.q_position != QPosition::Start {
        return Err(CliError::usage("causal needs q_pos=start: the query must precede the graph"));
    }
    let in_regime = solver.supports(o.perm_mode);
    if !in_regime {
        let _ =
            writeln!(stderr, "warning: {solver} is not expected to solve perm={} data; reporting anyway", o.perm_mode);
    }
    let config = SolverConfig { debug_markers: args.debug_markers, ..Default::default() };
    let results: Vec<(bool, usize)> = samples
        .par_iter()
        .map(|s| solver.solve_with(s, config).map(|r| (r.valid, r.kqv_count)))
        .collect::<Result<_, _>>()?;

    let kqv: Vec<usize> = results.iter().map(|r| r.1).collect();
    let summary = SolveSummary {
        solver,
        samples: results.len(),
        valid: results.iter().filter(|r| r.0).count(),
        kqv_min: kqv.iter().copied().min().unwrap_or(0),
        kqv_max: kqv.iter().copied().max().unwrap_or(0),
        kqv_mean: if kqv.is_empty() { 0.0 } else { kqv.iter().sum::<usize>() as f64 / kqv.len() as f64 },
        loop_iterations: solver.loop_iterations(header.arm_len),
        in_regime,
    };
    with_output(args.out.as_deref(), stdout, |w| {
        writeln!(w, "solver={solver}")?;
        writeln!(w, "perm={}", o.perm_mode)?;
        writeln!(w, "regime={}", if in_regime { "supported" } else { "unsupported" })?;
        writeln!(w, "samples={}", summary.samples)?;
        writeln!(w, "valid={}", summary.valid)?;
        writeln!(w, "validity={:.6}", summary.validity())?;
        writeln!(w, "kqv_min={}", summary.kqv_min)?;
        writeln!(w, "kqv_max={}", summary.kqv_max)?;
        writeln!(w, "kqv_mean={:.3}", summary.kqv_mean)?;
        writeln!(w, "loop_iterations={}", summary.loop_iterations)?;
        if !args.summary {
            for (i, (valid, k)) in results.iter().enumerate() {
                writeln!(w, "sample={i} valid={} kqv_count={k}", u8::from(*valid))?;
            }
        }
        Ok(())
    })?;
    let strict = in_regime || args.strict;
    Ok(if strict && summary.valid < summary.samples { EXIT_INVALID } else { EXIT_OK })
}

fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (header, samples) = load(&args.input)?;
    let predictor = match Predictor::for_variant(header.options.target_variant) {
        Predictor::CleverHans { .. } => Predictor::CleverHans { final_target: args.final_target },
        p => p,
    };
    let report = teacher_forced_eval(predictor, &samples, args.seed);
    with_output(args.out.as_deref(), stdout, |w| {
        writeln!(w, "variant={}", header.options.target_variant)?;
        writeln!(w, "D={}", header.num_arms)?;
        write!(w, "{}", report.to_key_values())?;
        if args.table {
            writeln!(w)?;
            write!(w, "{}", report.to_table())?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn cmd_count(args: &ShapeArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let z = count_instances(args.vocab_size, args.num_arms, args.arm_len)?;
    writeln!(stdout, "{z}")?;
    Ok(EXIT_OK)
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
