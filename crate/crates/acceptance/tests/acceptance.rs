//! Acceptance run: one PASS/FAIL line per criterion; the process fails if any criterion does.

use std::collections::HashSet;
use std::fs;
use std::process::ExitCode;

use num_bigint::BigUint;
use pathstar::chc::{teacher_forced_eval, Predictor};
use pathstar::graph::{
    count_instances, sample_graph, sample_target, target_arm_oracle, NodeId, PathStarGraph, TaskInstance,
};
use pathstar::solvers::{doubling_steps, Solver, SolverInput, SolverReport};
use pathstar::tokenizer::{
    detokenize, parse_sample, structured_expand, tokenize, tokenize_with_arm_order, tokenize_with_edges, PermMode,
    QPosition, TargetVariant, TokenizationOptions, TokenizedSample, Vocabulary,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SOUND: [Solver; 5] =
    [Solver::BackTarget, Solver::BackwardTargets, Solver::ForwardStart, Solver::LogDoubling, Solver::Causal];
const PERMS: [PermMode; 3] = [PermMode::EdgeWise, PermMode::ArmWise, PermMode::None];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn instance(d: usize, m: usize, rng: &mut ChaCha8Rng) -> TaskInstance {
    sample_target(sample_graph(100, d, m, rng).unwrap(), rng)
}

fn opts(solver: Solver, perm_mode: PermMode, q_position: QPosition) -> TokenizationOptions {
    TokenizationOptions { perm_mode, q_position, edge_marker_count: solver.marker_count(), ..Default::default() }
}

/// Regimes in which a solver is expected to succeed.
fn regimes(solver: Solver) -> Vec<(PermMode, QPosition)> {
    let qs: &[QPosition] =
        if solver == Solver::Causal { &[QPosition::Start] } else { &[QPosition::Start, QPosition::End] };
    PERMS.iter().filter(|&&p| solver.supports(p)).flat_map(|&p| qs.iter().map(move |&q| (p, q))).collect()
}

/// Window check against the BFS path rather than the instance's arm table.
fn oracle_valid(report: &SolverReport, sample: &TokenizedSample) -> bool {
    let inst = &sample.instance;
    let Ok(path) = target_arm_oracle(inst.graph(), inst.target()) else { return false };
    let (t, lead) = (SolverInput::encode_node(inst.target()), SolverInput::encode_node(path[1]));
    let input = SolverInput::from_sample(sample);
    let state = report.final_state.values();
    input.window_starts().into_iter().any(|p| {
        let w = &state[p..(p + input.stride()).min(state.len())];
        w.contains(&t) && w.contains(&lead)
    })
}

fn cells() -> Vec<(usize, usize)> {
    (2..=5).flat_map(|d| (2..=8).map(move |m| (d, m))).collect()
}

fn criterion_1() -> Outcome {
    const N: usize = 1000;
    let mut worst = Vec::new();
    for (si, solver) in SOUND.into_iter().enumerate() {
        let rs = regimes(solver);
        let failures: usize = cells()
            .into_par_iter()
            .enumerate()
            .map(|(ci, (d, m))| {
                let mut rng = rng_for(1, (si * 1000 + ci) as u64);
                (0..N)
                    .filter(|i| {
                        let (perm, q) = rs[i % rs.len()];
                        let s = tokenize(&instance(d, m, &mut rng), opts(solver, perm, q), &mut rng);
                        match solver.solve(&s) {
                            Ok(r) => !(r.valid && oracle_valid(&r, &s)),
                            Err(_) => true,
                        }
                    })
                    .count()
            })
            .sum();
        if failures > 0 {
            worst.push(format!("{solver}:{failures}"));
        }
    }
    let total = SOUND.len() * cells().len() * N;
    if worst.is_empty() {
        outcome(true, format!("{total} runs valid and oracle-confirmed across D=2..5, M=2..8"))
    } else {
        outcome(false, format!("invalid runs {}", worst.join(" ")))
    }
}

/// Probability that the fixed-offset jump lands on the target's leading edge under an edge-wise shuffle.
fn arms_constant_edge_rate(d: usize, m: usize) -> f64 {
    if m <= 3 {
        return 1.0;
    }
    let e = (d * (m - 1)) as f64;
    let k = (m - 3) as f64;
    (e - k) / e / (e - 1.0)
}

fn criterion_2() -> Outcome {
    const N: usize = 2000;
    const M: usize = 5;
    let solver = Solver::ArmsConstant;
    let arm_fail: usize = cells()
        .into_par_iter()
        .enumerate()
        .map(|(ci, (d, m))| {
            let mut rng = rng_for(2, ci as u64);
            let n = if m == M { N } else { 200 };
            (0..n)
                .filter(|i| {
                    let q = if i % 2 == 0 { QPosition::End } else { QPosition::Start };
                    let s = tokenize(&instance(d, m, &mut rng), opts(solver, PermMode::ArmWise, q), &mut rng);
                    let r = solver.solve(&s).unwrap();
                    !(r.valid && oracle_valid(&r, &s))
                })
                .count()
        })
        .sum();
    let mut pass = arm_fail == 0;
    let mut parts = vec![format!("arm-wise invalid={arm_fail}")];
    for d in 2..=5 {
        let mut rng = rng_for(2, 100 + d as u64);
        let hits = (0..N)
            .filter(|_| {
                let s = tokenize(&instance(d, M, &mut rng), opts(solver, PermMode::EdgeWise, QPosition::End), &mut rng);
                solver.solve(&s).unwrap().valid
            })
            .count();
        let p = 1.0 / d as f64;
        let sigma = (N as f64 * p * (1.0 - p)).sqrt();
        let ok = (hits as f64 - N as f64 * p).abs() <= 4.0 * sigma;
        pass &= ok;
        parts.push(format!(
            "D={d} edge-wise {:.4} vs 1/D={p:.4} (derived {:.4})",
            hits as f64 / N as f64,
            arms_constant_edge_rate(d, M)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn kqv_at(solver: Solver, m: usize, seed: u64) -> SolverReport {
    let mut rng = rng_for(3, seed);
    let s = tokenize(&instance(3, m, &mut rng), opts(solver, PermMode::ArmWise, QPosition::Start), &mut rng);
    solver.solve(&s).unwrap()
}

fn criterion_3() -> Outcome {
    let mut problems = Vec::new();
    let iters: Vec<usize> =
        [3, 5, 9, 17].iter().map(|&m| kqv_at(Solver::LogDoubling, m, m as u64).loop_iterations).collect();
    let expected: Vec<usize> = [3usize, 5, 9, 17].iter().map(|&m| ((m - 1) as f64).log2().ceil() as usize).collect();
    if iters != expected
        || iters != [1, 2, 3, 4]
        || expected.iter().zip([3, 5, 9, 17]).any(|(&e, m)| doubling_steps(m) != e)
    {
        problems.push(format!("doubling iterations {iters:?}"));
    }
    for solver in [Solver::BackTarget, Solver::BackwardTargets, Solver::ForwardStart, Solver::Causal] {
        let k: Vec<i64> = (3..=8).map(|m| kqv_at(solver, m, 10 + m as u64).kqv_count as i64).collect();
        let slope = k[1] - k[0];
        let residual: i64 = k.iter().enumerate().map(|(i, &v)| (v - (k[0] + slope * i as i64)).abs()).sum();
        if residual != 0 {
            problems.push(format!("{solver} kqv {k:?}"));
        }
    }
    let (a, b) = (kqv_at(Solver::ArmsConstant, 3, 30).kqv_count, kqv_at(Solver::ArmsConstant, 8, 31).kqv_count);
    if a != b {
        problems.push(format!("arms_constant kqv {a} vs {b}"));
    }
    if problems.is_empty() {
        outcome(true, format!("doubling iterations {iters:?}; affine kqv fits exact; arms_constant kqv {a}={b}"))
    } else {
        outcome(false, problems.join("; "))
    }
}

fn criterion_4() -> Outcome {
    const N: usize = 500;
    let solver = Solver::Causal;
    let (accepted, non_causal): (usize, usize) = cells()
        .into_par_iter()
        .enumerate()
        .map(|(ci, (d, m))| {
            let mut rng = rng_for(4, ci as u64);
            let mut acc = (0, 0);
            for i in 0..N {
                let s = tokenize(&instance(d, m, &mut rng), opts(solver, PERMS[i % 3], QPosition::Start), &mut rng);
                let r = solver.solve(&s).unwrap();
                if r.valid {
                    acc.0 += 1;
                    acc.1 += r.trace.non_causal_attention();
                }
            }
            acc
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let total = cells().len() * N;
    outcome(
        non_causal == 0 && accepted == total,
        format!("{accepted}/{total} accepted runs, {non_causal} non-causal attention records"),
    )
}

fn chc_samples(d: usize, variant: TargetVariant, n: usize, seed: u64) -> Vec<TokenizedSample> {
    let options = TokenizationOptions { target_variant: variant, ..Default::default() };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            tokenize(&instance(d, 5, &mut rng), options, &mut rng)
        })
        .collect()
}

fn criterion_5() -> Outcome {
    const N: usize = 20_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 2..=5 {
        let samples = chc_samples(d, TargetVariant::FullForward, N, 50 + d as u64);
        let report = teacher_forced_eval(Predictor::for_variant(TargetVariant::FullForward), &samples, d as u64);
        let acc = report.position_accuracy();
        let others_exact = acc.iter().enumerate().all(|(i, &a)| i == 1 || a == 1.0);
        let p = 1.0 / d as f64;
        let tol = 4.0 * (p * (1.0 - p) / N as f64).sqrt();
        let lead_ok = (acc[1] - p).abs() <= tol;
        pass &= others_exact && lead_ok;
        parts.push(format!("D={d} leading {:.4} (1/D={p:.4} tol {tol:.4}) others_exact={others_exact}", acc[1]));
    }
    for d in 2..=5 {
        let samples = chc_samples(d, TargetVariant::Reversed, N, 60 + d as u64);
        let report = teacher_forced_eval(Predictor::for_variant(TargetVariant::Reversed), &samples, d as u64);
        pass &= report.sequence_accuracy() == 1.0;
        parts.push(format!("D={d} reversed {:.4}", report.sequence_accuracy()));
    }
    outcome(pass, parts.join("; "))
}

/// Every injective assignment of ids to (start, arm slots), each paired with every final node.
fn enumerate_instances(vocab: usize, d: usize, m: usize) -> usize {
    fn rec(vocab: usize, d: usize, m: usize, chosen: &mut Vec<NodeId>, seen: &mut HashSet<TaskInstance>) {
        if chosen.len() == d * (m - 1) + 1 {
            let arms: Vec<Vec<NodeId>> = chosen[1..].chunks(m - 1).map(<[NodeId]>::to_vec).collect();
            let g = PathStarGraph::new(chosen[0], arms, vocab).unwrap();
            for t in g.final_nodes() {
                seen.insert(TaskInstance::new(g.clone(), t).unwrap());
            }
            return;
        }
        for v in 0..vocab as NodeId {
            if !chosen.contains(&v) {
                chosen.push(v);
                rec(vocab, d, m, chosen, seen);
                chosen.pop();
            }
        }
    }
    let mut seen = HashSet::new();
    rec(vocab, d, m, &mut Vec::new(), &mut seen);
    seen.len()
}

fn falling_factorial(n: usize, k: usize) -> BigUint {
    ((n - k + 1)..=n).fold(BigUint::from(1u8), |acc, x| acc * x)
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (v, d, m) in [(6, 2, 2), (7, 3, 2)] {
        let enumerated = enumerate_instances(v, d, m);
        let counted = count_instances(v, d, m).unwrap();
        pass &= counted == BigUint::from(enumerated);
        parts.push(format!("V={v} D={d} M={m}: count={counted} enumeration={enumerated}"));
    }
    let mut checked = 0;
    for v in 2..=100 {
        for d in 2..=5 {
            for m in 2..=5 {
                let nodes = d * (m - 1) + 1;
                if nodes > v {
                    continue;
                }
                checked += 1;
                pass &= count_instances(v, d, m).unwrap() == falling_factorial(v, nodes) * d;
            }
        }
    }
    parts.push(format!("{checked} shapes agree with the falling-factorial form up to V=100"));
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    const EDGE_WISE_LINE: &str = "BOS 9 1 | 10 6 | 8 2 | 2 7 | 1 3 | 4 8 | 4 5 | 5 10 | 4 9 | / 4 7 = 4 8 2 7 EOS";
    const ARM_WISE_LINE: &str = "BOS 4 9 | 9 1 | 1 3 | 4 8 | 8 2 | 2 7 | 4 5 | 5 10 | 10 6 | / 4 7 = 4 8 2 7 EOS";
    let g = PathStarGraph::new(3, vec![vec![7, 1, 6], vec![8, 0, 2], vec![4, 9, 5]], 10).unwrap();
    let example = TaskInstance::with_arm(g, 0);
    let order: Vec<(NodeId, NodeId)> = [(9, 1), (10, 6), (8, 2), (2, 7), (1, 3), (4, 8), (4, 5), (5, 10), (4, 9)]
        .iter()
        .map(|&(u, v)| (u - 1, v - 1))
        .collect();
    let edge = detokenize(&tokenize_with_edges(&example, TokenizationOptions::default(), &order)).unwrap();
    let arm_opts = TokenizationOptions { perm_mode: PermMode::ArmWise, ..Default::default() };
    let arm = detokenize(&tokenize_with_arm_order(&example, arm_opts, &[1, 0, 2])).unwrap();
    let reference = edge == EDGE_WISE_LINE && arm == ARM_WISE_LINE;
    let vocab_ok = [3, 10, 100, 1000].iter().all(|&v| Vocabulary::new(v).size() == v + 5);

    let mut all = Vec::new();
    for perm_mode in PERMS {
        for q_position in [QPosition::Start, QPosition::End] {
            for target_variant in [TargetVariant::FullForward, TargetVariant::Reversed, TargetVariant::LeadingOnly] {
                for edge_marker_count in [1, 2] {
                    for include_bos_eos in [true, false] {
                        all.push(TokenizationOptions {
                            perm_mode,
                            q_position,
                            target_variant,
                            edge_marker_count,
                            include_bos_eos,
                        });
                    }
                }
            }
        }
    }
    let failures = (0..10_000usize)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = rng_for(7, i as u64);
            let o = all[i % all.len()];
            let d = 2 + i % 4;
            let m = 2 + (i / 4) % 7;
            let s = tokenize(&instance(d, m, &mut rng), o, &mut rng);
            let line = detokenize(&s).unwrap();
            match parse_sample(&line, &Vocabulary::new(100), o.perm_mode) {
                Ok(back) => !(back.same_sample(&s) && detokenize(&back).unwrap() == line),
                Err(_) => true,
            }
        })
        .count();
    outcome(
        reference && vocab_ok && failures == 0,
        format!(
            "reference_lines={reference} vocab=|V|+5:{vocab_ok} round-trip failures {failures}/10000 over {} option sets",
            all.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut groups = 0;
    let mut bad = 0;
    let mut rejected = true;
    let mut rng = rng_for(8, 0);
    for d in 2..=5 {
        for m in 2..=6 {
            for s in 1..d {
                for _ in 0..50 {
                    let inst = instance(d, m, &mut rng);
                    let group = structured_expand(&inst, s, &mut rng, TokenizationOptions::default()).unwrap();
                    groups += 1;
                    let edges = |x: &TokenizedSample| {
                        let mut e = x.serialized_edges();
                        e.sort_unstable();
                        e
                    };
                    let first = edges(&group[0]);
                    let targets: HashSet<NodeId> = group.iter().map(|x| x.instance.target()).collect();
                    if group.len() != s + 1 || targets.len() != s + 1 || group.iter().any(|x| edges(x) != first) {
                        bad += 1;
                    }
                }
            }
            let inst = instance(d, m, &mut rng);
            rejected &= structured_expand(&inst, d, &mut rng, TokenizationOptions::default()).is_err();
        }
    }
    outcome(bad == 0 && rejected, format!("{groups} groups, {bad} malformed; S=D rejected for every shape: {rejected}"))
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pathstar::cli::run(std::iter::once("pathstar").chain(args.iter().copied()), &mut out, &mut err);
    (code, out)
}

fn criterion_9() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let data = dir.path().join(format!("data{run}.txt"));
        let report = dir.path().join(format!("report{run}.txt"));
        let (d, r) = (data.to_str().unwrap(), report.to_str().unwrap());
        let g = run_cli(&[
            "gen",
            "--D",
            "4",
            "--M",
            "6",
            "--n",
            "2000",
            "--markers",
            "2",
            "--structured",
            "2",
            "--seed",
            "9",
            "--out",
            d,
        ])
        .0;
        let s = run_cli(&["solve", "--solver", "log_doubling", "--in", d, "--out", r]).0;
        if g != 0 || s != 0 {
            return outcome(false, format!("run {run}: gen exit {g}, solve exit {s}"));
        }
        files.push((fs::read(&data).unwrap(), fs::read(&report).unwrap()));
    }
    let same = files[0] == files[1];
    outcome(same, format!("dataset {} bytes, report {} bytes, identical={same}", files[0].0.len(), files[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("solver soundness", criterion_1),
        ("arms_constant regimes", criterion_2),
        ("layer scaling", criterion_3),
        ("causality audit", criterion_4),
        ("clever-hans pattern", criterion_5),
        ("instance counting", criterion_6),
        ("tokenization fidelity", criterion_7),
        ("structured samples", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {} ({name}): {} {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
