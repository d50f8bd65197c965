//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use splitnet::engine::{run, simulate};
use splitnet::{
    build_adaptive, build_full, build_grid, build_stage, build_tree, execute_threads, explore_exhaustive, Checker,
    ExecutionResult, ExploreConfig, NodeId, Observation, Policy, ProcessStatus, Report, Topology, WireTarget,
};

const SEEDS: u64 = 10_000;
const ADVERSARY_SEEDS: u64 = 100;

/// SHA-256 of the trace of `full(9)`, 9 processes, random policy, seed 42.
const GOLDEN_TRACE_SHA256: &str = "3f55fb72227661a2637874a9a093d8b35cfc6e09df8ada1230278fd0b364c0f4";

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<String, String>); 10] = [
        ("exhaustive splitter oracle (p = 2, 3)", splitter_oracle),
        ("tree(3) exhaustive, 3 processes", tree_exhaustive),
        ("grid stops any m or fewer (m = 2..8)", grid_corollary),
        ("grid counting inequalities (m = 6)", grid_inequalities),
        ("stage stops at least ceil(sqrt n)", stage_guarantee),
        ("full network renaming", full_renaming),
        ("real-thread stress, 64 threads", thread_stress),
        ("adaptive chain", adaptive_chain),
        ("deterministic traces", determinism),
        ("size ratio decreases toward 4", size_ratio),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Independent model of one splitter: four atomic steps per process over a
// shared (X, Y), every interleaving enumerated by plain recursion.

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Out {
    S,
    R,
    D,
}

fn enumerate_splitter(p: usize) -> Vec<Vec<Out>> {
    fn rec(x: Option<usize>, y: bool, pcs: &mut [u8], outs: &mut [Option<Out>], acc: &mut Vec<Vec<Out>>) {
        let mut any = false;
        for i in 0..pcs.len() {
            if outs[i].is_some() {
                continue;
            }
            any = true;
            let (pc, out) = (pcs[i], outs[i]);
            let (mut x2, mut y2) = (x, y);
            match pc {
                0 => {
                    x2 = Some(i);
                    pcs[i] = 1;
                }
                1 if y => outs[i] = Some(Out::R),
                1 => pcs[i] = 2,
                2 => {
                    y2 = true;
                    pcs[i] = 3;
                }
                _ => outs[i] = Some(if x == Some(i) { Out::S } else { Out::D }),
            }
            rec(x2, y2, pcs, outs, acc);
            pcs[i] = pc;
            outs[i] = out;
        }
        if !any {
            acc.push(outs.iter().map(|o| o.unwrap()).collect());
        }
    }
    let mut acc = Vec::new();
    rec(None, false, &mut vec![0; p], &mut vec![None; p], &mut acc);
    acc
}

fn splitter_properties_hold(outs: &[Out]) -> bool {
    let stops = outs.iter().filter(|&&o| o == Out::S).count();
    let right_side = outs.iter().any(|&o| o != Out::D);
    let down_side = outs.iter().any(|&o| o != Out::R);
    match outs.len() {
        1 => outs[0] == Out::S,
        _ => stops <= 1 && right_side && down_side,
    }
}

fn splitter_oracle() -> Result<String, String> {
    let start = Instant::now();
    let topo = build_tree(1).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    // Interleaving counts from a separate brute-force enumeration.
    for (p, frozen) in [(2usize, 54u128), (3, 11_862)] {
        let oracle = enumerate_splitter(p);
        ensure(oracle.len() as u128 == frozen, || format!("oracle found {} interleavings for p={p}", oracle.len()))?;
        let bad = oracle.iter().filter(|o| !splitter_properties_hold(o)).count();
        ensure(bad == 0, || format!("oracle: {bad} interleavings violate the splitter properties for p={p}"))?;

        let report = explore_exhaustive(&topo, p, ExploreConfig { cap: 1_000_000, memoize: false })
            .map_err(|e| e.to_string())?;
        ensure(report.interleavings == frozen, || {
            format!("explorer counted {} interleavings for p={p}, oracle {frozen}", report.interleavings)
        })?;
        ensure(report.violation_count == 0, || format!("{} violations for p={p}", report.violation_count))?;
        // Project the oracle's outcomes onto statuses: Stop names the node,
        // both other wires leave the one-splitter network.
        let projected: BTreeSet<Vec<ProcessStatus>> = oracle
            .iter()
            .map(|o| {
                o.iter()
                    .map(|&x| if x == Out::S { ProcessStatus::Named(NodeId(0)) } else { ProcessStatus::Overflowed })
                    .collect()
            })
            .collect();
        ensure(projected == report.outcome_vectors, || format!("outcome sets differ for p={p}"))?;
        if p == 2 {
            ensure(report.interleavings <= 70, || "more than 70 interleavings for p=2".into())?;
        }
        detail.push(format!("p={p}: {} interleavings, 0 violations", report.interleavings));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(detail.join("; "))
}

fn tree_exhaustive() -> Result<String, String> {
    let start = Instant::now();
    let topo = build_tree(3).map_err(|e| e.to_string())?;
    let report = explore_exhaustive(&topo, 3, ExploreConfig::default()).map_err(|e| e.to_string())?;
    ensure(report.min_stops >= 1, || format!("an interleaving with {} stops", report.min_stops))?;
    ensure(report.violation_count == 0, || format!("{} violations, first {:?}", report.violation_count, report.violations.first()))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} interleavings over {} distinct states, min stops {}",
        report.interleavings, report.states, report.min_stops
    ))
}

struct Sweep {
    runs: usize,
    failures: usize,
    first: Option<String>,
}

/// Runs `procs` processes on `topo` for `SEEDS` random seeds and
/// `ADVERSARY_SEEDS` adversary seeds, applying `judge` to each run.
fn sweep<F>(topo: &Topology, procs: usize, judge: F) -> Sweep
where
    F: Fn(&ExecutionResult, &Report) -> Result<(), String> + Sync,
{
    let checker = Checker::new(topo);
    let jobs: Vec<(Policy, u64)> = (0..SEEDS)
        .map(|s| (Policy::Random, s))
        .chain((0..ADVERSARY_SEEDS).map(|s| (Policy::Adversary, s)))
        .collect();
    let outcomes: Vec<Result<(), String>> = jobs
        .par_iter()
        .map(|&(policy, seed)| {
            let result = run(topo, procs, policy, seed).map_err(|e| format!("{} seed {seed}: {e}", policy.as_str()))?;
            let report = checker.check(&Observation::from_result(&result));
            judge(&result, &report).map_err(|e| format!("{} seed {seed}: {e}", policy.as_str()))
        })
        .collect();
    let failures: Vec<String> = outcomes.into_iter().filter_map(Result::err).collect();
    Sweep { runs: jobs.len(), failures: failures.len(), first: failures.into_iter().next() }
}

fn sweep_clean(s: Sweep) -> Result<usize, String> {
    match s.first {
        None => Ok(s.runs),
        Some(first) => Err(format!("{} of {} runs failed; first: {first}", s.failures, s.runs)),
    }
}

fn no_violations(report: &Report) -> Result<(), String> {
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(v.to_string()),
    }
}

fn grid_corollary() -> Result<String, String> {
    let mut runs = 0;
    for m in 2..=8u32 {
        let topo = build_grid(m).map_err(|e| e.to_string())?;
        runs += sweep_clean(sweep(&topo, m as usize, |result, report| {
            no_violations(report)?;
            ensure(result.overflow_count() == 0, || format!("{} overflowed", result.overflow_count()))?;
            ensure(result.names().len() == m as usize, || "not every process stopped".into())
        }))
        .map_err(|e| format!("m={m}: {e}"))?;
    }
    Ok(format!("{runs} runs, zero overflow"))
}

fn grid_inequalities() -> Result<String, String> {
    let m = 6u32;
    let topo = build_grid(m).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for p in [7usize, 12, 20] {
        let s = sweep(&topo, p, |result, report| {
            no_violations(report)?;
            // Counted from the routes, independently of the checker.
            let mut wires = BTreeSet::new();
            for proc in &result.processes {
                for hop in &proc.route {
                    if topo.next(hop.node, hop.outcome) == Some(WireTarget::NetworkExit) {
                        wires.insert((hop.node, hop.outcome));
                    }
                }
            }
            let splitters: BTreeSet<NodeId> = wires.iter().map(|w| w.0).collect();
            let stopped = result.names().len() as u32;
            if stopped < p as u32 {
                let (w, s) = (wires.len() as u32, splitters.len() as u32);
                ensure(w + stopped >= m + 1, || format!("wires {w} + stopped {stopped}"))?;
                ensure(s + stopped >= m, || format!("splitters {s} + stopped {stopped}"))?;
            }
            Ok(())
        });
        let runs = sweep_clean(s).map_err(|e| format!("p={p}: {e}"))?;
        detail.push(format!("p={p}: {runs} runs"));
    }
    Ok(detail.join("; "))
}

fn isqrt_ceil(n: u32) -> u32 {
    (1..).find(|r| r * r >= n).unwrap()
}

fn lg_ceil(n: u32) -> u32 {
    (0..).find(|&k| 1u64 << k >= u64::from(n)).unwrap()
}

fn stage_guarantee() -> Result<String, String> {
    let mut detail = Vec::new();
    for n in [4u32, 9, 16, 25] {
        let topo = build_stage(n).map_err(|e| e.to_string())?;
        let r = isqrt_ceil(n) as usize;
        let s = sweep(&topo, n as usize, |result, report| {
            no_violations(report)?;
            let stops = result.names().len();
            ensure(stops >= r, || format!("{stops} stops, need {r}"))
        });
        let runs = sweep_clean(s).map_err(|e| format!("n={n}: {e}"))?;
        detail.push(format!("n={n}: {runs} runs"));
    }
    Ok(detail.join("; "))
}

fn full_renaming() -> Result<String, String> {
    let mut detail = Vec::new();
    for n in [4u32, 9, 16, 25, 64, 100] {
        let topo = build_full(n).map_err(|e| e.to_string())?;
        let r = isqrt_ceil(n);
        let size = r * (4 * r * r + r);
        match n {
            9 => ensure(size == 117, || format!("size formula gives {size} for n=9"))?,
            16 => ensure(size == 272, || format!("size formula gives {size} for n=16"))?,
            _ => {}
        }
        ensure(topo.node_count() as u32 == size, || format!("n={n}: {} splitters, expected {size}", topo.node_count()))?;
        let ops_bound = 4 * r * (2 * r + lg_ceil(n));
        let s = sweep(&topo, n as usize, |result, report| {
            no_violations(report)?;
            ensure(result.overflow_count() == 0, || "overflow".into())?;
            let names = result.names();
            let distinct: BTreeSet<NodeId> = names.iter().copied().collect();
            ensure(names.len() == n as usize && distinct.len() == names.len(), || format!("names {names:?}"))?;
            let max = names.iter().map(|x| x.0).max().unwrap_or(0);
            ensure(max < size, || format!("name {max} >= {size}"))?;
            let ops = result.processes.iter().map(|p| p.register_ops).max().unwrap_or(0);
            ensure(ops <= ops_bound, || format!("{ops} register ops > {ops_bound}"))
        });
        let runs = sweep_clean(s).map_err(|e| format!("n={n}: {e}"))?;
        detail.push(format!("n={n}: {runs} runs, names < {size}"));
    }
    Ok(detail.join("; "))
}

fn thread_stress() -> Result<String, String> {
    let n = 64u32;
    let topo = build_full(n).map_err(|e| e.to_string())?;
    let checker = Checker::new(&topo);
    let results = execute_threads(&topo, n as usize, 100).map_err(|e| e.to_string())?;
    let mut passes = 0;
    let mut first = None;
    for (i, result) in results.iter().enumerate() {
        let report = checker.check(&Observation::from_result(result));
        let distinct: BTreeSet<NodeId> = result.names().into_iter().collect();
        if report.passed() && distinct.len() == n as usize {
            passes += 1;
        } else if first.is_none() {
            first = Some(format!("run {i}: {} distinct names, {:?}", distinct.len(), report.violations.first()));
        }
    }
    ensure(results.len() == 100 && passes == 100, || format!("{passes}/{} passed; {first:?}", results.len()))?;
    Ok(format!("{passes}/100 runs with 64 distinct names"))
}

fn adaptive_chain() -> Result<String, String> {
    let topo = build_adaptive(64).map_err(|e| e.to_string())?;
    // Sub-networks are full(1), full(2), full(4), ..., full(64) in id order.
    let sizes: Vec<u32> = (0..=6).map(|k| isqrt_ceil(1 << k)).map(|r| r * (4 * r * r + r)).collect();
    ensure(topo.node_count() as u32 == sizes.iter().sum::<u32>(), || format!("{} splitters", topo.node_count()))?;
    let mut detail = Vec::new();
    for k in [3u32, 5, 12] {
        let target = lg_ceil(k) as usize;
        let bound: u32 = sizes[..=target].iter().sum();
        let s = sweep(&topo, k as usize, |result, report| {
            no_violations(report)?;
            let names = result.names();
            ensure(names.len() == k as usize, || "not every process stopped".into())?;
            for name in names {
                let net = topo.stages()[topo.node(name).stage as usize].network;
                ensure(net.is_some_and(|w| w as usize <= target), || format!("name {name} in network {net:?}"))?;
                ensure(name.0 < bound, || format!("name {name} >= {bound}"))?;
            }
            Ok(())
        });
        let runs = sweep_clean(s).map_err(|e| format!("k={k}: {e}"))?;
        detail.push(format!("k={k}: {runs} runs, names < {bound}"));
    }
    Ok(detail.join("; "))
}

fn determinism() -> Result<String, String> {
    let topo = build_full(9).map_err(|e| e.to_string())?;
    for policy in [Policy::RoundRobin, Policy::Random, Policy::Adversary] {
        for seed in [0u64, 1, 42, 12_345] {
            let a = simulate(&topo, 9, policy, seed).map_err(|e| e.to_string())?.1.to_jsonl();
            let b = simulate(&topo, 9, policy, seed).map_err(|e| e.to_string())?.1.to_jsonl();
            ensure(a == b, || format!("{} seed {seed}: traces differ", policy.as_str()))?;
        }
    }
    let trace = simulate(&topo, 9, Policy::Random, 42).map_err(|e| e.to_string())?.1.to_jsonl();
    let digest = hex::encode(Sha256::digest(trace.as_bytes()));
    ensure(digest == GOLDEN_TRACE_SHA256, || format!("golden trace digest changed: {digest}"))?;
    Ok(format!("repeated runs identical; golden digest {}", &digest[..16]))
}

fn size_ratio() -> Result<String, String> {
    let mut ratios = Vec::new();
    for n in [4u32, 16, 64, 256, 1024] {
        let topo = build_full(n).map_err(|e| e.to_string())?;
        ratios.push(topo.node_count() as f64 / f64::from(n).powf(1.5));
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    ensure(decreasing && ratios.iter().all(|&x| x > 4.0), || format!("ratios {ratios:?}"))?;
    ensure(ratios[4] - 4.0 < 0.05, || format!("last ratio {} not near 4", ratios[4]))?;
    let shown: Vec<String> = ratios.iter().map(|x| format!("{x:.4}")).collect();
    Ok(shown.join(", "))
}
