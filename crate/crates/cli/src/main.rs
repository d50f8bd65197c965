//! `splitnet`: build splitter networks, run and explore them, and check the
//! results.
//!
//! Exit codes: 0 when every check passes, 1 on a property violation, 2 on a
//! usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use splitnet::analysis::{check_trace, Checker, Observation};
use splitnet::engine::{replay_with, simulate, ProcessStatus, Schedule, Trace};
use splitnet::topology::{build_stage_with, ExportFormat, TreeAttachment};
use splitnet::{
    build_adaptive, build_full, build_grid, build_tree, execute_threads, explore_exhaustive, ExploreConfig, Policy,
    Topology,
};

#[derive(Parser)]
#[command(name = "splitnet", version, about = "Splitter-network renaming: build, simulate, explore, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuildKind {
    Grid,
    Tree,
    Stage,
    Full,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExploreKind {
    Splitter,
    Tree,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attachment {
    Merged,
    PerWire,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sched {
    RoundRobin,
    Random,
    Adversary,
}

impl From<Sched> for Policy {
    fn from(s: Sched) -> Policy {
        match s {
            Sched::RoundRobin => Policy::RoundRobin,
            Sched::Random => Policy::Random,
            Sched::Adversary => Policy::Adversary,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a topology and print its splitter count and depth.
    Build {
        #[arg(long, value_enum)]
        kind: BuildKind,
        /// Grid side or tree size (`--m`), or process budget (`--n`).
        #[arg(long, visible_aliases = ["m", "n"])]
        size: u32,
        /// Write the topology here; otherwise it goes to stdout and the
        /// build report to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Tree attachment for `stage`.
        #[arg(long, value_enum, default_value = "merged")]
        attachment: Attachment,
    },
    /// Simulate a run on a topology file and check every property.
    Run {
        #[arg(long)]
        topo: PathBuf,
        #[arg(long)]
        procs: usize,
        #[arg(long, value_enum, default_value = "random")]
        sched: Sched,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Where to write the run's schedule when a check fails.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Enumerate every interleaving of a small instance.
    Explore {
        #[arg(long, value_enum)]
        kind: ExploreKind,
        #[arg(long, default_value_t = 1)]
        size: u32,
        #[arg(long)]
        procs: usize,
        #[arg(long, default_value_t = ExploreConfig::default().cap)]
        cap: u64,
        /// Expand every interleaving instead of merging identical states.
        #[arg(long)]
        no_memo: bool,
    },
    /// Run real threads through the full network for `n` processes.
    Stress {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Re-check a stored trace, or replay a stored schedule and check it.
    Verify {
        #[arg(long)]
        topo: PathBuf,
        #[arg(long, conflicts_with = "schedule", required_unless_present = "schedule")]
        trace: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Process count for `--schedule`; defaults to the largest pid + 1.
        #[arg(long)]
        procs: Option<usize>,
    },
    /// Print metrics and violations of a stored trace as JSON.
    Report {
        #[arg(long)]
        topo: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
}

/// Failure that maps to exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CmdResult = Result<bool, InputError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Build { kind, size, out, format, attachment } => cmd_build(kind, size, out, format, attachment),
        Command::Run { topo, procs, sched, seed, trace_out, schedule_out } => {
            cmd_run(&topo, procs, sched.into(), seed, trace_out, schedule_out)
        }
        Command::Explore { kind, size, procs, cap, no_memo } => cmd_explore(kind, size, procs, cap, !no_memo),
        Command::Stress { n, runs } => cmd_stress(n, runs),
        Command::Verify { topo, trace, schedule, procs } => cmd_verify(&topo, trace, schedule, procs),
        Command::Report { topo, trace } => cmd_report(&topo, &trace),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path) -> Result<Topology, InputError> {
    Topology::from_json(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn cmd_build(kind: BuildKind, size: u32, out: Option<PathBuf>, format: Format, attachment: Attachment) -> CmdResult {
    let topo = match kind {
        BuildKind::Grid => build_grid(size),
        BuildKind::Tree => build_tree(size),
        BuildKind::Stage => build_stage_with(
            size,
            match attachment {
                Attachment::Merged => TreeAttachment::Merged,
                Attachment::PerWire => TreeAttachment::PerWire,
            },
        ),
        BuildKind::Full => build_full(size),
        BuildKind::Adaptive => build_adaptive(size),
    }?;
    let report = topo.validate()?;
    let text = topo.export(match format {
        Format::Json => ExportFormat::Json,
        Format::Dot => ExportFormat::Dot,
    });
    let summary = json!({
        "splitter_count": report.splitter_count,
        "depth": report.depth,
        "exit_wires": topo.exit_wire_count(),
        "stages": report.stages,
    });
    match out {
        Some(path) => {
            fs::write(&path, text + "\n").map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            print_json(&summary);
        }
        None => {
            println!("{text}");
            eprintln!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
        }
    }
    Ok(true)
}

fn cmd_run(
    topo_path: &Path,
    procs: usize,
    policy: Policy,
    seed: u64,
    trace_out: Option<PathBuf>,
    schedule_out: Option<PathBuf>,
) -> CmdResult {
    let topo = load_topology(topo_path)?;
    let (result, trace) = simulate(&topo, procs, policy, seed)?;
    if let Some(path) = &trace_out {
        fs::write(path, trace.to_jsonl())?;
    }
    let report = check_trace(&trace, &topo)?;
    let schedule_file = if report.passed() {
        None
    } else {
        let path = schedule_out
            .or_else(|| trace_out.as_ref().map(|t| t.with_extension("schedule.json")))
            .unwrap_or_else(|| PathBuf::from(format!("splitnet-{}-seed{seed}.schedule.json", policy.as_str())));
        fs::write(&path, trace.schedule().to_json())?;
        Some(path.display().to_string())
    };
    let names: Vec<Option<u32>> = result.processes.iter().map(|p| p.status.name().map(|n| n.0)).collect();
    print_json(&json!({
        "policy": policy.as_str(),
        "seed": seed,
        "procs": procs,
        "topology_hash": trace.header.topology_hash,
        "names": names,
        "overflowed": result.overflow_count(),
        "metrics": report.metrics,
        "violations": report.violations,
        "schedule_file": schedule_file,
    }));
    if !report.passed() {
        eprint!("{}", report.summary());
    }
    Ok(report.passed())
}

fn cmd_explore(kind: ExploreKind, size: u32, procs: usize, cap: u64, memoize: bool) -> CmdResult {
    let (topo, size) = match kind {
        ExploreKind::Splitter => (build_tree(1)?, 1),
        ExploreKind::Tree => (build_tree(size)?, size),
        ExploreKind::Grid => (build_grid(size)?, size),
    };
    let report = explore_exhaustive(&topo, procs, ExploreConfig { cap, memoize })?;
    let shown: Vec<&Vec<ProcessStatus>> = report.outcome_vectors.iter().take(32).collect();
    print_json(&json!({
        "kind": match kind { ExploreKind::Splitter => "splitter", ExploreKind::Tree => "tree", ExploreKind::Grid => "grid" },
        "size": size,
        "procs": procs,
        "memoize": memoize,
        "interleavings": report.interleavings,
        "states": report.states,
        "terminal_states": report.terminal_states,
        "distinct_outcome_vectors": report.outcome_vectors.len(),
        "outcome_vectors": shown,
        "min_stops": report.min_stops,
        "max_stops": report.max_stops,
        "violation_count": report.violation_count,
        "violations": report.violations,
    }));
    Ok(report.passed())
}

fn cmd_stress(n: u32, runs: usize) -> CmdResult {
    let topo = build_full(n)?;
    let checker = Checker::new(&topo);
    let results = execute_threads(&topo, n as usize, runs)?;
    let mut passed = 0;
    let mut max_name = None;
    let mut failures = Vec::new();
    for (run, result) in results.iter().enumerate() {
        let report = checker.check(&Observation::from_result(result));
        let names = result.names();
        let complete = names.len() == n as usize;
        max_name = max_name.max(names.iter().max().copied());
        if report.passed() && complete {
            passed += 1;
        } else {
            failures.push(json!({ "run": run, "result": result, "violations": report.violations }));
        }
    }
    print_json(&json!({
        "n": n,
        "runs": runs,
        "splitters": topo.node_count(),
        "passed": passed,
        "max_name": max_name,
        "failures": failures,
    }));
    Ok(passed == runs)
}

fn cmd_verify(topo_path: &Path, trace: Option<PathBuf>, schedule: Option<PathBuf>, procs: Option<usize>) -> CmdResult {
    let topo = load_topology(topo_path)?;
    let trace = match (trace, schedule) {
        (Some(path), _) => Trace::from_jsonl(&read(&path)?)?,
        (None, Some(path)) => {
            let schedule = Schedule::from_json(&read(&path)?)?;
            let procs = procs.unwrap_or(schedule.implied_procs()).max(1);
            replay_with(&topo, procs, &schedule)?.1
        }
        (None, None) => return Err(InputError("one of --trace or --schedule is required".into())),
    };
    let report = check_trace(&trace, &topo)?;
    print!("{}", report.summary());
    Ok(report.passed())
}

fn cmd_report(topo_path: &Path, trace_path: &Path) -> CmdResult {
    let topo = load_topology(topo_path)?;
    let trace = Trace::from_jsonl(&read(trace_path)?)?;
    let report = check_trace(&trace, &topo)?;
    print_json(&report);
    eprint!("{}", report.summary());
    Ok(true)
}
