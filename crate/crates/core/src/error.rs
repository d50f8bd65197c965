use thiserror::Error;

use crate::splitter::{Outcome, ProcessId};
use crate::topology::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitterError {
    #[error("{pid} stepped a splitter it already left with {outcome:?}")]
    CursorDone { pid: ProcessId, outcome: Outcome },
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("{what} must be at least 1")]
    ZeroSize { what: &'static str },
    #[error("topology has no nodes")]
    Empty,
    #[error("node_count is {declared} but {actual} nodes are listed")]
    CountMismatch { declared: usize, actual: usize },
    #[error("node at position {position} has id {id}; ids must be dense and in order")]
    NonDenseId { position: usize, id: u32 },
    #[error("entry {entry} is not a node")]
    BadEntry { entry: NodeId },
    #[error("node {node} wires {port} to missing node {target}")]
    DanglingWire { node: NodeId, port: &'static str, target: NodeId },
    #[error("wiring cycle through nodes {cycle:?}")]
    Cycle { cycle: Vec<NodeId> },
    #[error("node {node} is unreachable from the entry")]
    Unreachable { node: NodeId },
    #[error("node {node} refers to stage {stage}, but only {stages} stages are declared")]
    BadStage { node: NodeId, stage: u32, stages: usize },
    #[error("malformed topology JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Splitter(#[from] SplitterError),
    #[error("process count must be at least 1")]
    NoProcesses,
    #[error("step budget of {budget} exhausted with {unfinished} processes unfinished")]
    StepBudget { budget: u64, unfinished: usize },
    #[error("schedule step {index} names {pid}, which has already finished")]
    FinishedProcess { index: usize, pid: ProcessId },
    #[error("schedule step {index} names {pid}, but only {procs} processes take part")]
    UnknownProcess { index: usize, pid: ProcessId, procs: usize },
    #[error("refusing to explore: {reason} (estimated {estimate:.3e} interleavings, cap {cap})")]
    OverCap { reason: String, estimate: f64, cap: u64 },
    #[error("worker thread panicked in run {run}")]
    WorkerPanic { run: usize },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace is empty; a header line is required")]
    MissingHeader,
    #[error("trace was recorded on topology {trace} but checked against {topology}")]
    TopologyMismatch { trace: String, topology: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("stage {stage} has no grid region")]
    NotAGrid { stage: u32 },
    #[error("topology carries no stage or tree labels to check against")]
    Unlabeled,
    #[error(transparent)]
    Trace(#[from] TraceError),
}
