//! Splitter networks for shared-memory renaming.
//!
//! Processes with arbitrary distinct ids enter a network of splitters, each
//! built from two read/write registers, and leave holding the id of the
//! splitter where they stopped as their new name. This crate provides
//!
//! * [`splitter`]: the four-step register program of one splitter;
//! * [`topology`]: builders for triangular grids, binary trees, blocker
//!   stages, the staged renaming network and its adaptive chain, with
//!   validation and JSON/DOT export;
//! * [`engine`]: a step-level simulator with pluggable schedulers, schedule
//!   replay, an exhaustive interleaving explorer, and a real-thread executor;
//! * [`analysis`]: checks of every guaranteed property against traces and
//!   results, plus metrics.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod splitter;
pub mod topology;

pub use analysis::{Checker, Metrics, Observation, Report, Violation, ViolationKind};
pub use engine::{
    execute_threads, explore_exhaustive, replay, simulate, ExecutionResult, ExploreConfig, Policy, ProcessStatus,
    PropertyReport, Schedule, Trace,
};
pub use error::{AnalysisError, EngineError, SplitterError, TopologyError, TraceError};
pub use splitter::{Outcome, ProcessId};
pub use topology::{
    build_adaptive, build_full, build_grid, build_stage, build_tree, BuildReport, NodeId, Topology, WireTarget,
};
