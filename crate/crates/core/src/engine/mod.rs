//! Execution engines.
//!
//! [`Machine`] holds the shared registers of every splitter in a topology
//! plus each process's position and program cursor, and advances one
//! process by one register access at a time. On top of it sit
//! [`simulate`] (scheduler-driven), [`replay`] (schedule-driven), the
//! exhaustive explorer, and a real-thread executor that bypasses the
//! machine entirely.

mod explore;
mod sched;
mod threads;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::splitter::{Outcome, Phase, ProcessId, SplitterState, StepCursor};
use crate::topology::{NodeId, Topology, WireTarget};

pub use explore::{explore_exhaustive, interleaving_estimate, ExploreConfig, PropertyReport};
pub use sched::{Policy, Scheduler};
pub use threads::execute_threads;
pub use trace::{OutcomeEvent, RegisterEvent, Schedule, Trace, TraceEvent, TraceHeader, TRACE_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    At(NodeId),
    Finished(NodeId),
    Overflowed,
}

/// One completed splitter visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub node: NodeId,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessState {
    pub pid: ProcessId,
    pub location: Location,
    pub cursor: StepCursor,
    /// Splitters entered, counted at the first access of each visit.
    pub visits: u32,
    pub register_ops: u32,
    pub route: Vec<Hop>,
}

impl ProcessState {
    pub fn is_active(&self) -> bool {
        matches!(self.location, Location::At(_))
    }

    pub fn status(&self) -> ProcessStatus {
        match self.location {
            Location::At(_) => ProcessStatus::Pending,
            Location::Finished(name) => ProcessStatus::Named(name),
            Location::Overflowed => ProcessStatus::Overflowed,
        }
    }
}

/// Final status of a process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessStatus {
    /// Stopped at this node; the node id is the acquired name.
    Named(NodeId),
    /// Left the last network without stopping.
    Overflowed,
    /// Did not finish (only possible for truncated schedules).
    Pending,
}

impl ProcessStatus {
    pub fn name(self) -> Option<NodeId> {
        match self {
            ProcessStatus::Named(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessRecord {
    pub pid: ProcessId,
    pub status: ProcessStatus,
    pub visits: u32,
    pub register_ops: u32,
    pub route: Vec<Hop>,
    /// Node of a visit that was started but not finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_at: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub processes: Vec<ProcessRecord>,
    pub stops_per_stage: BTreeMap<u32, u32>,
}

impl ExecutionResult {
    pub fn statuses(&self) -> Vec<ProcessStatus> {
        self.processes.iter().map(|p| p.status).collect()
    }

    pub fn names(&self) -> Vec<NodeId> {
        self.processes.iter().filter_map(|p| p.status.name()).collect()
    }

    pub fn overflow_count(&self) -> usize {
        self.processes.iter().filter(|p| p.status == ProcessStatus::Overflowed).count()
    }

    pub(crate) fn from_records(topo: &Topology, processes: Vec<ProcessRecord>) -> Self {
        let mut stops_per_stage = BTreeMap::new();
        for p in &processes {
            if let Some(name) = p.status.name() {
                *stops_per_stage.entry(topo.node(name).stage).or_insert(0) += 1;
            }
        }
        ExecutionResult { processes, stops_per_stage }
    }
}

/// Register-level state of a whole network run.
#[derive(Debug, Clone)]
pub struct Machine<'t> {
    topo: &'t Topology,
    splitters: Vec<SplitterState>,
    procs: Vec<ProcessState>,
    events: Option<Vec<TraceEvent>>,
    steps: u64,
}

impl<'t> Machine<'t> {
    /// `procs` processes with pids `0..procs`, all waiting at the entry.
    pub fn new(topo: &'t Topology, procs: usize, record: bool) -> Self {
        let entry = topo.entry();
        Machine {
            topo,
            splitters: vec![SplitterState::new(); topo.node_count()],
            procs: (0..procs)
                .map(|i| ProcessState {
                    pid: ProcessId(i as u32),
                    location: Location::At(entry),
                    cursor: StepCursor::START,
                    visits: 0,
                    register_ops: 0,
                    route: Vec::new(),
                })
                .collect(),
            events: record.then(Vec::new),
            steps: 0,
        }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topo
    }

    pub fn processes(&self) -> &[ProcessState] {
        &self.procs
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn active(&self) -> impl Iterator<Item = &ProcessState> {
        self.procs.iter().filter(|p| p.is_active())
    }

    pub fn is_done(&self) -> bool {
        self.active().next().is_none()
    }

    /// Advances `pid` by one register access. `index` is only used for
    /// error reporting.
    pub fn step(&mut self, pid: ProcessId, index: usize) -> Result<(), EngineError> {
        let procs = self.procs.len();
        let p = self
            .procs
            .get_mut(pid.0 as usize)
            .ok_or(EngineError::UnknownProcess { index, pid, procs })?;
        let node = match p.location {
            Location::At(node) => node,
            _ => return Err(EngineError::FinishedProcess { index, pid }),
        };
        let (cursor, access) = self.splitters[node.index()].step(p.cursor, pid)?;
        if access.phase == Phase::WriteX {
            p.visits += 1;
        }
        p.register_ops += 1;
        p.cursor = cursor;
        self.steps += 1;
        if let Some(events) = &mut self.events {
            events.push(TraceEvent::Register(RegisterEvent {
                pid,
                node,
                phase: access.phase,
                register: access.register,
                op: access.kind,
                value: access.value,
            }));
        }
        if let StepCursor::Done(outcome) = cursor {
            let next = self.topo.next(node, outcome);
            p.route.push(Hop { node, outcome });
            match next {
                None => p.location = Location::Finished(node),
                Some(WireTarget::Node(t)) => {
                    p.location = Location::At(t);
                    p.cursor = StepCursor::START;
                }
                Some(WireTarget::NetworkExit) => p.location = Location::Overflowed,
            }
            if let Some(events) = &mut self.events {
                events.push(TraceEvent::Outcome(OutcomeEvent { pid, node, outcome, next }));
            }
        }
        Ok(())
    }

    pub fn result(&self) -> ExecutionResult {
        let records = self
            .procs
            .iter()
            .map(|p| ProcessRecord {
                pid: p.pid,
                status: p.status(),
                visits: p.visits,
                register_ops: p.register_ops,
                route: p.route.clone(),
                pending_at: match (p.location, p.cursor) {
                    (Location::At(node), c) if c != StepCursor::START => Some(node),
                    _ => None,
                },
            })
            .collect();
        ExecutionResult::from_records(self.topo, records)
    }

    pub fn into_trace(self, header: TraceHeader) -> Trace {
        Trace { header, events: self.events.unwrap_or_default() }
    }

    /// Compact encoding of everything that determines future behavior and
    /// every verdict on the final state: registers, positions, cursors and
    /// routes taken so far.
    pub(crate) fn state_key(&self) -> Vec<u32> {
        let mut key = Vec::with_capacity(self.splitters.len() + self.procs.len() * 6);
        for s in &self.splitters {
            key.push(s.x.map_or(0, |p| p.0 + 1) | (u32::from(s.y) << 31));
        }
        for p in &self.procs {
            let (tag, at) = match p.location {
                Location::At(n) => (0, n.0),
                Location::Finished(n) => (1, n.0),
                Location::Overflowed => (2, 0),
            };
            let phase = match p.cursor {
                StepCursor::At(Phase::WriteX) => 0,
                StepCursor::At(Phase::ReadY) => 1,
                StepCursor::At(Phase::WriteY) => 2,
                StepCursor::At(Phase::ReadX) => 3,
                StepCursor::Done(_) => 4,
            };
            key.extend([tag, at, phase, p.route.len() as u32]);
            key.extend(p.route.iter().map(|h| h.node.0 * 4 + h.outcome as u32));
        }
        key
    }
}

fn header(topo: &Topology, procs: usize, policy: &str, seed: u64) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT.to_string(),
        topology_hash: topo.hash(),
        procs: procs as u32,
        policy: policy.to_string(),
        seed,
    }
}

/// Step budget after which a run is declared broken: twice the most steps
/// any correct run can take.
pub fn step_budget(topo: &Topology, procs: usize) -> u64 {
    8 * topo.node_count() as u64 * procs as u64
}

fn drive(machine: &mut Machine<'_>, scheduler: &mut dyn Scheduler) -> Result<(), EngineError> {
    let budget = step_budget(machine.topo, machine.procs.len());
    while !machine.is_done() {
        if machine.steps >= budget {
            let unfinished = machine.active().count();
            return Err(EngineError::StepBudget { budget, unfinished });
        }
        let pid = scheduler.pick(machine);
        let index = machine.steps as usize;
        machine.step(pid, index)?;
    }
    Ok(())
}

/// Runs `procs` processes through `topo` to completion under `policy`,
/// recording every access.
pub fn simulate(
    topo: &Topology,
    procs: usize,
    policy: Policy,
    seed: u64,
) -> Result<(ExecutionResult, Trace), EngineError> {
    if procs == 0 {
        return Err(EngineError::NoProcesses);
    }
    let mut machine = Machine::new(topo, procs, true);
    drive(&mut machine, policy.scheduler(seed).as_mut())?;
    let result = machine.result();
    Ok((result, machine.into_trace(header(topo, procs, policy.as_str(), seed))))
}

/// Like [`simulate`] without recording a trace.
pub fn run(topo: &Topology, procs: usize, policy: Policy, seed: u64) -> Result<ExecutionResult, EngineError> {
    if procs == 0 {
        return Err(EngineError::NoProcesses);
    }
    let mut machine = Machine::new(topo, procs, false);
    drive(&mut machine, policy.scheduler(seed).as_mut())?;
    Ok(machine.result())
}

/// Re-executes a schedule. The process count is implied by the largest pid.
pub fn replay(topo: &Topology, schedule: &Schedule) -> Result<(ExecutionResult, Trace), EngineError> {
    replay_with(topo, schedule.implied_procs().max(1), schedule)
}

/// Re-executes a schedule with an explicit process count. Processes the
/// schedule never finishes are reported as pending.
pub fn replay_with(
    topo: &Topology,
    procs: usize,
    schedule: &Schedule,
) -> Result<(ExecutionResult, Trace), EngineError> {
    if procs == 0 {
        return Err(EngineError::NoProcesses);
    }
    let mut machine = Machine::new(topo, procs, true);
    for (index, &pid) in schedule.0.iter().enumerate() {
        machine.step(pid, index)?;
    }
    let result = machine.result();
    Ok((result, machine.into_trace(header(topo, procs, "replay", 0))))
}
