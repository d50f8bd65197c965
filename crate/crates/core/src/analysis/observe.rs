use std::collections::BTreeSet;

use crate::engine::{ExecutionResult, Hop, ProcessStatus, Schedule, Trace, TraceEvent};
use crate::error::TraceError;
use crate::splitter::{AccessKind, Outcome, Phase, ProcessId, RegValue, Register};
use crate::topology::{NodeId, Topology, WireTarget};

/// What a checker sees of one process: the splitter visits it completed,
/// and the node of a visit it started but did not finish, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedProcess {
    pub pid: ProcessId,
    pub route: Vec<Hop>,
    pub pending_at: Option<NodeId>,
    pub status: ProcessStatus,
    pub register_ops: u32,
}

impl ObservedProcess {
    pub fn visits(&self) -> u32 {
        self.route.len() as u32 + u32::from(self.pending_at.is_some())
    }

    /// Every node this process accessed.
    pub fn touched(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.route.iter().map(|h| h.node).chain(self.pending_at)
    }
}

/// Outcome-level view of one execution, shared by the trace-based and the
/// result-based checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub processes: Vec<ObservedProcess>,
    /// Schedule that reproduces the execution; empty when unknown.
    pub schedule: Schedule,
    pub steps: u64,
}

#[derive(Clone, Copy)]
enum Position {
    Waiting(NodeId),
    Visiting(NodeId),
    Done,
}

impl Observation {
    pub fn from_result(result: &ExecutionResult) -> Self {
        let processes = result
            .processes
            .iter()
            .map(|p| ObservedProcess {
                pid: p.pid,
                route: p.route.clone(),
                pending_at: p.pending_at,
                status: p.status,
                register_ops: p.register_ops,
            })
            .collect();
        let steps = result.processes.iter().map(|p| u64::from(p.register_ops)).sum();
        Observation { processes, schedule: Schedule::default(), steps }
    }

    /// Parses the events of a trace, checking that the trace is well formed:
    /// it belongs to `topo`, every read returns the latest write to that
    /// register, and every process follows the wiring from the entry.
    /// Outcomes are not re-derived, so a trace may be well formed and still
    /// violate the splitter properties.
    pub fn from_trace(trace: &Trace, topo: &Topology) -> Result<Self, TraceError> {
        let hash = topo.hash();
        if trace.header.topology_hash != hash {
            return Err(TraceError::TopologyMismatch { trace: trace.header.topology_hash.clone(), topology: hash });
        }
        let procs = trace.header.procs as usize;
        let mut regs: Vec<(Option<ProcessId>, bool)> = vec![(None, false); topo.node_count()];
        let mut pos = vec![Position::Waiting(topo.entry()); procs];
        let mut processes: Vec<ObservedProcess> = (0..procs)
            .map(|i| ObservedProcess {
                pid: ProcessId(i as u32),
                route: Vec::new(),
                pending_at: None,
                status: ProcessStatus::Pending,
                register_ops: 0,
            })
            .collect();
        let mut schedule = Vec::new();

        for (i, event) in trace.events.iter().enumerate() {
            let line = i + 2;
            let bad = |message: String| TraceError::Malformed { line, message };
            match event {
                TraceEvent::Register(ev) => {
                    let pi = ev.pid.0 as usize;
                    if pi >= procs {
                        return Err(bad(format!("{} but header declares {procs} processes", ev.pid)));
                    }
                    if ev.node.index() >= topo.node_count() {
                        return Err(bad(format!("node {} out of range", ev.node)));
                    }
                    match pos[pi] {
                        Position::Waiting(n) if n == ev.node && ev.phase == Phase::WriteX => {
                            pos[pi] = Position::Visiting(n);
                            processes[pi].pending_at = Some(n);
                        }
                        Position::Visiting(n) if n == ev.node && ev.phase != Phase::WriteX => {}
                        Position::Done => return Err(bad(format!("{} acts after finishing", ev.pid))),
                        Position::Waiting(n) | Position::Visiting(n) => {
                            return Err(bad(format!(
                                "{} accesses node {} in phase {:?} while positioned at node {n}",
                                ev.pid, ev.node, ev.phase
                            )))
                        }
                    }
                    let expected = match ev.phase {
                        Phase::WriteX => (Register::X, AccessKind::Write),
                        Phase::ReadY => (Register::Y, AccessKind::Read),
                        Phase::WriteY => (Register::Y, AccessKind::Write),
                        Phase::ReadX => (Register::X, AccessKind::Read),
                    };
                    if (ev.register, ev.op) != expected {
                        return Err(bad(format!("phase {:?} cannot be a {:?} {:?}", ev.phase, ev.op, ev.register)));
                    }
                    let reg = &mut regs[ev.node.index()];
                    let current = match ev.register {
                        Register::X => reg.0.map_or(RegValue::Empty, RegValue::Pid),
                        Register::Y => RegValue::Flag(reg.1),
                    };
                    match (ev.register, ev.op, ev.value) {
                        (_, AccessKind::Read, v) if v != current => {
                            return Err(bad(format!("read of {:?} returned {v:?}, register holds {current:?}", ev.register)))
                        }
                        (_, AccessKind::Read, _) => {}
                        (Register::X, AccessKind::Write, RegValue::Pid(p)) if p == ev.pid => reg.0 = Some(p),
                        (Register::Y, AccessKind::Write, RegValue::Flag(f)) => reg.1 = f,
                        (_, AccessKind::Write, v) => return Err(bad(format!("{} cannot write {v:?}", ev.pid))),
                    }
                    processes[pi].register_ops += 1;
                    schedule.push(ev.pid);
                }
                TraceEvent::Outcome(ev) => {
                    let pi = ev.pid.0 as usize;
                    if pi >= procs {
                        return Err(bad(format!("{} but header declares {procs} processes", ev.pid)));
                    }
                    match pos[pi] {
                        Position::Visiting(n) if n == ev.node => {}
                        _ => return Err(bad(format!("outcome for {} at node {} without an open visit", ev.pid, ev.node))),
                    }
                    let wired = topo.next(ev.node, ev.outcome);
                    if ev.next != wired {
                        return Err(bad(format!("outcome {:?} at node {} leads to {wired:?}, trace says {:?}", ev.outcome, ev.node, ev.next)));
                    }
                    let p = &mut processes[pi];
                    p.pending_at = None;
                    p.route.push(Hop { node: ev.node, outcome: ev.outcome });
                    match wired {
                        None => {
                            p.status = ProcessStatus::Named(ev.node);
                            pos[pi] = Position::Done;
                        }
                        Some(WireTarget::NetworkExit) => {
                            p.status = ProcessStatus::Overflowed;
                            pos[pi] = Position::Done;
                        }
                        Some(WireTarget::Node(t)) => pos[pi] = Position::Waiting(t),
                    }
                    debug_assert!(ev.outcome == Outcome::Stop || p.status != ProcessStatus::Named(ev.node));
                }
            }
        }
        let steps = schedule.len() as u64;
        Ok(Observation { processes, schedule: Schedule(schedule), steps })
    }

    pub fn names(&self) -> Vec<NodeId> {
        self.processes.iter().filter_map(|p| p.status.name()).collect()
    }

    pub fn distinct_names(&self) -> BTreeSet<NodeId> {
        self.names().into_iter().collect()
    }
}
