use std::sync::Barrier;
use std::thread;

use super::{ExecutionResult, Hop, ProcessRecord, ProcessStatus};
use crate::error::EngineError;
use crate::splitter::{AtomicSplitter, ProcessId};
use crate::topology::{Topology, WireTarget};

/// Runs `procs` OS threads through fresh atomic registers, `runs` times.
///
/// Threads are released together from a barrier. No trace is kept; each
/// worker records only its own route.
pub fn execute_threads(topo: &Topology, procs: usize, runs: usize) -> Result<Vec<ExecutionResult>, EngineError> {
    if procs == 0 {
        return Err(EngineError::NoProcesses);
    }
    (0..runs).map(|run| execute_once(topo, procs, run)).collect()
}

fn execute_once(topo: &Topology, procs: usize, run: usize) -> Result<ExecutionResult, EngineError> {
    let splitters: Vec<AtomicSplitter> = (0..topo.node_count()).map(|_| AtomicSplitter::new()).collect();
    let barrier = Barrier::new(procs);
    let records = thread::scope(|s| {
        let handles: Vec<_> = (0..procs)
            .map(|i| {
                let splitters = &splitters;
                let barrier = &barrier;
                s.spawn(move || {
                    barrier.wait();
                    walk(topo, splitters, ProcessId(i as u32), run)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect::<Result<Vec<_>, _>>()
    })
    .map_err(|_| EngineError::WorkerPanic { run })?;
    Ok(ExecutionResult::from_records(topo, records))
}

fn walk(topo: &Topology, splitters: &[AtomicSplitter], pid: ProcessId, run: usize) -> ProcessRecord {
    // Small per-thread spin before each visit so runs differ in timing.
    let mut jitter = (pid.0 as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ run as u64;
    let mut node = topo.entry();
    let mut route = Vec::new();
    let mut register_ops = 0;
    let status = loop {
        jitter ^= jitter << 13;
        jitter ^= jitter >> 7;
        jitter ^= jitter << 17;
        for _ in 0..(jitter % 64) {
            std::hint::spin_loop();
        }
        let (outcome, ops) = splitters[node.index()].visit(pid);
        register_ops += ops;
        route.push(Hop { node, outcome });
        match topo.next(node, outcome) {
            None => break ProcessStatus::Named(node),
            Some(WireTarget::Node(next)) => node = next,
            Some(WireTarget::NetworkExit) => break ProcessStatus::Overflowed,
        }
        debug_assert!(route.len() <= topo.node_count());
    };
    ProcessRecord { pid, status, visits: route.len() as u32, register_ops, route, pending_at: None }
}
