//! Exhaustive enumeration of interleavings for small instances.
//!
//! The explorer walks the tree of scheduler choices depth first. With
//! memoization on, states that were already explored are not expanded
//! again: the state key covers registers, positions, cursors and every
//! process's route so far, which is everything the checks look at, so each
//! distinct terminal state is checked once and stands for all the
//! interleavings that reach it. Interleavings are still counted exactly.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{replay_with, Machine, ProcessStatus, Schedule};
use crate::analysis::{Checker, Observation, Violation};
use crate::error::EngineError;
use crate::splitter::ProcessId;
use crate::topology::Topology;

/// Violations kept in a report; further ones are only counted.
const KEPT_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// With memoization: most distinct states to visit. Without: most
    /// interleavings (upper estimate) to accept.
    pub cap: u64,
    pub memoize: bool,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { cap: 5_000_000, memoize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub processes: usize,
    /// Exact number of complete interleavings.
    pub interleavings: u128,
    /// States expanded (search-tree nodes without memoization).
    pub states: u64,
    /// Distinct final states checked.
    pub terminal_states: u64,
    pub outcome_vectors: BTreeSet<Vec<ProcessStatus>>,
    pub min_stops: usize,
    pub max_stops: usize,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Upper estimate of the interleaving count: the multinomial coefficient
/// for `procs` programs of `4 × depth` steps each.
pub fn interleaving_estimate(depth: u32, procs: usize) -> f64 {
    let per = 4.0 * f64::from(depth);
    let mut log = ln_factorial(per * procs as f64);
    for _ in 0..procs {
        log -= ln_factorial(per);
    }
    log.exp()
}

fn ln_factorial(n: f64) -> f64 {
    (1..=n as u64).map(|k| (k as f64).ln()).sum()
}

struct Explorer<'a, 't> {
    topo: &'t Topology,
    checker: &'a Checker<'t>,
    procs: usize,
    config: ExploreConfig,
    estimate: f64,
    memo: HashMap<Vec<u32>, u128>,
    report: PropertyReport,
    path: Vec<ProcessId>,
}

impl<'a, 't> Explorer<'a, 't> {
    fn dfs(&mut self, machine: &Machine<'t>) -> Result<u128, EngineError> {
        let key = self.config.memoize.then(|| machine.state_key());
        if let Some(k) = &key {
            if let Some(&count) = self.memo.get(k) {
                return Ok(count);
            }
        }
        self.report.states += 1;
        if self.config.memoize && self.report.states > self.config.cap {
            return Err(EngineError::OverCap {
                reason: format!("more than {} distinct states", self.config.cap),
                estimate: self.estimate,
                cap: self.config.cap,
            });
        }
        let active: Vec<ProcessId> = machine.active().map(|p| p.pid).collect();
        let count = if active.is_empty() {
            self.terminal(machine)?;
            1
        } else {
            let mut total = 0u128;
            for pid in active {
                let mut child = machine.clone();
                child.step(pid, self.path.len())?;
                self.path.push(pid);
                total += self.dfs(&child)?;
                self.path.pop();
            }
            total
        };
        if let Some(k) = key {
            self.memo.insert(k, count);
        }
        Ok(count)
    }

    fn terminal(&mut self, machine: &Machine<'t>) -> Result<(), EngineError> {
        let r = &mut self.report;
        r.terminal_states += 1;
        let statuses: Vec<ProcessStatus> = machine.processes().iter().map(|p| p.status()).collect();
        let stops = statuses.iter().filter(|s| s.name().is_some()).count();
        r.min_stops = r.min_stops.min(stops);
        r.max_stops = r.max_stops.max(stops);
        r.outcome_vectors.insert(statuses);

        // Check through the same path the trace-based tools use.
        let schedule = Schedule(self.path.clone());
        let (_, trace) = replay_with(self.topo, self.procs, &schedule)?;
        let obs = Observation::from_trace(&trace, self.topo).expect("engine traces are well formed");
        let found = self.checker.check(&obs).violations;
        r.violation_count += found.len() as u64;
        for v in found {
            if r.violations.len() < KEPT_VIOLATIONS {
                r.violations.push(v);
            }
        }
        Ok(())
    }
}

/// Enumerates every interleaving of `procs` processes on `topo` and checks
/// each distinct outcome against all properties.
pub fn explore_exhaustive(topo: &Topology, procs: usize, config: ExploreConfig) -> Result<PropertyReport, EngineError> {
    if procs == 0 {
        return Err(EngineError::NoProcesses);
    }
    let checker = Checker::new(topo);
    let estimate = interleaving_estimate(checker.depth(), procs);
    if !config.memoize && estimate > config.cap as f64 {
        return Err(EngineError::OverCap {
            reason: "interleaving estimate exceeds the cap".to_string(),
            estimate,
            cap: config.cap,
        });
    }
    let mut explorer = Explorer {
        topo,
        checker: &checker,
        procs,
        config,
        estimate,
        memo: HashMap::new(),
        report: PropertyReport {
            processes: procs,
            interleavings: 0,
            states: 0,
            terminal_states: 0,
            outcome_vectors: BTreeSet::new(),
            min_stops: usize::MAX,
            max_stops: 0,
            violation_count: 0,
            violations: Vec::new(),
        },
        path: Vec::new(),
    };
    let root = Machine::new(topo, procs, false);
    let total = explorer.dfs(&root)?;
    explorer.report.interleavings = total;
    Ok(explorer.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_grid, build_tree};

    #[test]
    fn solo_has_one_interleaving() {
        let t = build_tree(1).unwrap();
        let r = explore_exhaustive(&t, 1, ExploreConfig::default()).unwrap();
        assert_eq!(r.interleavings, 1);
        assert_eq!(r.outcome_vectors.len(), 1);
        assert!(r.outcome_vectors.contains(&vec![ProcessStatus::Named(t.entry())]));
        assert!(r.passed());
    }

    #[test]
    fn memo_and_plain_enumeration_agree() {
        let t = build_tree(1).unwrap();
        for procs in 2..=3 {
            let memo = explore_exhaustive(&t, procs, ExploreConfig::default()).unwrap();
            let plain = explore_exhaustive(&t, procs, ExploreConfig { cap: 1_000_000, memoize: false }).unwrap();
            assert_eq!(memo.interleavings, plain.interleavings);
            assert_eq!(memo.outcome_vectors, plain.outcome_vectors);
            assert_eq!(plain.terminal_states as u128, plain.interleavings);
            assert!(memo.passed() && plain.passed());
        }
    }

    #[test]
    fn refuses_over_cap() {
        let t = build_grid(4).unwrap();
        let err = explore_exhaustive(&t, 4, ExploreConfig { cap: 1000, memoize: false }).unwrap_err();
        assert!(matches!(err, EngineError::OverCap { .. }));
        let err = explore_exhaustive(&t, 3, ExploreConfig { cap: 50, memoize: true }).unwrap_err();
        assert!(matches!(err, EngineError::OverCap { .. }));
    }

    #[test]
    fn estimate_for_single_splitter() {
        // 8! / (4! 4!) = 70 and 12! / (4!)^3 = 34650.
        assert!((interleaving_estimate(1, 2) - 70.0).abs() < 1e-6);
        assert!((interleaving_estimate(1, 3) - 34650.0).abs() < 1e-3);
    }
}
