//! Property checks and metrics over executions.
//!
//! Checks run on an [`Observation`], which can be built from a recorded
//! [`Trace`] or from an [`ExecutionResult`] (the threaded executor produces
//! no trace). A [`Checker`] caches per-topology data so the same topology
//! can be checked against many executions cheaply. Every check is a pure
//! function of the observation and the topology.

mod observe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{ExecutionResult, ProcessStatus, Schedule, Trace};
use crate::error::AnalysisError;
use crate::splitter::{Outcome, ProcessId};
use crate::topology::{ceil_sqrt, GridRegion, NodeId, Port, Regions, Topology};

pub use observe::{Observation, ObservedProcess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    SplitterProperty,
    #[serde(rename = "lemma1-wires")]
    Lemma1Wires,
    #[serde(rename = "lemma1-splitters")]
    Lemma1Splitters,
    TreeBlocker,
    StageBlocker,
    Overflow,
    DuplicateName,
    DepthBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub detail: String,
    /// Replaying this schedule reproduces the violating execution.
    pub schedule: Schedule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub names_assigned: BTreeSet<NodeId>,
    pub max_name: Option<NodeId>,
    pub finished: usize,
    pub overflowed: usize,
    pub pending: usize,
    pub per_process_visits: BTreeMap<ProcessId, u32>,
    pub per_process_register_ops: BTreeMap<ProcessId, u32>,
    pub stops_per_stage: BTreeMap<u32, u32>,
    /// Per grid, keyed by stage: distinct output wires some process took.
    pub nonempty_output_wires: BTreeMap<u32, u32>,
    /// Per grid, keyed by stage: anti-diagonal splitters some process left through.
    pub nonempty_output_splitters: BTreeMap<u32, u32>,
    pub total_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub violations: Vec<Violation>,
    pub metrics: Metrics,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let m = &self.metrics;
        let mut out = format!(
            "{} named, {} overflowed, {} pending; max name {}; {} steps; {} violation(s)\n",
            m.finished,
            m.overflowed,
            m.pending,
            m.max_name.map_or_else(|| "-".to_string(), |n| n.to_string()),
            m.total_steps,
            self.violations.len()
        );
        for v in &self.violations {
            out.push_str(&format!("  {v}\n"));
        }
        out
    }
}

/// Tallies of one grid region in one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridTally {
    pub entrants: u32,
    pub stopped: u32,
    pub nonempty_wires: u32,
    pub nonempty_splitters: u32,
    /// Some entrant is still mid-visit inside the grid.
    pub incomplete: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct RegionCount {
    entrants: u32,
    stops: u32,
    incomplete: bool,
}

/// Region membership of one node, precomputed per topology.
#[derive(Debug, Clone, Copy, Default)]
struct NodeInfo {
    stage: u32,
    network: Option<u32>,
    grid: Option<u32>,
    tree: Option<u32>,
    anti_diagonal: bool,
    grid_entry: bool,
    tree_root: bool,
    stage_entry: bool,
    network_entry: bool,
}

/// All region counts of one observation, gathered in one pass.
struct Tallies {
    grids: Vec<GridTally>,
    trees: Vec<RegionCount>,
    stages: Vec<RegionCount>,
    networks: Vec<RegionCount>,
}

/// Per-topology data reused across many checks.
pub struct Checker<'t> {
    topo: &'t Topology,
    regions: Regions,
    info: Vec<NodeInfo>,
    depth: u32,
}

impl<'t> Checker<'t> {
    pub fn new(topo: &'t Topology) -> Self {
        let depth = topo.validate().map(|r| r.depth).unwrap_or(u32::MAX);
        let regions = topo.regions();
        let mut info: Vec<NodeInfo> = topo
            .nodes()
            .map(|(_, n)| NodeInfo {
                stage: n.stage,
                network: topo.stages().get(n.stage as usize).and_then(|s| s.network),
                ..NodeInfo::default()
            })
            .collect();
        for (g, grid) in regions.grids.iter().enumerate() {
            for &id in &grid.nodes {
                info[id.index()].grid = Some(g as u32);
            }
            for &id in &grid.anti_diagonal {
                info[id.index()].anti_diagonal = true;
            }
            info[grid.entry.index()].grid_entry = true;
        }
        for (t, tree) in regions.trees.iter().enumerate() {
            for &id in &tree.nodes {
                info[id.index()].tree = Some(t as u32);
            }
            info[tree.root.index()].tree_root = true;
        }
        let mut networks_seen = BTreeSet::new();
        for (_, &entry) in regions.stage_entries.iter() {
            let i = &mut info[entry.index()];
            i.stage_entry = true;
            if let Some(w) = i.network {
                // Stages are numbered in chain order, so a network's first
                // stage entry is its entry.
                if networks_seen.insert(w) {
                    i.network_entry = true;
                }
            }
        }
        Checker { topo, regions, info, depth }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topo
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn violation(obs: &Observation, kind: ViolationKind, location: String, detail: String) -> Violation {
        Violation { kind, location, detail, schedule: obs.schedule.clone() }
    }

    fn tallies(&self, obs: &Observation) -> Tallies {
        let mut t = Tallies {
            grids: vec![GridTally::default(); self.regions.grids.len()],
            trees: vec![RegionCount::default(); self.regions.trees.len()],
            stages: vec![RegionCount::default(); self.topo.stages().len()],
            networks: vec![RegionCount::default(); self.topo.networks().len()],
        };
        let mut wires: Vec<BTreeSet<(NodeId, Port)>> = vec![BTreeSet::new(); self.regions.grids.len()];
        let mut splitters: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); self.regions.grids.len()];
        for p in &obs.processes {
            for node in p.touched() {
                let i = &self.info[node.index()];
                if i.grid_entry {
                    if let Some(g) = i.grid {
                        t.grids[g as usize].entrants += 1;
                    }
                }
                if i.tree_root {
                    if let Some(tr) = i.tree {
                        t.trees[tr as usize].entrants += 1;
                    }
                }
                if i.stage_entry {
                    t.stages[i.stage as usize].entrants += 1;
                }
                if i.network_entry {
                    if let Some(w) = i.network {
                        t.networks[w as usize].entrants += 1;
                    }
                }
            }
            if let Some(node) = p.pending_at {
                let i = &self.info[node.index()];
                if let Some(g) = i.grid {
                    t.grids[g as usize].incomplete = true;
                }
                if let Some(tr) = i.tree {
                    t.trees[tr as usize].incomplete = true;
                }
                t.stages[i.stage as usize].incomplete = true;
                if let Some(w) = i.network {
                    t.networks[w as usize].incomplete = true;
                }
            }
            for hop in &p.route {
                let i = &self.info[hop.node.index()];
                match Port::from_outcome(hop.outcome) {
                    None => {
                        if let Some(g) = i.grid {
                            t.grids[g as usize].stopped += 1;
                        }
                        if let Some(tr) = i.tree {
                            t.trees[tr as usize].stops += 1;
                        }
                        t.stages[i.stage as usize].stops += 1;
                        if let Some(w) = i.network {
                            t.networks[w as usize].stops += 1;
                        }
                    }
                    Some(port) => {
                        if let (true, Some(g)) = (i.anti_diagonal, i.grid) {
                            wires[g as usize].insert((hop.node, port));
                            splitters[g as usize].insert(hop.node);
                        }
                    }
                }
            }
        }
        for (g, tally) in t.grids.iter_mut().enumerate() {
            tally.nonempty_wires = wires[g].len() as u32;
            tally.nonempty_splitters = splitters[g].len() as u32;
        }
        t
    }

    /// At most one `Stop` per splitter; a lone complete visitor stops; with
    /// two or more visitors, not all go `Right` and not all go `Down`.
    ///
    /// A process counts as visiting once it makes its first access. The last
    /// two properties are only asserted when every visitor finished.
    pub fn splitter_properties(&self, obs: &Observation) -> Vec<Violation> {
        #[derive(Default)]
        struct Tally {
            invoked: u32,
            outcomes: Vec<Outcome>,
        }
        let mut per_node: BTreeMap<NodeId, Tally> = BTreeMap::new();
        for p in &obs.processes {
            for hop in &p.route {
                let t = per_node.entry(hop.node).or_default();
                t.invoked += 1;
                t.outcomes.push(hop.outcome);
            }
            if let Some(n) = p.pending_at {
                per_node.entry(n).or_default().invoked += 1;
            }
        }
        let mut out = Vec::new();
        for (node, t) in per_node {
            let stops = t.outcomes.iter().filter(|o| **o == Outcome::Stop).count();
            let loc = format!("node {node}");
            if stops > 1 {
                out.push(Self::violation(obs, ViolationKind::SplitterProperty, loc.clone(), format!("{stops} processes stopped")));
            }
            let complete = t.invoked as usize == t.outcomes.len();
            if !complete {
                continue;
            }
            if t.invoked == 1 && t.outcomes[0] != Outcome::Stop {
                out.push(Self::violation(
                    obs,
                    ViolationKind::SplitterProperty,
                    loc.clone(),
                    format!("solo visitor got {:?}", t.outcomes[0]),
                ));
            }
            if t.invoked >= 2 {
                let right_side = t.outcomes.iter().any(|o| matches!(o, Outcome::Stop | Outcome::Right));
                let down_side = t.outcomes.iter().any(|o| matches!(o, Outcome::Stop | Outcome::Down));
                if !right_side || !down_side {
                    out.push(Self::violation(
                        obs,
                        ViolationKind::SplitterProperty,
                        loc,
                        format!("{} visitors all got {:?}", t.invoked, t.outcomes[0]),
                    ));
                }
            }
        }
        out
    }

    /// Entrant, stop and output counts for the grid of `stage`.
    pub fn grid_tally(&self, obs: &Observation, stage: u32) -> Result<GridTally, AnalysisError> {
        let g = self
            .regions
            .grids
            .iter()
            .position(|g| g.stage == stage)
            .ok_or(AnalysisError::NotAGrid { stage })?;
        Ok(self.tallies(obs).grids[g])
    }

    /// The two counting inequalities for the grid of `stage`, asserted when
    /// some entrant leaves the grid without stopping.
    pub fn lemma1(&self, obs: &Observation, stage: u32) -> Result<Vec<Violation>, AnalysisError> {
        let g = self
            .regions
            .grids
            .iter()
            .position(|g| g.stage == stage)
            .ok_or(AnalysisError::NotAGrid { stage })?;
        Ok(self.lemma1_from(obs, &self.regions.grids[g], &self.tallies(obs).grids[g]))
    }

    fn lemma1_from(&self, obs: &Observation, grid: &GridRegion, t: &GridTally) -> Vec<Violation> {
        let m = grid.side;
        let mut out = Vec::new();
        if t.incomplete || t.stopped == t.entrants {
            return out;
        }
        let loc = format!("grid of stage {} (side {m})", grid.stage);
        if t.nonempty_wires + t.stopped < m + 1 {
            out.push(Self::violation(
                obs,
                ViolationKind::Lemma1Wires,
                loc.clone(),
                format!("{} nonempty wires + {} stopped < {}", t.nonempty_wires, t.stopped, m + 1),
            ));
        }
        if t.nonempty_splitters + t.stopped < m {
            out.push(Self::violation(
                obs,
                ViolationKind::Lemma1Splitters,
                loc,
                format!("{} nonempty output splitters + {} stopped < {m}", t.nonempty_splitters, t.stopped),
            ));
        }
        out
    }

    fn is_labeled(&self) -> bool {
        !self.regions.trees.is_empty()
            || self.topo.stages().iter().any(|s| s.n.is_some())
            || !self.topo.networks().is_empty()
    }

    /// Tree blockers stop at least one of up to `size` entrants; stages stop
    /// at least `min(k, ⌈√n⌉)` of `k ≤ n` entrants; a full network with at
    /// most `n` entrants stops all of them, at distinct splitters.
    pub fn blockers(&self, obs: &Observation) -> Result<Vec<Violation>, AnalysisError> {
        if !self.is_labeled() {
            return Err(AnalysisError::Unlabeled);
        }
        Ok(self.blockers_from(obs, &self.tallies(obs)))
    }

    fn blockers_from(&self, obs: &Observation, t: &Tallies) -> Vec<Violation> {
        let topo = self.topo;
        let mut out = Vec::new();
        for (tree, c) in self.regions.trees.iter().zip(&t.trees) {
            let size = tree.nodes.len() as u32;
            if !c.incomplete && (1..=size).contains(&c.entrants) && c.stops == 0 {
                out.push(Self::violation(
                    obs,
                    ViolationKind::TreeBlocker,
                    format!("tree {} of stage {} (root {})", tree.tree, tree.stage, tree.root),
                    format!("{} entrants into a {size}-splitter tree, none stopped", c.entrants),
                ));
            }
        }
        for (s, (info, c)) in topo.stages().iter().zip(&t.stages).enumerate() {
            let Some(n) = info.n else { continue };
            let need = c.entrants.min(ceil_sqrt(n));
            if !c.incomplete && c.entrants <= n && c.stops < need {
                out.push(Self::violation(
                    obs,
                    ViolationKind::StageBlocker,
                    format!("stage {s} (n = {n})"),
                    format!("{} entrants, {} stopped, at least {need} required", c.entrants, c.stops),
                ));
            }
        }
        for (w, (net, c)) in topo.networks().iter().zip(&t.networks).enumerate() {
            if !c.incomplete && c.entrants <= net.n && c.stops < c.entrants {
                out.push(Self::violation(
                    obs,
                    ViolationKind::Overflow,
                    format!("network {w} (n = {})", net.n),
                    format!("{} entrants but only {} stopped inside", c.entrants, c.stops),
                ));
            }
        }
        if !topo.networks().is_empty() {
            out.extend(self.names(obs));
        }
        out
    }

    /// Assigned names are pairwise distinct.
    pub fn names(&self, obs: &Observation) -> Vec<Violation> {
        let mut holders: BTreeMap<NodeId, Vec<ProcessId>> = BTreeMap::new();
        for p in &obs.processes {
            if let Some(name) = p.status.name() {
                holders.entry(name).or_default().push(p.pid);
            }
        }
        holders
            .into_iter()
            .filter(|(_, pids)| pids.len() > 1)
            .map(|(name, pids)| {
                Self::violation(obs, ViolationKind::DuplicateName, format!("name {name}"), format!("held by {pids:?}"))
            })
            .collect()
    }

    /// Visits never exceed the topology depth and each visit costs at most
    /// four register accesses.
    pub fn depth_bound(&self, obs: &Observation) -> Vec<Violation> {
        let mut out = Vec::new();
        for p in &obs.processes {
            let visits = p.visits();
            if visits > self.depth || p.register_ops > 4 * visits {
                out.push(Self::violation(
                    obs,
                    ViolationKind::DepthBound,
                    format!("process {}", p.pid),
                    format!("{visits} visits (depth {}), {} register accesses", self.depth, p.register_ops),
                ));
            }
        }
        out
    }

    pub fn metrics(&self, obs: &Observation) -> Metrics {
        self.metrics_from(obs, &self.tallies(obs))
    }

    fn metrics_from(&self, obs: &Observation, t: &Tallies) -> Metrics {
        let mut m = Metrics { total_steps: obs.steps, ..Metrics::default() };
        for p in &obs.processes {
            match p.status {
                ProcessStatus::Named(name) => {
                    m.names_assigned.insert(name);
                    m.finished += 1;
                    *m.stops_per_stage.entry(self.topo.node(name).stage).or_insert(0) += 1;
                }
                ProcessStatus::Overflowed => m.overflowed += 1,
                ProcessStatus::Pending => m.pending += 1,
            }
            m.per_process_visits.insert(p.pid, p.visits());
            m.per_process_register_ops.insert(p.pid, p.register_ops);
        }
        m.max_name = m.names_assigned.iter().next_back().copied();
        for (grid, tally) in self.regions.grids.iter().zip(&t.grids) {
            m.nonempty_output_wires.insert(grid.stage, tally.nonempty_wires);
            m.nonempty_output_splitters.insert(grid.stage, tally.nonempty_splitters);
        }
        m
    }

    /// Every applicable check plus metrics.
    pub fn check(&self, obs: &Observation) -> Report {
        let t = self.tallies(obs);
        let mut violations = self.splitter_properties(obs);
        for (grid, tally) in self.regions.grids.iter().zip(&t.grids) {
            violations.extend(self.lemma1_from(obs, grid, tally));
        }
        if self.is_labeled() {
            violations.extend(self.blockers_from(obs, &t));
        }
        if self.topo.networks().is_empty() {
            violations.extend(self.names(obs));
        }
        violations.extend(self.depth_bound(obs));
        Report { violations, metrics: self.metrics_from(obs, &t) }
    }
}

/// Splitter properties over every splitter a trace touches.
pub fn check_splitter_properties(trace: &Trace, topo: &Topology) -> Result<Vec<Violation>, AnalysisError> {
    let obs = Observation::from_trace(trace, topo)?;
    Ok(Checker::new(topo).splitter_properties(&obs))
}

pub fn check_lemma1(trace: &Trace, topo: &Topology, stage: u32) -> Result<Vec<Violation>, AnalysisError> {
    let obs = Observation::from_trace(trace, topo)?;
    Checker::new(topo).lemma1(&obs, stage)
}

pub fn check_blockers(trace: &Trace, topo: &Topology) -> Result<Vec<Violation>, AnalysisError> {
    let obs = Observation::from_trace(trace, topo)?;
    Checker::new(topo).blockers(&obs)
}

pub fn compute_metrics(trace: &Trace, topo: &Topology) -> Result<Metrics, AnalysisError> {
    let obs = Observation::from_trace(trace, topo)?;
    Ok(Checker::new(topo).metrics(&obs))
}

pub fn check_trace(trace: &Trace, topo: &Topology) -> Result<Report, AnalysisError> {
    let obs = Observation::from_trace(trace, topo)?;
    Ok(Checker::new(topo).check(&obs))
}

pub fn check_result(result: &ExecutionResult, topo: &Topology) -> Report {
    Checker::new(topo).check(&Observation::from_result(result))
}
