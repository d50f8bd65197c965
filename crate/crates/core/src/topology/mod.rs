//! Immutable splitter networks.
//!
//! A [`Topology`] is a DAG of splitter nodes. Each node has a `Right` and a
//! `Down` port, each wired either to another node or off the network. Node
//! ids are dense, start at zero, and double as the names handed out to
//! processes that stop at them.
//!
//! Every node also carries a label: the stage it belongs to and its position
//! inside that stage's grid or tree. Stages optionally record the process
//! budget `n` they were built for, and stages belonging to one full network
//! share a network index. The checks in [`crate::analysis`] rely on these.

mod build;
mod io;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::TopologyError;
use crate::splitter::Outcome;

pub use build::{
    build_adaptive, build_full, build_grid, build_stage, build_stage_with, build_tree,
    ceil_log2, ceil_sqrt, TreeAttachment,
};
pub use io::ExportFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireTarget {
    Node(NodeId),
    NetworkExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Port {
    Right,
    Down,
}

impl Port {
    pub fn name(self) -> &'static str {
        match self {
            Port::Right => "right",
            Port::Down => "down",
        }
    }

    pub fn from_outcome(outcome: Outcome) -> Option<Port> {
        match outcome {
            Outcome::Right => Some(Port::Right),
            Outcome::Down => Some(Port::Down),
            Outcome::Stop => None,
        }
    }
}

/// Position of a node inside its stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Grid cell `(i, j)`; `Right` leads to `(i+1, j)`, `Down` to `(i, j+1)`.
    Grid { i: u32, j: u32 },
    /// Heap position `pos` of tree number `tree` within the stage.
    Tree { tree: u32, pos: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub right: WireTarget,
    pub down: WireTarget,
    pub region: Region,
    pub stage: u32,
}

impl Node {
    pub fn port(&self, port: Port) -> WireTarget {
        match port {
            Port::Right => self.right,
            Port::Down => self.down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageInfo {
    /// Process budget the stage was built for; `None` for bare grids/trees.
    pub n: Option<u32>,
    /// Index into [`Topology::networks`] when the stage is part of one.
    pub network: Option<u32>,
}

/// A full network: `⌈√n⌉` chained stages that together rename `n` processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    entry: NodeId,
    nodes: Vec<Node>,
    stages: Vec<StageInfo>,
    networks: Vec<NetworkInfo>,
}

/// Summary returned by [`Topology::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub splitter_count: usize,
    /// Longest entry-to-exit path, counted in splitter visits.
    pub depth: u32,
    pub stages: Vec<StageReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u32,
    pub n: Option<u32>,
    pub network: Option<u32>,
    pub splitters: usize,
    /// Longest path through this stage alone.
    pub depth: u32,
}

impl Topology {
    pub(crate) fn from_parts(
        entry: NodeId,
        nodes: Vec<Node>,
        stages: Vec<StageInfo>,
        networks: Vec<NetworkInfo>,
    ) -> Self {
        Self { entry, nodes, stages, networks }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn entry(&self) -> NodeId {
        self.entry
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = (NodeId, &Node)> + '_ {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn stages(&self) -> &[StageInfo] {
        &self.stages
    }

    pub fn networks(&self) -> &[NetworkInfo] {
        &self.networks
    }

    /// Where a process leaving `node` with `outcome` goes next. `None` for `Stop`.
    pub fn next(&self, node: NodeId, outcome: Outcome) -> Option<WireTarget> {
        Port::from_outcome(outcome).map(|p| self.node(node).port(p))
    }

    /// Number of wires leaving the network.
    pub fn exit_wire_count(&self) -> usize {
        self.nodes
            .iter()
            .flat_map(|n| [n.right, n.down])
            .filter(|w| *w == WireTarget::NetworkExit)
            .count()
    }

    /// Checks structure and computes splitter count and depth.
    pub fn validate(&self) -> Result<BuildReport, TopologyError> {
        if self.nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        let count = self.nodes.len();
        if self.entry.index() >= count {
            return Err(TopologyError::BadEntry { entry: self.entry });
        }
        for (id, node) in self.nodes() {
            for port in [Port::Right, Port::Down] {
                if let WireTarget::Node(t) = node.port(port) {
                    if t.index() >= count {
                        return Err(TopologyError::DanglingWire { node: id, port: port.name(), target: t });
                    }
                }
            }
            if node.stage as usize >= self.stages.len() {
                return Err(TopologyError::BadStage {
                    node: id,
                    stage: node.stage,
                    stages: self.stages.len(),
                });
            }
        }
        let order = self.topological_order()?;
        let reachable = self.reachable_from(self.entry);
        if let Some(i) = reachable.iter().position(|r| !r) {
            return Err(TopologyError::Unreachable { node: NodeId(i as u32) });
        }

        let depth = self.longest_paths(&order, |_, _| true)[self.entry.index()];
        let mut stages = Vec::with_capacity(self.stages.len());
        for (s, info) in self.stages.iter().enumerate() {
            let s = s as u32;
            let members: Vec<NodeId> = self.nodes().filter(|(_, n)| n.stage == s).map(|(id, _)| id).collect();
            let stage_depth = match members.first() {
                Some(first) => {
                    let within = self.longest_paths(&order, |from, to| {
                        self.node(from).stage == s && self.node(to).stage == s
                    });
                    within[first.index()]
                }
                None => 0,
            };
            stages.push(StageReport {
                stage: s,
                n: info.n,
                network: info.network,
                splitters: members.len(),
                depth: stage_depth,
            });
        }
        Ok(BuildReport { splitter_count: count, depth, stages })
    }

    fn successors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let n = self.node(id);
        [n.right, n.down].into_iter().filter_map(|w| match w {
            WireTarget::Node(t) => Some(t),
            WireTarget::NetworkExit => None,
        })
    }

    /// Reverse postorder of an iterative DFS over all nodes, or the first
    /// cycle found.
    fn topological_order(&self) -> Result<Vec<NodeId>, TopologyError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Closed,
        }
        let count = self.nodes.len();
        let mut mark = vec![Mark::New; count];
        let mut post = Vec::with_capacity(count);
        for root in 0..count {
            if mark[root] != Mark::New {
                continue;
            }
            // (node, next successor index to try)
            let mut stack: Vec<(NodeId, usize)> = vec![(NodeId(root as u32), 0)];
            mark[root] = Mark::Open;
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                let succ: Vec<NodeId> = self.successors(v).collect();
                if *k < succ.len() {
                    let w = succ[*k];
                    *k += 1;
                    match mark[w.index()] {
                        Mark::New => {
                            mark[w.index()] = Mark::Open;
                            stack.push((w, 0));
                        }
                        Mark::Open => {
                            let start = stack.iter().position(|(u, _)| *u == w).unwrap_or(0);
                            let cycle = stack[start..].iter().map(|(u, _)| *u).collect();
                            return Err(TopologyError::Cycle { cycle });
                        }
                        Mark::Closed => {}
                    }
                } else {
                    mark[v.index()] = Mark::Closed;
                    post.push(v);
                    stack.pop();
                }
            }
        }
        post.reverse();
        Ok(post)
    }

    fn reachable_from(&self, start: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[start.index()] = true;
        while let Some(v) = stack.pop() {
            for w in self.successors(v) {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Longest path (in nodes) from each node, following only edges accepted
    /// by `follow`.
    fn longest_paths(&self, order: &[NodeId], follow: impl Fn(NodeId, NodeId) -> bool) -> Vec<u32> {
        let mut best = vec![0u32; self.nodes.len()];
        for &v in order.iter().rev() {
            let tail = self
                .successors(v)
                .filter(|&w| follow(v, w))
                .map(|w| best[w.index()])
                .max()
                .unwrap_or(0);
            best[v.index()] = 1 + tail;
        }
        best
    }

    /// Groups node ids by stage and region, for the property checks.
    pub fn regions(&self) -> Regions {
        let mut grids: BTreeMap<u32, GridRegion> = BTreeMap::new();
        let mut trees: BTreeMap<(u32, u32), TreeRegion> = BTreeMap::new();
        for (id, node) in self.nodes() {
            match node.region {
                Region::Grid { i, j } => {
                    let g = grids.entry(node.stage).or_insert_with(|| GridRegion {
                        stage: node.stage,
                        entry: id,
                        side: 0,
                        nodes: Vec::new(),
                        anti_diagonal: Vec::new(),
                    });
                    if i == 0 && j == 0 {
                        g.entry = id;
                    }
                    g.side = g.side.max(i + j + 1);
                    g.nodes.push(id);
                }
                Region::Tree { tree, pos } => {
                    let t = trees.entry((node.stage, tree)).or_insert_with(|| TreeRegion {
                        stage: node.stage,
                        tree,
                        root: id,
                        nodes: Vec::new(),
                    });
                    if pos == 0 {
                        t.root = id;
                    }
                    t.nodes.push(id);
                }
            }
        }
        for g in grids.values_mut() {
            let side = g.side;
            g.anti_diagonal = g
                .nodes
                .iter()
                .copied()
                .filter(|&id| matches!(self.node(id).region, Region::Grid { i, j } if i + j + 1 == side))
                .collect();
        }
        let mut stage_entries = BTreeMap::new();
        for (id, node) in self.nodes() {
            stage_entries.entry(node.stage).or_insert(id);
        }
        Regions {
            grids: grids.into_values().collect(),
            trees: trees.into_values().collect(),
            stage_entries,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridRegion {
    pub stage: u32,
    pub entry: NodeId,
    pub side: u32,
    pub nodes: Vec<NodeId>,
    /// Cells with `i + j = side - 1`; their ports are the grid's output wires.
    pub anti_diagonal: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct TreeRegion {
    pub stage: u32,
    pub tree: u32,
    pub root: NodeId,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Regions {
    pub grids: Vec<GridRegion>,
    pub trees: Vec<TreeRegion>,
    /// Lowest node id of each stage, which is where the stage is entered.
    pub stage_entries: BTreeMap<u32, NodeId>,
}
