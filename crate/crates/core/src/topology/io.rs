//! JSON and DOT forms of a topology.

use std::fmt::Write as _;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetworkInfo, Node, NodeId, Region, StageInfo, Topology, WireTarget};
use crate::error::TopologyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

impl Serialize for WireTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            WireTarget::Node(id) => s.serialize_u32(id.0),
            WireTarget::NetworkExit => s.serialize_str("exit"),
        }
    }
}

impl<'de> Deserialize<'de> for WireTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(id) => Ok(WireTarget::Node(NodeId(id))),
            Raw::Word(w) if w == "exit" => Ok(WireTarget::NetworkExit),
            Raw::Word(w) => Err(de::Error::custom(format!("wire target must be a node id or \"exit\", got {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RegionKind {
    Grid,
    Tree,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: u32,
    right: WireTarget,
    down: WireTarget,
    region: RegionKind,
    stage: u32,
    coords: [u32; 2],
}

#[derive(Serialize, Deserialize)]
struct TopologyRecord {
    node_count: usize,
    entry: u32,
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    stages: Vec<StageInfo>,
    #[serde(default)]
    networks: Vec<NetworkInfo>,
}

impl Topology {
    fn to_record(&self) -> TopologyRecord {
        let nodes = self
            .nodes()
            .map(|(id, n)| {
                let (region, coords) = match n.region {
                    Region::Grid { i, j } => (RegionKind::Grid, [i, j]),
                    Region::Tree { tree, pos } => (RegionKind::Tree, [tree, pos]),
                };
                NodeRecord { id: id.0, right: n.right, down: n.down, region, stage: n.stage, coords }
            })
            .collect();
        TopologyRecord {
            node_count: self.node_count(),
            entry: self.entry().0,
            nodes,
            stages: self.stages().to_vec(),
            networks: self.networks().to_vec(),
        }
    }

    /// Compact JSON; this exact byte string is what [`Topology::hash`] covers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("topology serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("topology serializes")
    }

    /// Parses and validates a topology. Files without `stages` get one
    /// unparameterized stage per stage index used by the nodes.
    pub fn from_json(text: &str) -> Result<Topology, TopologyError> {
        let rec: TopologyRecord = serde_json::from_str(text)?;
        if rec.node_count != rec.nodes.len() {
            return Err(TopologyError::CountMismatch { declared: rec.node_count, actual: rec.nodes.len() });
        }
        let mut nodes = Vec::with_capacity(rec.nodes.len());
        for (position, n) in rec.nodes.into_iter().enumerate() {
            if n.id as usize != position {
                return Err(TopologyError::NonDenseId { position, id: n.id });
            }
            let region = match n.region {
                RegionKind::Grid => Region::Grid { i: n.coords[0], j: n.coords[1] },
                RegionKind::Tree => Region::Tree { tree: n.coords[0], pos: n.coords[1] },
            };
            nodes.push(Node { right: n.right, down: n.down, region, stage: n.stage });
        }
        let mut stages = rec.stages;
        if stages.is_empty() {
            let used = nodes.iter().map(|n| n.stage + 1).max().unwrap_or(0);
            stages = vec![StageInfo::default(); used as usize];
        }
        let t = Topology::from_parts(NodeId(rec.entry), nodes, stages, rec.networks);
        t.validate()?;
        Ok(t)
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph splitters {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n");
        for (id, n) in self.nodes() {
            let (label, fill) = match n.region {
                Region::Grid { i, j } => (format!("{id}\\ngrid s{} ({i},{j})", n.stage), "lightblue"),
                Region::Tree { tree, pos } => (format!("{id}\\ntree s{} t{tree}.{pos}", n.stage), "lightyellow"),
            };
            let _ = writeln!(out, "  n{id} [label=\"{label}\", style=filled, fillcolor={fill}];");
        }
        for (id, n) in self.nodes() {
            for (port, target, style) in [("R", n.right, "solid"), ("D", n.down, "dashed")] {
                match target {
                    WireTarget::Node(t) => {
                        let _ = writeln!(out, "  n{id} -> n{t} [label=\"{port}\", style={style}];");
                    }
                    WireTarget::NetworkExit => {
                        let _ = writeln!(out, "  x{id}{port} [shape=point];");
                        let _ = writeln!(out, "  n{id} -> x{id}{port} [label=\"{port}\", style={style}];");
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => self.to_json_pretty(),
            ExportFormat::Dot => self.to_dot(),
        }
    }
}
