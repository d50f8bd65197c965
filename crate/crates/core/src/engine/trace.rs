//! Trace and schedule files.
//!
//! A trace file is JSON lines: one [`TraceHeader`] line, then one line per
//! [`TraceEvent`]. A schedule file is a JSON array of pids.

use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::splitter::{AccessKind, Outcome, Phase, ProcessId, RegValue, Register};
use crate::topology::{NodeId, WireTarget};

pub const TRACE_FORMAT: &str = "splitnet-trace/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub topology_hash: String,
    pub procs: u32,
    pub policy: String,
    pub seed: u64,
}

/// One atomic register access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterEvent {
    pub pid: ProcessId,
    pub node: NodeId,
    pub phase: Phase,
    pub register: Register,
    pub op: AccessKind,
    pub value: RegValue,
}

/// A process finishing its visit to `node`. `next` is where it goes; it is
/// absent for `Stop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEvent {
    pub pid: ProcessId,
    pub node: NodeId,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<WireTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceEvent {
    Register(RegisterEvent),
    Outcome(OutcomeEvent),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

/// The pid taking each atomic step, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<ProcessId>);

impl Schedule {
    pub fn from_pids(pids: impl IntoIterator<Item = u32>) -> Self {
        Schedule(pids.into_iter().map(ProcessId).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of processes the schedule implies: one more than its largest pid.
    pub fn implied_procs(&self) -> usize {
        self.0.iter().map(|p| p.0 as usize + 1).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl Trace {
    pub fn schedule(&self) -> Schedule {
        Schedule(
            self.events
                .iter()
                .filter_map(|e| match e {
                    TraceEvent::Register(r) => Some(r.pid),
                    TraceEvent::Outcome(_) => None,
                })
                .collect(),
        )
    }

    pub fn register_events(&self) -> impl Iterator<Item = &RegisterEvent> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Register(r) => Some(r),
            TraceEvent::Outcome(_) => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::MissingHeader)?;
        let header: TraceHeader = serde_json::from_str(first)
            .map_err(|e| TraceError::Malformed { line: 1, message: format!("bad header: {e}") })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            let ev = serde_json::from_str(line)
                .map_err(|e| TraceError::Malformed { line: i + 1, message: e.to_string() })?;
            events.push(ev);
        }
        Ok(Trace { header, events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_lines_have_the_documented_fields() {
        let ev = TraceEvent::Register(RegisterEvent {
            pid: ProcessId(3),
            node: NodeId(7),
            phase: Phase::WriteX,
            register: Register::X,
            op: AccessKind::Write,
            value: RegValue::Pid(ProcessId(3)),
        });
        assert_eq!(
            serde_json::to_string(&ev).unwrap(),
            r#"{"pid":3,"node":7,"phase":"WriteX","register":"X","op":"write","value":3}"#
        );
        let ev = TraceEvent::Outcome(OutcomeEvent {
            pid: ProcessId(3),
            node: NodeId(7),
            outcome: Outcome::Down,
            next: Some(WireTarget::NetworkExit),
        });
        let s = serde_json::to_string(&ev).unwrap();
        assert_eq!(s, r#"{"pid":3,"node":7,"outcome":"Down","next":"exit"}"#);
        assert_eq!(serde_json::from_str::<TraceEvent>(&s).unwrap(), ev);
        let empty: TraceEvent =
            serde_json::from_str(r#"{"pid":0,"node":0,"phase":"ReadX","register":"X","op":"read","value":null}"#).unwrap();
        assert!(matches!(empty, TraceEvent::Register(RegisterEvent { value: RegValue::Empty, .. })));
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let text = "{\"format\":\"splitnet-trace/1\",\"topology_hash\":\"h\",\"procs\":1,\"policy\":\"random\",\"seed\":0}\n{\"pid\":0}\n";
        match Trace::from_jsonl(text) {
            Err(TraceError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Trace::from_jsonl(""), Err(TraceError::MissingHeader)));
    }

    #[test]
    fn schedule_json_is_a_pid_array() {
        let s = Schedule::from_pids([0, 1, 0]);
        assert_eq!(s.to_json(), "[0,1,0]");
        assert_eq!(Schedule::from_json("[2,0]").unwrap().implied_procs(), 3);
    }
}
