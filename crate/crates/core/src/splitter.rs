//! A single splitter, written as a register-level program.
//!
//! The program run by each visiting process is
//!
//! ```text
//! X := pid
//! if Y then return Right
//! Y := true
//! if X = pid then return Stop else return Down
//! ```
//!
//! Every line is one atomic access to one of the two shared registers, so a
//! scheduler can interleave processes at exactly the granularity the
//! read/write register model allows. [`SplitterState::step`] performs one
//! access; [`AtomicSplitter`] runs the same program against real atomics.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::SplitterError;

/// Identity of a participating process. Stands in for its (unbounded)
/// original name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Result of one splitter visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Stop,
    Right,
    Down,
}

/// Where a process is within the four-step splitter program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    WriteX,
    ReadY,
    WriteY,
    ReadX,
}

/// Per-process program counter for one splitter visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepCursor {
    At(Phase),
    Done(Outcome),
}

impl StepCursor {
    pub const START: StepCursor = StepCursor::At(Phase::WriteX);

    pub fn outcome(self) -> Option<Outcome> {
        match self {
            StepCursor::Done(o) => Some(o),
            StepCursor::At(_) => None,
        }
    }

    pub fn is_done(self) -> bool {
        matches!(self, StepCursor::Done(_))
    }
}

impl Default for StepCursor {
    fn default() -> Self {
        StepCursor::START
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Register {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// Value carried by a register access. `X` holds a process id or nothing;
/// `Y` holds a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegValue {
    Pid(ProcessId),
    Flag(bool),
    Empty,
}

/// One atomic register access performed by a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub phase: Phase,
    pub register: Register,
    pub kind: AccessKind,
    pub value: RegValue,
}

/// The two shared registers of one splitter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SplitterState {
    /// Last pid written to `X`; `None` before the first write.
    pub x: Option<ProcessId>,
    /// Set once by the first process to reach `WriteY`; never cleared.
    pub y: bool,
}

impl SplitterState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Performs exactly one register access on behalf of `pid` and returns
    /// the advanced cursor together with the access performed.
    pub fn step(
        &mut self,
        cursor: StepCursor,
        pid: ProcessId,
    ) -> Result<(StepCursor, Access), SplitterError> {
        let phase = match cursor {
            StepCursor::At(phase) => phase,
            StepCursor::Done(outcome) => return Err(SplitterError::CursorDone { pid, outcome }),
        };
        let (next, register, kind, value) = match phase {
            Phase::WriteX => {
                self.x = Some(pid);
                (StepCursor::At(Phase::ReadY), Register::X, AccessKind::Write, RegValue::Pid(pid))
            }
            Phase::ReadY => {
                let next = if self.y {
                    StepCursor::Done(Outcome::Right)
                } else {
                    StepCursor::At(Phase::WriteY)
                };
                (next, Register::Y, AccessKind::Read, RegValue::Flag(self.y))
            }
            Phase::WriteY => {
                self.y = true;
                (StepCursor::At(Phase::ReadX), Register::Y, AccessKind::Write, RegValue::Flag(true))
            }
            Phase::ReadX => {
                // An empty X compares unequal to every pid.
                let next = if self.x == Some(pid) {
                    StepCursor::Done(Outcome::Stop)
                } else {
                    StepCursor::Done(Outcome::Down)
                };
                let value = self.x.map_or(RegValue::Empty, RegValue::Pid);
                (next, Register::X, AccessKind::Read, value)
            }
        };
        Ok((next, Access { phase, register, kind, value }))
    }

    /// Runs `pid` to completion with no other process interleaved.
    pub fn run_to_completion(&mut self, pid: ProcessId) -> Outcome {
        let mut cursor = StepCursor::START;
        loop {
            match cursor {
                StepCursor::Done(o) => return o,
                StepCursor::At(_) => {
                    cursor = self.step(cursor, pid).expect("cursor is not done").0;
                }
            }
        }
    }
}

/// Runs one process alone through a fresh splitter.
pub fn run_solo(pid: ProcessId) -> Outcome {
    SplitterState::new().run_to_completion(pid)
}

const X_EMPTY: u64 = u64::MAX;

/// A splitter whose registers are real atomics, for multi-threaded runs.
///
/// Every access is a single `load` or `store`; there is no read-modify-write.
#[derive(Debug)]
pub struct AtomicSplitter {
    x: AtomicU64,
    y: AtomicBool,
}

impl Default for AtomicSplitter {
    fn default() -> Self {
        Self { x: AtomicU64::new(X_EMPTY), y: AtomicBool::new(false) }
    }
}

impl AtomicSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Executes the splitter program; returns the outcome and the number of
    /// register accesses performed (2 or 4).
    pub fn visit(&self, pid: ProcessId) -> (Outcome, u32) {
        let me = u64::from(pid.0);
        self.x.store(me, Ordering::SeqCst);
        if self.y.load(Ordering::SeqCst) {
            return (Outcome::Right, 2);
        }
        self.y.store(true, Ordering::SeqCst);
        if self.x.load(Ordering::SeqCst) == me {
            (Outcome::Stop, 4)
        } else {
            (Outcome::Down, 4)
        }
    }
}
