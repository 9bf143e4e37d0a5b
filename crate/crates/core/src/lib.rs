//! Linearizability monitoring for concurrent object histories.
//!
//! Every engine explores the partition states of a history: the sets of
//! operations that can form a prefix of some interval-consistent order. Their
//! number grows linearly in the history length and exponentially only in the
//! concurrency width `k`. On top of that structure:
//!
//! - [`aadt`] checks anagram-agnostic types (sets, counters, priority queues, ...)
//!   by a memoized depth-first search,
//! - [`stack`] fills a grammar production table over pairs of states,
//! - [`queue`] explores a split-sequence transition system over pairs of states,
//! - [`oracle`] enumerates all orders and serves as ground truth on small inputs.

pub mod aadt;
pub mod adt;
pub mod cli;
pub mod frontier;
pub mod generator;
pub mod model;
pub mod oracle;
pub mod queue;
pub mod stack;
pub mod verdict;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use crate::aadt::{check_aadt, AadtError};
pub use crate::adt::{AbstractOperation, SimulatedObject};
pub use crate::frontier::{build_frontier_graph, count_partition_states, FrontierGraph, PartitionState};
pub use crate::generator::{gen_history, mutate_history, GenError};
pub use crate::model::{
    concurrency_width, normalize_times, parse_history, serialize_history, AdtKind, Aux, History, HistoryError, Method,
    Operation, TimeStamp, Value,
};
pub use crate::oracle::{oracle_check, OracleError};
pub use crate::queue::{queue_check, QueueError};
pub use crate::stack::{stack_check, StackError};
pub use crate::verdict::{validate_witness, Verdict, WitnessEntry};

/// A checking algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    Aadt,
    Stack,
    Queue,
    Oracle,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Aadt, Engine::Stack, Engine::Queue, Engine::Oracle];

    /// The specialised engine for histories of `kind`.
    pub fn for_kind(kind: AdtKind) -> Engine {
        match kind {
            AdtKind::Stack => Engine::Stack,
            AdtKind::Queue => Engine::Queue,
            _ => Engine::Aadt,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Aadt => "aadt",
            Engine::Stack => "stack",
            Engine::Queue => "queue",
            Engine::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine `{s}` (expected aadt, stack, queue or oracle)"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("the {engine} engine cannot check {kind} histories")]
    EngineMismatch { engine: Engine, kind: AdtKind },
    #[error(transparent)]
    Aadt(#[from] AadtError),
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Checks `h` with the engine for its kind.
pub fn check(h: &History) -> Result<Verdict, CheckError> {
    check_with(h, Engine::for_kind(h.kind()))
}

/// Checks `h` with `engine`, which must suit the history's kind.
pub fn check_with(h: &History, engine: Engine) -> Result<Verdict, CheckError> {
    if engine != Engine::Oracle && engine != Engine::for_kind(h.kind()) {
        return Err(CheckError::EngineMismatch { engine, kind: h.kind() });
    }
    Ok(match engine {
        Engine::Aadt => check_aadt(h)?,
        Engine::Stack => stack_check(h)?,
        Engine::Queue => queue_check(h)?,
        Engine::Oracle => oracle_check(h)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatch() {
        assert_eq!(Engine::for_kind(AdtKind::Set), Engine::Aadt);
        assert_eq!("queue".parse::<Engine>(), Ok(Engine::Queue));
        assert!("fast".parse::<Engine>().is_err());
        let h = History::empty(AdtKind::Stack);
        assert!(check(&h).unwrap().linearizable);
        assert!(check_with(&h, Engine::Oracle).unwrap().linearizable);
        assert_eq!(
            check_with(&h, Engine::Queue),
            Err(CheckError::EngineMismatch {
                engine: Engine::Queue,
                kind: AdtKind::Stack
            })
        );
    }
}
