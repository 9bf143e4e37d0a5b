//! Depth-first search over the frontier graph for anagram-agnostic types.
//!
//! For these types every legal linearization of a partition state leads to the
//! same abstract state, so one representative per state suffices and a state
//! that failed once never needs to be expanded again.

use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::adt::{AbstractOperation, SimulatedObject};
use crate::frontier::{Frontier, StateKey};
use crate::model::{AdtKind, History};
use crate::verdict::Verdict;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AadtError {
    #[error("{0} is not an anagram-agnostic data type")]
    NotAadt(AdtKind),
}

#[derive(Clone, Copy, Debug)]
pub struct AadtOptions {
    /// Skip partition states that were already expanded.
    pub memoize: bool,
}

impl Default for AadtOptions {
    fn default() -> Self {
        AadtOptions { memoize: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AadtStats {
    /// Distinct partition states expanded.
    pub states_visited: usize,
    /// Successful operation applications (including re-expansions without memoization).
    pub applications: usize,
}

pub fn check_aadt(h: &History) -> Result<Verdict, AadtError> {
    check_aadt_with(h, AadtOptions::default()).map(|(v, _)| v)
}

pub fn check_aadt_with(h: &History, opts: AadtOptions) -> Result<(Verdict, AadtStats), AadtError> {
    if !h.kind().is_aadt() {
        return Err(AadtError::NotAadt(h.kind()));
    }
    let frontier = Frontier::new(h);
    let mut obj = SimulatedObject::new(h.kind());
    let mut visited: FxHashSet<StateKey> = FxHashSet::default();
    let mut stats = AadtStats::default();

    struct Frame {
        key: StateKey,
        succ: Vec<(usize, StateKey)>,
        next: usize,
    }
    let source = frontier.source();
    visited.insert(source.clone());
    stats.states_visited = 1;
    let mut path: Vec<usize> = Vec::new();
    let mut stack = vec![Frame {
        succ: frontier.successors(&source),
        key: source,
        next: 0,
    }];

    while let Some(top) = stack.last_mut() {
        if frontier.is_sink(&top.key) {
            return Ok((Verdict::accepted(h, &path), stats));
        }
        let Some((op, next)) = top.succ.get(top.next).cloned() else {
            stack.pop();
            if !path.is_empty() {
                path.pop();
                obj.undo().expect("applied operation on the journal");
            }
            continue;
        };
        top.next += 1;
        if opts.memoize && visited.contains(&next) {
            continue;
        }
        if !obj.apply(&AbstractOperation::from(h.op(op))) {
            continue;
        }
        stats.applications += 1;
        if visited.insert(next.clone()) {
            stats.states_visited += 1;
        }
        path.push(op);
        stack.push(Frame {
            succ: frontier.successors(&next),
            key: next,
            next: 0,
        });
    }
    Ok((Verdict::rejected(), stats))
}
