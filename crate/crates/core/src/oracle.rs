//! Brute-force ground truth: try every interval-consistent total order.
//!
//! An order can be extended by operation `o` exactly when `o` was invoked
//! strictly before every remaining operation responded. This module works on
//! the raw rational times and shares no code with the frontier engines.

use thiserror::Error;

use crate::adt::{AbstractOperation, SimulatedObject};
use crate::model::History;
use crate::verdict::Verdict;

pub const DEFAULT_CAP: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("history has {n} operations, the oracle is capped at {cap}")]
    TooLarge { n: usize, cap: usize },
}

fn extendable(h: &History, taken: &[bool]) -> Vec<usize> {
    let min_res = (0..h.len()).filter(|&i| !taken[i]).map(|i| &h.op(i).res).min();
    match min_res {
        None => Vec::new(),
        Some(cut) => (0..h.len()).filter(|&i| !taken[i] && h.op(i).inv < *cut).collect(),
    }
}

/// Iterator over every interval-consistent order of a history's operations.
pub struct Linearizations<'a> {
    h: &'a History,
    taken: Vec<bool>,
    prefix: Vec<usize>,
    /// Candidate lists per depth, with the index of the next one to try.
    frames: Vec<(Vec<usize>, usize)>,
    done: bool,
}

impl<'a> Linearizations<'a> {
    fn new(h: &'a History) -> Self {
        let taken = vec![false; h.len()];
        let root = extendable(h, &taken);
        Linearizations {
            h,
            taken,
            prefix: Vec::new(),
            frames: vec![(root, 0)],
            done: false,
        }
    }
}

impl Iterator for Linearizations<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.h.is_empty() {
            self.done = true;
            return Some(Vec::new());
        }
        loop {
            let Some((cands, next)) = self.frames.last_mut() else {
                self.done = true;
                return None;
            };
            if *next == cands.len() {
                self.frames.pop();
                if let Some(op) = self.prefix.pop() {
                    self.taken[op] = false;
                }
                continue;
            }
            let op = cands[*next];
            *next += 1;
            self.taken[op] = true;
            self.prefix.push(op);
            if self.prefix.len() == self.h.len() {
                let out = self.prefix.clone();
                self.prefix.pop();
                self.taken[op] = false;
                return Some(out);
            }
            let cands = extendable(self.h, &self.taken);
            self.frames.push((cands, 0));
        }
    }
}

pub fn enumerate_linearizations(h: &History) -> Result<Linearizations<'_>, OracleError> {
    enumerate_linearizations_capped(h, DEFAULT_CAP)
}

pub fn enumerate_linearizations_capped(h: &History, cap: usize) -> Result<Linearizations<'_>, OracleError> {
    if h.len() > cap {
        return Err(OracleError::TooLarge { n: h.len(), cap });
    }
    Ok(Linearizations::new(h))
}

pub fn oracle_check(h: &History) -> Result<Verdict, OracleError> {
    oracle_check_capped(h, DEFAULT_CAP)
}

/// Searches interval-consistent orders for one the sequential specification
/// accepts. Because specifications are prefix-closed, an order is abandoned as
/// soon as its prefix is rejected.
pub fn oracle_check_capped(h: &History, cap: usize) -> Result<Verdict, OracleError> {
    if h.len() > cap {
        return Err(OracleError::TooLarge { n: h.len(), cap });
    }
    let mut obj = SimulatedObject::new(h.kind());
    let mut taken = vec![false; h.len()];
    let mut prefix = Vec::with_capacity(h.len());
    if search(h, &mut obj, &mut taken, &mut prefix) {
        Ok(Verdict::accepted(h, &prefix))
    } else {
        Ok(Verdict::rejected())
    }
}

fn search(h: &History, obj: &mut SimulatedObject, taken: &mut [bool], prefix: &mut Vec<usize>) -> bool {
    if prefix.len() == h.len() {
        return true;
    }
    for op in extendable(h, taken) {
        if !obj.apply(&AbstractOperation::from(h.op(op))) {
            continue;
        }
        taken[op] = true;
        prefix.push(op);
        if search(h, obj, taken, prefix) {
            return true;
        }
        prefix.pop();
        taken[op] = false;
        obj.undo().expect("journal holds the applied operation");
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdtKind, Method, Operation, Value};

    #[test]
    fn order_counts() {
        let h = History::new(
            AdtKind::Queue,
            vec![
                Operation::at("enq", Method::Enq, Value::Concrete(3), 1, 3),
                Operation::at("deq", Method::Deq, Value::Concrete(3), 2, 4),
            ],
        )
        .unwrap();
        let orders: Vec<_> = enumerate_linearizations(&h).unwrap().collect();
        assert_eq!(orders, vec![vec![0, 1], vec![1, 0]]);

        let seq = History::new(
            AdtKind::Counter,
            vec![
                Operation::at("a", Method::Inc, Value::Empty, 1, 2),
                Operation::at("b", Method::Inc, Value::Empty, 3, 4),
            ],
        )
        .unwrap();
        assert_eq!(enumerate_linearizations(&seq).unwrap().count(), 1);

        let empty = History::empty(AdtKind::Stack);
        assert_eq!(
            enumerate_linearizations(&empty).unwrap().collect::<Vec<_>>(),
            vec![Vec::<usize>::new()]
        );
    }

    #[test]
    fn all_concurrent_gives_factorial() {
        let h = History::new(
            AdtKind::Counter,
            (0..5)
                .map(|i| Operation::at(format!("{i}"), Method::Inc, Value::Empty, 0, 1))
                .collect(),
        )
        .unwrap();
        assert_eq!(enumerate_linearizations(&h).unwrap().count(), 120);
    }

    #[test]
    fn verdicts() {
        let pq = History::new(
            AdtKind::PriorityQueue,
            vec![
                Operation::at("1", Method::Enq, Value::Concrete(1), 1, 4),
                Operation::at("2", Method::Enq, Value::Concrete(2), 2, 5),
                Operation::at("3", Method::Enq, Value::Concrete(3), 3, 6),
                Operation::at("4", Method::Deq, Value::Concrete(3), 7, 8),
            ],
        )
        .unwrap();
        assert!(oracle_check(&pq).unwrap().linearizable);

        let tau2 = History::new(
            AdtKind::Queue,
            vec![
                Operation::at("a", Method::Enq, Value::Concrete(1), 1, 2),
                Operation::at("b", Method::Deq, Value::Concrete(2), 3, 4),
                Operation::at("c", Method::Enq, Value::Concrete(2), 5, 6),
            ],
        )
        .unwrap();
        assert_eq!(oracle_check(&tau2).unwrap(), Verdict::rejected());

        let v = oracle_check(&History::empty(AdtKind::Set)).unwrap();
        assert!(v.linearizable);
        assert_eq!(v.witness, Some(vec![]));
    }

    #[test]
    fn cap() {
        let h = History::new(
            AdtKind::Counter,
            (0..11)
                .map(|i| Operation::at(format!("{i}"), Method::Inc, Value::Empty, 2 * i, 2 * i + 1))
                .collect(),
        )
        .unwrap();
        assert_eq!(oracle_check(&h).unwrap_err(), OracleError::TooLarge { n: 11, cap: 10 });
        assert!(oracle_check_capped(&h, 11).unwrap().linearizable);
    }
}
