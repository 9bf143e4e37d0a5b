//! Queue histories via the split-sequence transition system.
//!
//! A configuration `⟨α, β, v⟩` splits the sequence built so far into a
//! committed part `α` and a pending tail `β`, and tracks the value `v` at the
//! front of the queue (or ε). Here both parts are kept as sets: `S1` holds the
//! operations of `α`, `S2` those of `α · β`, and both must be partition states.
//! The rules:
//!
//! 1. register front: move `enq(w)` from `S2 \ S1` into `S1` when `v = ε`; `v := w`
//! 2. peek front: add `peek(v)` to `S2`
//! 3. dequeue front: add `deq(v)` to `S2`; `v := ε`
//! 4. empty dequeue: add `deq(ε)` to `S2` when `S1 = S2` and `v = ε`
//! 5. tail chasing: move `peek(w)` from `S2 \ S1` into `S1`
//! 6. tail chasing: move `deq(w)` from `S2 \ S1` into `S1`
//! 7. unmatched insertion: add `enq(w)` to `S2`
//!
//! The history is linearizable iff some configuration with `S2 = H` is
//! reachable from `⟨∅, ∅, ε⟩`.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::frontier::{Frontier, StateKey};
use crate::model::{AdtKind, History, Method, Value};
use crate::verdict::Verdict;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("queue engine cannot check a {0} history")]
    WrongKind(AdtKind),
    #[error("failed peek {0} is not supported by the queue engine")]
    FailedPeek(String),
    #[error("{0:?} is not a pair of nested partition states")]
    InvalidPair(Vec<usize>),
}

/// Which component a transition extends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// Moved into `S1` (rules 1, 5, 6).
    Commit(usize),
    /// Added to `S2` (rules 2, 3, 4, 7).
    Append(usize),
}

impl Step {
    pub fn op(self) -> usize {
        match self {
            Step::Commit(op) | Step::Append(op) => op,
        }
    }
}

/// One configuration over compact state keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub s1: StateKey,
    pub s2: StateKey,
    pub front: Value,
}

fn check_input(h: &History) -> Result<(), QueueError> {
    if h.kind() != AdtKind::Queue {
        return Err(QueueError::WrongKind(h.kind()));
    }
    if let Some(o) = h
        .ops()
        .iter()
        .find(|o| o.method == Method::Peek && o.value == Value::Empty)
    {
        return Err(QueueError::FailedPeek(o.id.clone()));
    }
    Ok(())
}

/// Calls `f` for every transition out of `c`.
fn for_each_transition(h: &History, f: &Frontier, c: &Config, mut emit: impl FnMut(Step, Config)) {
    f.for_each_successor(&c.s1, |op, s1| {
        if !f.contains(&c.s2, op) {
            return;
        }
        let o = h.op(op);
        let front = match o.method {
            Method::Enq if c.front == Value::Empty => o.value,
            Method::Enq => return,
            Method::Peek | Method::Deq => c.front,
            _ => return,
        };
        emit(
            Step::Commit(op),
            Config {
                s1,
                s2: c.s2.clone(),
                front,
            },
        );
    });
    f.for_each_successor(&c.s2, |op, s2| {
        let o = h.op(op);
        let tracked = c.front != Value::Empty;
        let front = match (o.method, o.value) {
            (Method::Peek, w) if tracked && w == c.front => c.front,
            (Method::Deq, Value::Empty) if !tracked && c.s1 == c.s2 => Value::Empty,
            (Method::Deq, w) if tracked && w == c.front => Value::Empty,
            (Method::Enq, _) => c.front,
            _ => return,
        };
        emit(
            Step::Append(op),
            Config {
                s1: c.s1.clone(),
                s2,
                front,
            },
        );
    });
}

/// Transitions out of `⟨s1, s2, front⟩`, with states as sorted operation indices.
#[allow(clippy::type_complexity)]
pub fn queue_transitions(
    h: &History,
    s1: &[usize],
    s2: &[usize],
    front: Value,
) -> Result<Vec<(Vec<usize>, Vec<usize>, Value)>, QueueError> {
    let f = Frontier::new(h);
    let bad = || QueueError::InvalidPair(s1.iter().chain(s2).copied().collect());
    let k1 = f.key_of(s1).map_err(|_| bad())?;
    let k2 = f.key_of(s2).map_err(|_| bad())?;
    if !f.is_state(&k1) || !f.is_state(&k2) || s1.iter().any(|&op| !f.contains(&k2, op)) {
        return Err(bad());
    }
    let c = Config { s1: k1, s2: k2, front };
    let mut out = Vec::new();
    for_each_transition(h, &f, &c, |_, t| {
        out.push((
            f.members(&t.s1).members().to_vec(),
            f.members(&t.s2).members().to_vec(),
            t.front,
        ))
    });
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    /// Distinct configurations reached.
    pub configs: usize,
    /// Transitions fired.
    pub transitions: usize,
}

pub fn queue_check(h: &History) -> Result<Verdict, QueueError> {
    queue_check_with_stats(h).map(|(v, _)| v)
}

/// Depth-first reachability over configurations, stopping at the first one
/// whose `S2` is the whole history.
pub fn queue_check_with_stats(h: &History) -> Result<(Verdict, QueueStats), QueueError> {
    check_input(h)?;
    if h.is_empty() {
        return Ok((Verdict::accepted(h, &[]), QueueStats::default()));
    }
    let f = Frontier::new(h);
    // Arena of reached configurations with the step that first reached them.
    let mut nodes: Vec<(Config, Option<(u32, Step)>)> = Vec::new();
    let mut index: FxHashMap<Config, u32> = FxHashMap::default();
    let root = Config {
        s1: f.source(),
        s2: f.source(),
        front: Value::Empty,
    };
    index.insert(root.clone(), 0);
    nodes.push((root, None));
    let mut stats = QueueStats {
        configs: 1,
        transitions: 0,
    };
    let mut todo = vec![0u32];
    let mut found = None;

    'search: while let Some(id) = todo.pop() {
        let config = nodes[id as usize].0.clone();
        let mut fresh = Vec::new();
        for_each_transition(h, &f, &config, |step, next| fresh.push((step, next)));
        stats.transitions += fresh.len();
        // Push in reverse so the first transition is expanded first.
        for (step, next) in fresh.into_iter().rev() {
            if index.contains_key(&next) {
                continue;
            }
            let nid = nodes.len() as u32;
            let done = f.is_sink(&next.s2);
            index.insert(next.clone(), nid);
            nodes.push((next, Some((id, step))));
            if done {
                found = Some(nid);
                break 'search;
            }
            todo.push(nid);
        }
    }
    stats.configs = nodes.len();

    let Some(mut at) = found else {
        return Ok((Verdict::rejected(), stats));
    };
    let mut steps = Vec::new();
    while let Some((parent, step)) = nodes[at as usize].1 {
        steps.push(step);
        at = parent;
    }
    steps.reverse();
    let order = realize(h, &steps).expect("an accepting run is realizable");
    Ok((Verdict::accepted(h, &order), stats))
}

/// A legal, interval-consistent order realizing an accepting run.
///
/// The run fixes the order in which enqueues reach the front, which dequeue
/// and which peeks belong to each of them, and where the empty dequeues fall.
/// Those facts are turned into precedence constraints:
///
/// - registered enqueues in registration order, then every unregistered enqueue
/// - each registered enqueue before its dequeue, dequeues in the same order
/// - a peek after its enqueue and the previous dequeue, before its own dequeue
/// - an empty dequeue after the dequeues so far, before the next enqueue
///
/// Any order satisfying them is legal. They are merged with the real-time
/// constraints (`a` before `b` when `a` responds no later than `b` is
/// invoked) and sorted topologically. Returns `None` if the merged relation
/// has a cycle.
pub fn realize(h: &History, steps: &[Step]) -> Option<Vec<usize>> {
    let n = h.len();
    let mut registered: Vec<usize> = Vec::new();
    let mut dequeue: Vec<Option<usize>> = Vec::new();
    let mut is_registered = vec![false; n];
    let mut peeks: Vec<(usize, usize)> = Vec::new();
    let mut empties: Vec<(usize, usize)> = Vec::new();
    for &s in steps {
        match s {
            Step::Commit(op) if h.op(op).method == Method::Enq => {
                is_registered[op] = true;
                registered.push(op);
                dequeue.push(None);
            }
            Step::Append(op) => match (h.op(op).method, h.op(op).value) {
                (Method::Peek, _) => peeks.push((op, registered.len() - 1)),
                (Method::Deq, Value::Empty) => empties.push((op, registered.len())),
                (Method::Deq, _) => *dequeue.last_mut()? = Some(op),
                _ => {}
            },
            _ => {}
        }
    }
    let unregistered: Vec<usize> = (0..n)
        .filter(|&i| h.op(i).method == Method::Enq && !is_registered[i])
        .collect();

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edge = |a: usize, b: usize| succ[a].push(b);
    for w in registered.windows(2) {
        edge(w[0], w[1]);
    }
    if let Some(&last) = registered.last() {
        for &u in &unregistered {
            edge(last, u);
        }
    }
    let deqs: Vec<usize> = dequeue.iter().flatten().copied().collect();
    for w in deqs.windows(2) {
        edge(w[0], w[1]);
    }
    for (i, d) in dequeue.iter().enumerate() {
        if let Some(d) = *d {
            edge(registered[i], d);
        }
    }
    for &(p, i) in &peeks {
        edge(registered[i], p);
        if i > 0 {
            edge(dequeue[i - 1]?, p);
        }
        if let Some(d) = dequeue[i] {
            edge(p, d);
        }
    }
    for &(e, j) in &empties {
        if j > 0 {
            edge(dequeue[j - 1]?, e);
        }
        // The queue is empty, so every later enqueue follows.
        if j < registered.len() {
            edge(e, registered[j]);
        } else {
            for &u in &unregistered {
                edge(e, u);
            }
        }
    }

    // Kahn's algorithm; an operation is also held back while some other
    // remaining operation responds no later than its invocation.
    let mut points: Vec<&crate::model::TimeStamp> = h.ops().iter().flat_map(|o| [&o.inv, &o.res]).collect();
    points.sort();
    points.dedup();
    let rank = |t| points.binary_search(&t).unwrap();
    let inv: Vec<usize> = h.ops().iter().map(|o| rank(&o.inv)).collect();
    let res: Vec<usize> = h.ops().iter().map(|o| rank(&o.res)).collect();
    let mut indegree = vec![0usize; n];
    for list in &succ {
        for &b in list {
            indegree[b] += 1;
        }
    }
    let mut remaining: BTreeSet<(usize, usize)> = (0..n).map(|i| (res[i], i)).collect();
    let mut ready: BTreeSet<(usize, usize)> = (0..n).filter(|&i| indegree[i] == 0).map(|i| (inv[i], i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&(c_inv, c)) = ready.first() {
        let blocker = remaining.iter().find(|&&(_, i)| i != c);
        if blocker.is_some_and(|&(r, _)| r <= c_inv) {
            return None;
        }
        ready.pop_first();
        remaining.remove(&(res[c], c));
        order.push(c);
        for &b in &succ[c] {
            indegree[b] -= 1;
            if indegree[b] == 0 {
                ready.insert((inv[b], b));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Every reachable configuration with its tracked front values, from an
/// exhaustive forward fill in order of `|S1| + |S2|`.
#[derive(Clone, Debug, Default)]
pub struct QueueTable {
    /// `(S1, S2)` pairs with the set of tracked values reached there.
    pub entries: FxHashMap<(StateKey, StateKey), Vec<Value>>,
    /// Transitions fired out of each `(S1, S2)` pair, over all its values.
    pub fired: FxHashMap<(StateKey, StateKey), usize>,
    pub accepts: bool,
}

pub fn queue_table(h: &History) -> Result<QueueTable, QueueError> {
    check_input(h)?;
    let f = Frontier::new(h);
    let mut table = QueueTable::default();
    if h.is_empty() {
        table.accepts = true;
        return Ok(table);
    }
    let mut level = vec![Config {
        s1: f.source(),
        s2: f.source(),
        front: Value::Empty,
    }];
    table.entries.insert((f.source(), f.source()), vec![Value::Empty]);
    while !level.is_empty() {
        let mut next_level = Vec::new();
        for c in &level {
            let mut count = 0;
            for_each_transition(h, &f, c, |_, t| {
                count += 1;
                if f.is_sink(&t.s2) {
                    table.accepts = true;
                }
                let values = table.entries.entry((t.s1.clone(), t.s2.clone())).or_default();
                if !values.contains(&t.front) {
                    values.push(t.front);
                    next_level.push(t);
                }
            });
            *table.fired.entry((c.s1.clone(), c.s2.clone())).or_default() += count;
        }
        level = next_level;
    }
    Ok(table)
}
