//! Partition states and the frontier graph.
//!
//! A set `S` of operations is a partition state when every operation in `S` was
//! invoked strictly before every operation outside `S` responded:
//! `max inv(S) < min res(H \ S)`. These are exactly the prefixes of
//! interval-consistent total orders, and the frontier graph links two states
//! when one extends the other by a single operation.
//!
//! States are stored compactly. Sort operations by response time; a state is
//! the longest prefix of that order it contains (`base`) plus the few later
//! operations it also contains (`extra`). Every element of `extra` is live at
//! the response time of the first excluded operation, so `extra` never holds
//! more than `k - 1` entries.

use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;
use thiserror::Error;

use crate::model::{History, TimeStamp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontierError {
    #[error("operation index {0} is out of range")]
    UnknownOperation(usize),
    #[error("{0:?} is not a state of this frontier graph")]
    UnknownState(Vec<usize>),
}

/// A partition state as a sorted list of operation indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionState {
    members: Vec<usize>,
}

impl PartitionState {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        PartitionState { members }
    }

    pub fn empty() -> Self {
        PartitionState { members: Vec::new() }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, op: usize) -> bool {
        self.members.binary_search(&op).is_ok()
    }
}

/// Canonical compact encoding of a partition state (see module docs).
/// `extra` holds positions in response order, strictly above `base`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    base: u32,
    extra: SmallVec<[u32; 6]>,
}

impl StateKey {
    pub fn size(&self) -> usize {
        self.base as usize + self.extra.len()
    }

    fn contains_pos(&self, p: u32) -> bool {
        p < self.base || self.extra.contains(&p)
    }

    /// Adds position `p` (not yet contained) and restores canonical form.
    fn with_pos(&self, p: u32) -> StateKey {
        let mut next = self.clone();
        if p == next.base {
            next.base += 1;
            let mut k = 0;
            while k < next.extra.len() && next.extra[k] == next.base {
                next.base += 1;
                k += 1;
            }
            next.extra.drain(..k);
        } else {
            let at = next.extra.partition_point(|&q| q < p);
            next.extra.insert(at, p);
        }
        next
    }

    fn canonical(base: u32, mut extra: SmallVec<[u32; 6]>) -> StateKey {
        extra.sort_unstable();
        let mut key = StateKey {
            base,
            extra: SmallVec::new(),
        };
        for p in extra {
            key = key.with_pos(p);
        }
        key
    }
}

/// Index structures shared by every traversal of a history's partition states.
///
/// Times are replaced by ranks among the distinct endpoint values, which keeps
/// all comparisons exact and cheap.
#[derive(Clone, Debug)]
pub struct Frontier {
    inv: Vec<u32>,
    res: Vec<u32>,
    /// Operation indices sorted by (res, inv, index).
    by_res: Vec<u32>,
    /// Position of each operation in `by_res`.
    pos: Vec<u32>,
    /// `prefix_max_inv[p]` = max inv over `by_res[..p]`, or -1.
    prefix_max_inv: Vec<i64>,
    /// For each rank r: positions of operations with inv < r <= res, in CSR form.
    live_start: Vec<u32>,
    live: Vec<u32>,
    /// Rank of each operation's id in lexicographic order; orders successors.
    id_rank: Vec<u32>,
}

impl Frontier {
    pub fn new(h: &History) -> Self {
        let n = h.len();
        let mut distinct: Vec<&TimeStamp> = h.ops().iter().flat_map(|o| [&o.inv, &o.res]).collect();
        distinct.sort();
        distinct.dedup();
        let rank = |t: &TimeStamp| distinct.binary_search(&t).expect("endpoint") as u32;
        let inv: Vec<u32> = h.ops().iter().map(|o| rank(&o.inv)).collect();
        let res: Vec<u32> = h.ops().iter().map(|o| rank(&o.res)).collect();
        let m = distinct.len();

        let mut by_res: Vec<u32> = (0..n as u32).collect();
        by_res.sort_by_key(|&i| (res[i as usize], inv[i as usize], i));
        let mut pos = vec![0u32; n];
        for (p, &i) in by_res.iter().enumerate() {
            pos[i as usize] = p as u32;
        }
        let mut prefix_max_inv = Vec::with_capacity(n + 1);
        prefix_max_inv.push(-1i64);
        for &i in &by_res {
            let last = *prefix_max_inv.last().unwrap();
            prefix_max_inv.push(last.max(inv[i as usize] as i64));
        }

        // Sweep ranks: `active` holds ops with inv < r <= res.
        let mut starting: Vec<Vec<u32>> = vec![Vec::new(); m + 1];
        for i in 0..n {
            starting[inv[i] as usize + 1].push(i as u32);
        }
        let mut live_start = Vec::with_capacity(m + 2);
        let mut live = Vec::new();
        let mut active: Vec<u32> = Vec::new();
        for r in 0..=m as u32 {
            active.retain(|&i| res[i as usize] >= r);
            active.extend_from_slice(&starting[r as usize]);
            live_start.push(live.len() as u32);
            let mut snapshot: SmallVec<[u32; 16]> = active.iter().map(|&i| pos[i as usize]).collect();
            snapshot.sort_unstable();
            live.extend_from_slice(&snapshot);
        }
        live_start.push(live.len() as u32);

        let mut by_id: Vec<usize> = (0..n).collect();
        by_id.sort_by(|&a, &b| h.op(a).id.cmp(&h.op(b).id).then(a.cmp(&b)));
        let mut id_rank = vec![0u32; n];
        for (r, &i) in by_id.iter().enumerate() {
            id_rank[i] = r as u32;
        }

        Frontier {
            inv,
            res,
            by_res,
            pos,
            prefix_max_inv,
            live_start,
            live,
            id_rank,
        }
    }

    pub fn len(&self) -> usize {
        self.inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv.is_empty()
    }

    fn live_at(&self, r: u32) -> &[u32] {
        let r = r as usize;
        &self.live[self.live_start[r] as usize..self.live_start[r + 1] as usize]
    }

    pub fn source(&self) -> StateKey {
        StateKey {
            base: 0,
            extra: SmallVec::new(),
        }
    }

    pub fn sink(&self) -> StateKey {
        StateKey {
            base: self.len() as u32,
            extra: SmallVec::new(),
        }
    }

    pub fn is_sink(&self, key: &StateKey) -> bool {
        key.base as usize == self.len()
    }

    pub fn contains(&self, key: &StateKey, op: usize) -> bool {
        key.contains_pos(self.pos[op])
    }

    pub fn key_of(&self, members: &[usize]) -> Result<StateKey, FrontierError> {
        let mut positions = SmallVec::new();
        for &op in members {
            positions.push(*self.pos.get(op).ok_or(FrontierError::UnknownOperation(op))?);
        }
        Ok(StateKey::canonical(0, positions))
    }

    pub fn members(&self, key: &StateKey) -> PartitionState {
        let ops = self.by_res[..key.base as usize]
            .iter()
            .chain(key.extra.iter().map(|&p| &self.by_res[p as usize]))
            .map(|&i| i as usize)
            .collect();
        PartitionState::new(ops)
    }

    fn max_inv(&self, key: &StateKey) -> i64 {
        key.extra
            .iter()
            .map(|&p| self.inv[self.by_res[p as usize] as usize] as i64)
            .fold(self.prefix_max_inv[key.base as usize], i64::max)
    }

    /// Whether `key` satisfies the strict partition-state condition.
    pub fn is_state(&self, key: &StateKey) -> bool {
        if self.is_sink(key) {
            return true;
        }
        let first_out = self.by_res[key.base as usize] as usize;
        self.max_inv(key) < self.res[first_out] as i64
    }

    /// One-operation extensions of `key` that are again partition states,
    /// ordered by operation id.
    pub fn successors(&self, key: &StateKey) -> Vec<(usize, StateKey)> {
        let mut out = Vec::new();
        self.for_each_successor(key, |op, next| out.push((op, next)));
        out
    }

    pub fn for_each_successor(&self, key: &StateKey, mut f: impl FnMut(usize, StateKey)) {
        if self.is_sink(key) {
            return;
        }
        let n = self.len();
        let base = key.base;
        let first = self.by_res[base as usize] as usize;
        let cut = self.res[first] as i64;
        let max_inv = self.max_inv(key);
        let mut found: SmallVec<[(u32, usize, StateKey); 8]> = SmallVec::new();

        // The first excluded operation: the new cut is the next excluded response.
        let next = key.with_pos(base);
        let next_cut = if next.base as usize == n {
            i64::MAX
        } else {
            self.res[self.by_res[next.base as usize] as usize] as i64
        };
        if max_inv.max(self.inv[first] as i64) < next_cut {
            found.push((self.id_rank[first], first, next));
        }
        // Any other addition keeps `first` outside, so the cut stays put.
        for &p in self.live_at(self.res[first]) {
            if p <= base || key.extra.contains(&p) {
                continue;
            }
            let op = self.by_res[p as usize] as usize;
            if max_inv.max(self.inv[op] as i64) < cut {
                found.push((self.id_rank[op], op, key.with_pos(p)));
            }
        }
        found.sort_unstable_by_key(|e| e.0);
        for (_, op, k) in found {
            f(op, k);
        }
    }

    /// All partition states, by sweeping the gaps between consecutive distinct
    /// endpoints. Inside a gap, operations that responded earlier are required,
    /// operations invoked later are forbidden, and every subset of the rest is a
    /// state.
    pub fn enumerate(&self) -> Vec<StateKey> {
        let n = self.len();
        let m = self.live_start.len() - 2;
        let mut seen: FxHashSet<StateKey> = FxHashSet::default();
        let mut out = Vec::new();
        let mut required = 0usize;
        // Gap r sits between rank r - 1 and rank r; gap m is after the last endpoint.
        for r in 0..=m as u32 {
            while required < n && self.res[self.by_res[required] as usize] < r {
                required += 1;
            }
            let free: &[u32] = if (r as usize) < m { self.live_at(r) } else { &[] };
            let free: SmallVec<[u32; 16]> = free
                .iter()
                .copied()
                .filter(|&p| self.inv[self.by_res[p as usize] as usize] < r)
                .collect();
            debug_assert!(free.len() < 32, "concurrency width too large to enumerate");
            for mask in 0u32..(1u32 << free.len()) {
                let subset = free
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &p)| p)
                    .collect();
                let key = StateKey::canonical(required as u32, subset);
                if seen.insert(key.clone()) {
                    out.push(key);
                }
            }
        }
        out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        out
    }
}

/// Whether `members` is a partition state of `h` under the strict witness rule.
pub fn is_partition_state(h: &History, members: &[usize]) -> Result<bool, FrontierError> {
    let mut inside = vec![false; h.len()];
    for &i in members {
        *inside.get_mut(i).ok_or(FrontierError::UnknownOperation(i))? = true;
    }
    let max_inv = members.iter().map(|&i| &h.op(i).inv).max();
    let min_res = (0..h.len()).filter(|&i| !inside[i]).map(|i| &h.op(i).res).min();
    Ok(match (max_inv, min_res) {
        (Some(a), Some(b)) => a < b,
        _ => true,
    })
}

/// Every partition state of `h`, smallest first.
pub fn enumerate_partition_states(h: &History) -> Vec<PartitionState> {
    let f = Frontier::new(h);
    f.enumerate().iter().map(|k| f.members(k)).collect()
}

/// Number of partition states of `h`.
pub fn count_partition_states(h: &History) -> usize {
    Frontier::new(h).enumerate().len()
}

/// The frontier graph of a history, with states indexed by `0..len()`.
#[derive(Clone, Debug)]
pub struct FrontierGraph {
    frontier: Frontier,
    keys: Vec<StateKey>,
    index: FxHashMap<StateKey, u32>,
    edges: Vec<Vec<(usize, u32)>>,
}

impl FrontierGraph {
    pub fn build(h: &History) -> Self {
        let frontier = Frontier::new(h);
        let keys = frontier.enumerate();
        let index: FxHashMap<StateKey, u32> = keys.iter().enumerate().map(|(i, k)| (k.clone(), i as u32)).collect();
        let edges = keys
            .iter()
            .map(|k| {
                frontier
                    .successors(k)
                    .into_iter()
                    .map(|(op, next)| (op, index[&next]))
                    .collect()
            })
            .collect();
        let g = FrontierGraph {
            frontier,
            keys,
            index,
            edges,
        };
        debug_assert!(g.all_states_on_paths());
        g
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.keys.len() - 1
    }

    pub fn key(&self, s: usize) -> &StateKey {
        &self.keys[s]
    }

    pub fn size_of(&self, s: usize) -> usize {
        self.keys[s].size()
    }

    pub fn state(&self, s: usize) -> PartitionState {
        self.frontier.members(&self.keys[s])
    }

    pub fn states(&self) -> impl Iterator<Item = PartitionState> + '_ {
        (0..self.len()).map(|s| self.state(s))
    }

    pub fn index_of(&self, state: &PartitionState) -> Result<usize, FrontierError> {
        let key = self.frontier.key_of(state.members())?;
        self.index
            .get(&key)
            .map(|&i| i as usize)
            .ok_or_else(|| FrontierError::UnknownState(state.members().to_vec()))
    }

    pub fn contains_op(&self, s: usize, op: usize) -> bool {
        self.frontier.contains(&self.keys[s], op)
    }

    /// Out-edges of state `s` as (operation, successor state index).
    pub fn edges(&self, s: usize) -> &[(usize, u32)] {
        &self.edges[s]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, state: &PartitionState) -> Result<Vec<(usize, PartitionState)>, FrontierError> {
        let s = self.index_of(state)?;
        Ok(self.edges[s]
            .iter()
            .map(|&(op, t)| (op, self.state(t as usize)))
            .collect())
    }

    /// Whether every state is reachable from the source and reaches the sink.
    pub fn all_states_on_paths(&self) -> bool {
        let n = self.len();
        let mut fwd = vec![false; n];
        fwd[self.source()] = true;
        // States are sorted by size and edges increase size, so index order is topological.
        for s in 0..n {
            if fwd[s] {
                for &(_, t) in &self.edges[s] {
                    fwd[t as usize] = true;
                }
            }
        }
        let mut bwd = vec![false; n];
        bwd[self.sink()] = true;
        for s in (0..n).rev() {
            if self.edges[s].iter().any(|&(_, t)| bwd[t as usize]) {
                bwd[s] = true;
            }
        }
        fwd.iter().zip(&bwd).all(|(a, b)| *a && *b)
    }

    /// Number of maximal source-to-sink paths.
    pub fn count_paths(&self) -> u128 {
        let mut ways = vec![0u128; self.len()];
        ways[self.sink()] = 1;
        for s in (0..self.len()).rev() {
            let w: u128 = self.edges[s].iter().map(|&(_, t)| ways[t as usize]).sum();
            if s != self.sink() {
                ways[s] = w;
            }
        }
        ways[self.source()]
    }

    /// Graphviz rendering: nodes labelled by sorted operation ids, edges by the
    /// added operation.
    pub fn to_dot(&self, h: &History) -> String {
        let mut out = String::from("digraph frontier {\n");
        for s in 0..self.len() {
            let mut ids: Vec<&str> = self.state(s).members().iter().map(|&i| h.op(i).id.as_str()).collect();
            ids.sort_unstable();
            let _ = writeln!(out, "  s{s} [label=\"{{{}}}\"];", escape(&ids.join(",")));
        }
        for s in 0..self.len() {
            for &(op, t) in &self.edges[s] {
                let _ = writeln!(out, "  s{s} -> s{t} [label=\"{}\"];", escape(&h.op(op).to_string()));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn build_frontier_graph(h: &History) -> FrontierGraph {
    FrontierGraph::build(h)
}

/// Out-edges of `s` in `g`.
pub fn successors(g: &FrontierGraph, s: &PartitionState) -> Result<Vec<(usize, PartitionState)>, FrontierError> {
    g.successors(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdtKind, Method, Operation, Value};

    fn h_queue() -> History {
        History::new(
            AdtKind::Queue,
            vec![
                Operation::at("enq", Method::Enq, Value::Concrete(3), 1, 3),
                Operation::at("deq", Method::Deq, Value::Concrete(3), 2, 4),
            ],
        )
        .unwrap()
    }

    fn concurrent_push_pop() -> History {
        History::new(
            AdtKind::Stack,
            vec![
                Operation::at("push", Method::Push, Value::Concrete(1), 1, 4),
                Operation::at("pop", Method::Pop, Value::Concrete(1), 2, 3),
            ],
        )
        .unwrap()
    }

    fn disjoint() -> History {
        History::new(
            AdtKind::Counter,
            vec![
                Operation::at("a", Method::Inc, Value::Empty, 1, 2),
                Operation::at("b", Method::Inc, Value::Empty, 3, 4),
            ],
        )
        .unwrap()
    }

    fn states(h: &History) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = enumerate_partition_states(h)
            .into_iter()
            .map(|s| s.members().to_vec())
            .collect();
        out.sort_by_key(|m| (m.len(), m.clone()));
        out
    }

    #[test]
    fn membership_examples() {
        let h = h_queue();
        assert!(is_partition_state(&h, &[0]).unwrap());
        assert!(is_partition_state(&h, &[1]).unwrap());
        assert!(!is_partition_state(&disjoint(), &[1]).unwrap());
        assert!(is_partition_state(&h, &[]).unwrap());
        assert!(is_partition_state(&h, &[0, 1]).unwrap());
        assert_eq!(is_partition_state(&h, &[7]), Err(FrontierError::UnknownOperation(7)));
    }

    #[test]
    fn touching_intervals_are_strict() {
        // a=[1,2], b=[2,3]: {b} is no prefix of any linearization.
        let h = History::new(
            AdtKind::Counter,
            vec![
                Operation::at("a", Method::Inc, Value::Empty, 1, 2),
                Operation::at("b", Method::Inc, Value::Empty, 2, 3),
            ],
        )
        .unwrap();
        assert!(!is_partition_state(&h, &[1]).unwrap());
        assert_eq!(states(&h), vec![vec![], vec![0], vec![0, 1]]);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(states(&h_queue()), vec![vec![], vec![0], vec![1], vec![0, 1]]);
        assert_eq!(
            states(&concurrent_push_pop()),
            vec![vec![], vec![0], vec![1], vec![0, 1]]
        );
        assert_eq!(states(&disjoint()), vec![vec![], vec![0], vec![0, 1]]);
    }

    #[test]
    fn concurrent_push_pop_graph() {
        let h = concurrent_push_pop();
        let g = build_frontier_graph(&h);
        assert_eq!(g.len(), 4);
        let edges: Vec<(Vec<usize>, usize, Vec<usize>)> = (0..g.len())
            .flat_map(|s| {
                g.edges(s)
                    .iter()
                    .map(move |&(op, t)| (s, op, t as usize))
                    .collect::<Vec<_>>()
            })
            .map(|(s, op, t)| (g.state(s).members().to_vec(), op, g.state(t).members().to_vec()))
            .collect();
        assert_eq!(
            edges,
            vec![
                (vec![], 1, vec![1]),
                (vec![], 0, vec![0]),
                (vec![0], 1, vec![0, 1]),
                (vec![1], 0, vec![0, 1]),
            ]
        );
        // successors are ordered by id: "pop" < "push"
        let succ = successors(&g, &PartitionState::empty()).unwrap();
        assert_eq!(succ.iter().map(|(op, _)| *op).collect::<Vec<_>>(), vec![1, 0]);
        assert!(successors(&g, &PartitionState::new(vec![0, 1])).unwrap().is_empty());
        assert!(matches!(
            successors(&g, &PartitionState::new(vec![5])),
            Err(FrontierError::UnknownOperation(5))
        ));
    }

    #[test]
    fn empty_and_sequential_graphs() {
        let g = build_frontier_graph(&History::empty(AdtKind::Stack));
        assert_eq!((g.len(), g.edge_count()), (1, 0));
        assert_eq!(g.source(), g.sink());

        let h = History::new(
            AdtKind::Counter,
            (0..3)
                .map(|i| Operation::at(format!("o{i}"), Method::Inc, Value::Empty, 3 * i, 3 * i + 1))
                .collect(),
        )
        .unwrap();
        let g = build_frontier_graph(&h);
        assert_eq!((g.len(), g.edge_count()), (4, 3));
        let middle = g.state(1);
        assert_eq!(g.successors(&middle).unwrap().len(), 1);
        assert_eq!(g.count_paths(), 1);
        let unknown = PartitionState::new(vec![1]);
        assert_eq!(g.successors(&unknown), Err(FrontierError::UnknownState(vec![1])));
    }

    #[test]
    fn dot_output() {
        let h = concurrent_push_pop();
        let dot = build_frontier_graph(&h).to_dot(&h);
        assert_eq!(dot.matches("->").count(), 4);
        assert!(dot.contains("label=\"{pop,push}\""));
    }
}
