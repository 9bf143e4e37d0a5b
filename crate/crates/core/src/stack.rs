//! Stack histories via a production table over partition-state pairs.
//!
//! Legal, well-matched stack sequences are generated by a small grammar in
//! Chomsky normal form, with non-terminals indexed by values:
//!
//! ```text
//! T(ε) -> Push(v) T(v)      push and track a new value
//! T(v) -> Peek(v) T(v)      peek the tracked value
//! T(v) -> T(ε) T(v)         a nested well-matched block
//! T(v) -> pop(v)    Push(v) -> push(v)    Peek(v) -> peek(v)
//! ```
//!
//! The table entry for `(S1, S2)` holds every non-terminal deriving some
//! interval-consistent arrangement of `S2 \ S1`. Arbitrary histories are first
//! brought into the grammar's shape: failed operations become peeks of a
//! sentinel ⊥ pushed before everything, and each operation is mirrored after
//! the history so that every pushed value is eventually popped.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_rational::BigRational;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::frontier::FrontierGraph;
use crate::model::{AdtKind, History, Method, Operation, TimeStamp, Value};
use crate::verdict::Verdict;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StackError {
    #[error("stack engine cannot check a {0} history")]
    WrongKind(AdtKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NonTerminal {
    TEps,
    T(Value),
    Push(Value),
    Peek(Value),
}

/// How a table symbol was first derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivation {
    Leaf(usize),
    Split {
        mid: u32,
        left: NonTerminal,
        right: NonTerminal,
    },
}

type Cell = BTreeMap<NonTerminal, Derivation>;

/// Sets of non-terminals indexed by pairs of frontier-graph states.
#[derive(Clone, Debug, Default)]
pub struct ProductionTable {
    cells: FxHashMap<(u32, u32), Cell>,
}

impl ProductionTable {
    pub fn get(&self, s1: usize, s2: usize) -> BTreeSet<NonTerminal> {
        self.cells
            .get(&(s1 as u32, s2 as u32))
            .map(|c| c.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn contains(&self, s1: usize, s2: usize, nt: NonTerminal) -> bool {
        self.cells
            .get(&(s1 as u32, s2 as u32))
            .is_some_and(|c| c.contains_key(&nt))
    }

    /// Non-empty entries, sorted by state pair.
    pub fn entries(&self) -> Vec<((usize, usize), BTreeSet<NonTerminal>)> {
        let mut out: Vec<_> = self
            .cells
            .iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|(&(a, b), c)| ((a as usize, b as usize), c.keys().copied().collect()))
            .collect();
        out.sort();
        out
    }

    /// Entrywise equality of symbol sets, ignoring derivations.
    pub fn same_symbols(&self, other: &ProductionTable) -> bool {
        self.entries() == other.entries()
    }

    pub fn derivation(&self, s1: usize, s2: usize, nt: NonTerminal) -> Option<Derivation> {
        self.cells.get(&(s1 as u32, s2 as u32))?.get(&nt).copied()
    }

    /// Operations at the leaves of the derivation of `nt` over `(s1, s2)`, in order.
    pub fn leaves(&self, s1: usize, s2: usize, nt: NonTerminal) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        let mut todo = vec![(s1 as u32, s2 as u32, nt)];
        while let Some((a, b, sym)) = todo.pop() {
            match *self.cells.get(&(a, b))?.get(&sym)? {
                Derivation::Leaf(op) => out.push(op),
                Derivation::Split { mid, left, right } => {
                    todo.push((mid, b, right));
                    todo.push((a, mid, left));
                }
            }
        }
        Some(out)
    }
}

/// The non-terminal directly producing `op`. Push and peek symbols only ever
/// occur as left children, so they are dropped when the step ends at the sink
/// where nothing can follow them.
fn terminal(op: &Operation, into_sink: bool) -> Option<NonTerminal> {
    if op.value == Value::Empty {
        return None;
    }
    match op.method {
        Method::Pop => Some(NonTerminal::T(op.value)),
        Method::Push if !into_sink => Some(NonTerminal::Push(op.value)),
        Method::Peek if !into_sink => Some(NonTerminal::Peek(op.value)),
        _ => None,
    }
}

/// Adds to `out` every `P` with `P -> L R`, `L` in `left`, `R` in `right`.
fn product_into(left: &Cell, right: &Cell, mid: u32, out: &mut Cell) {
    for &r in right.keys() {
        let NonTerminal::T(v) = r else { continue };
        let mut add = |p: NonTerminal, l: NonTerminal| {
            if left.contains_key(&l) {
                out.entry(p).or_insert(Derivation::Split { mid, left: l, right: r });
            }
        };
        add(NonTerminal::TEps, NonTerminal::Push(v));
        add(NonTerminal::T(v), NonTerminal::Peek(v));
        add(NonTerminal::T(v), NonTerminal::TEps);
    }
}

/// `A ⊗ B`: every head of a binary production whose body is in `A × B`.
pub fn nt_product(a: &BTreeSet<NonTerminal>, b: &BTreeSet<NonTerminal>) -> BTreeSet<NonTerminal> {
    let left: Cell = a.iter().map(|&x| (x, Derivation::Leaf(0))).collect();
    let right: Cell = b.iter().map(|&x| (x, Derivation::Leaf(0))).collect();
    let mut out = Cell::new();
    product_into(&left, &right, 0, &mut out);
    out.into_keys().collect()
}

/// Only single-operation entries, filled by the terminal rules.
pub fn one_step_matrix(h: &History, g: &FrontierGraph) -> ProductionTable {
    let mut table = ProductionTable::default();
    for s in 0..g.len() {
        for &(op, t) in g.edges(s) {
            if let Some(nt) = terminal(h.op(op), t as usize == g.sink()) {
                table
                    .cells
                    .entry((s as u32, t))
                    .or_default()
                    .insert(nt, Derivation::Leaf(op));
            }
        }
    }
    table
}

/// Least fixed point of `M ∪ M ⊗ M` by repeated full matrix products.
pub fn closure(m: &ProductionTable) -> ProductionTable {
    let mut x = m.clone();
    loop {
        let mut rows: FxHashMap<u32, Vec<u32>> = FxHashMap::default();
        for &(a, b) in x.cells.keys() {
            rows.entry(a).or_default().push(b);
        }
        let mut fresh: FxHashMap<(u32, u32), Cell> = FxHashMap::default();
        for (&(a, mid), left) in &x.cells {
            for &b in rows.get(&mid).map(Vec::as_slice).unwrap_or(&[]) {
                let right = &x.cells[&(mid, b)];
                product_into(left, right, mid, fresh.entry((a, b)).or_default());
            }
        }
        let mut changed = false;
        for (pair, cell) in fresh {
            let target = x.cells.entry(pair).or_default();
            for (nt, d) in cell {
                if let std::collections::btree_map::Entry::Vacant(e) = target.entry(nt) {
                    e.insert(d);
                    changed = true;
                }
            }
        }
        x.cells.retain(|_, c| !c.is_empty());
        if !changed {
            return x;
        }
    }
}

/// The recognition table, filled in order of increasing size difference
/// `|S2| - |S1|` by splitting every pair at an intermediate state.
///
/// Expects a non-empty, well-matched history without failed operations.
pub fn production_table(h: &History, g: &FrontierGraph) -> ProductionTable {
    let n_states = g.len();
    let mut cells: Vec<Cell> = Vec::new();
    let mut index: FxHashMap<(u32, u32), u32> = FxHashMap::default();
    // rows[s1] = (s2, |s2| - |s1|, cell), in nondecreasing size difference.
    let mut rows: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); n_states];

    for (s, row) in rows.iter_mut().enumerate() {
        for &(op, t) in g.edges(s) {
            if let Some(nt) = terminal(h.op(op), t as usize == g.sink()) {
                let id = cells.len() as u32;
                cells.push(Cell::from([(nt, Derivation::Leaf(op))]));
                index.insert((s as u32, t), id);
                row.push((t, 1, id));
            }
        }
    }

    let mut pending: BTreeMap<u32, Cell> = BTreeMap::new();
    for d in 2..=h.len() as u32 {
        for s1 in 0..n_states {
            pending.clear();
            for &(s3, a, left) in &rows[s1] {
                if a >= d {
                    break;
                }
                let row3 = &rows[s3 as usize];
                let lo = row3.partition_point(|e| e.1 < d - a);
                for &(s2, b, right) in &row3[lo..] {
                    if b != d - a {
                        break;
                    }
                    let out = pending.entry(s2).or_default();
                    product_into(&cells[left as usize], &cells[right as usize], s3, out);
                }
            }
            for (s2, cell) in std::mem::take(&mut pending) {
                if cell.is_empty() {
                    continue;
                }
                let id = cells.len() as u32;
                cells.push(cell);
                index.insert((s1 as u32, s2), id);
                rows[s1].push((s2, d, id));
            }
        }
    }

    let mut table = ProductionTable::default();
    for (pair, id) in index {
        table.cells.insert(pair, std::mem::take(&mut cells[id as usize]));
    }
    table
}

fn fresh_id(base: String, taken: &mut HashSet<String>) -> String {
    let mut id = base;
    while taken.contains(&id) {
        id.push('\'');
    }
    taken.insert(id.clone());
    id
}

/// Rewrites every failed operation as `peek(⊥)` and adds a `push(⊥)` that
/// responds before any operation is invoked. The result's operation 0 is the
/// sentinel push and operation `i + 1` is the image of `h`'s operation `i`.
/// Times are shifted uniformly when needed to stay non-negative. Empty
/// histories are returned unchanged.
pub fn embed_failed(h: &History) -> History {
    let Some(t_min) = h.ops().iter().map(|o| o.inv.as_rational()).min().cloned() else {
        return h.clone();
    };
    let two = BigRational::from_integer(2.into());
    let shift = if t_min < two {
        &two - &t_min
    } else {
        BigRational::from_integer(0.into())
    };
    let at = |t: &BigRational| TimeStamp::from_rational(t + &shift);

    let mut taken: HashSet<String> = h.ops().iter().map(|o| o.id.clone()).collect();
    let one = BigRational::from_integer(1.into());
    let mut ops = vec![Operation::new(
        fresh_id("⊥push".into(), &mut taken),
        Method::Push,
        Value::Bottom,
        at(&(&t_min - &two)),
        at(&(&t_min - &one)),
    )];
    for o in h.ops() {
        let mut o2 = Operation {
            inv: at(o.inv.as_rational()),
            res: at(o.res.as_rational()),
            ..o.clone()
        };
        if o.value == Value::Empty {
            o2.method = Method::Peek;
            o2.value = Value::Bottom;
        }
        ops.push(o2);
    }
    History::unvalidated(h.kind(), ops)
}

/// Appends the time-reversed mirror image of every operation after the
/// history: pushes become pops, pops become pushes, peeks stay peeks, and a
/// failed operation mirrors to a failed peek. The result's operations
/// `0..n` are `h`'s own, `n + i` mirrors operation `i`.
pub fn mirror_close(h: &History) -> History {
    let Some(t_min) = h.ops().iter().map(|o| o.inv.as_rational()).min().cloned() else {
        return h.clone();
    };
    let t_max = h.ops().iter().map(|o| o.res.as_rational()).max().cloned().unwrap();
    // Shift so every time is negative, reflect around zero, then shift the
    // union back so its earliest invocation lands at zero.
    let one = BigRational::from_integer(1.into());
    let pivot = &t_max + &one;
    let forward = |t: &BigRational| TimeStamp::from_rational(t - &t_min);
    let reflect = |t: &BigRational| TimeStamp::from_rational(&pivot + &pivot - t - &t_min);

    let mut taken: HashSet<String> = h.ops().iter().map(|o| o.id.clone()).collect();
    let mut ops: Vec<Operation> = h
        .ops()
        .iter()
        .map(|o| Operation {
            inv: forward(o.inv.as_rational()),
            res: forward(o.res.as_rational()),
            ..o.clone()
        })
        .collect();
    for o in h.ops() {
        let method = match (o.method, o.value) {
            (_, Value::Empty) => Method::Peek,
            (Method::Push, _) => Method::Pop,
            (Method::Pop, _) => Method::Push,
            (m, _) => m,
        };
        ops.push(Operation {
            id: fresh_id(format!("{}~", o.id), &mut taken),
            method,
            value: o.value,
            aux: o.aux,
            inv: reflect(o.res.as_rational()),
            res: reflect(o.inv.as_rational()),
        });
    }
    History::unvalidated(h.kind(), ops)
}

/// Everything the stack engine derives from one history.
#[derive(Clone, Debug)]
pub struct StackAnalysis {
    /// `mirror_close(embed_failed(h))`.
    pub preprocessed: History,
    pub graph: FrontierGraph,
    pub table: ProductionTable,
}

impl StackAnalysis {
    pub fn accepts(&self) -> bool {
        self.table
            .contains(self.graph.source(), self.graph.sink(), NonTerminal::TEps)
    }

    /// The original operation behind a preprocessed one, if any.
    pub fn original(&self, pre_op: usize) -> Option<usize> {
        let embedded = self.preprocessed.len() / 2;
        (1..embedded).contains(&pre_op).then(|| pre_op - 1)
    }
}

/// Runs preprocessing, frontier construction and the table fill. Expects a
/// non-empty stack history.
pub fn analyze(h: &History) -> StackAnalysis {
    let preprocessed = mirror_close(&embed_failed(h));
    let graph = FrontierGraph::build(&preprocessed);
    let table = production_table(&preprocessed, &graph);
    StackAnalysis {
        preprocessed,
        graph,
        table,
    }
}

pub fn stack_check(h: &History) -> Result<Verdict, StackError> {
    if h.kind() != AdtKind::Stack {
        return Err(StackError::WrongKind(h.kind()));
    }
    if h.is_empty() {
        return Ok(Verdict::accepted(h, &[]));
    }
    let a = analyze(h);
    if !a.accepts() {
        return Ok(Verdict::rejected());
    }
    let leaves = a
        .table
        .leaves(a.graph.source(), a.graph.sink(), NonTerminal::TEps)
        .expect("accepted symbol has a derivation");
    let order: Vec<usize> = leaves.into_iter().filter_map(|op| a.original(op)).collect();
    Ok(Verdict::accepted(h, &order))
}
