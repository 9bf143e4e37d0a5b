#![allow(dead_code)]

use std::collections::BTreeSet;

use linmon::adt::{sequence_member, AbstractOperation, SimulatedObject};
use linmon::model::{AdtKind, Aux, History, Method, Operation, TimeStamp, Value};
use linmon::oracle::oracle_check;
use linmon::stack::{embed_failed, mirror_close, NonTerminal, ProductionTable};
use linmon::{gen_history, mutate_history, FrontierGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest history size used in the oracle-equivalence suites for `kind`.
pub fn max_n(kind: AdtKind) -> usize {
    match kind {
        AdtKind::Stack | AdtKind::Queue => 7,
        _ => 8,
    }
}

/// `count` histories of `kind`, alternating between generated and mutated
/// ones, with sizes up to `max_n` and widths up to 4.
pub fn suite(kind: AdtKind, count: usize, max_n: usize, seed: u64) -> Vec<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(1..=max_n);
            let k = rng.random_range(1..=n.min(4));
            let s: u64 = rng.random();
            let h = gen_history(kind, n, k, s).unwrap();
            if i % 2 == 1 {
                mutate_history(&h, s).map(|(m, _)| m).unwrap_or(h)
            } else {
                h
            }
        })
        .collect()
}

/// A counter history of `n` increments with random integer intervals drawn
/// from a small range, so endpoint ties are common.
pub fn random_intervals(n: usize, seed: u64) -> History {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (2 * n as i64).max(2);
    let ops = (0..n)
        .map(|i| {
            let a = rng.random_range(0..span);
            let len = rng.random_range(1..=span / 2 + 1);
            Operation::at(format!("x{i:02}"), Method::Inc, Value::Empty, a, a + len)
        })
        .collect();
    History::new(AdtKind::Counter, ops).unwrap()
}

/// Every subset `S` with `max inv(S) < min res(H \ S)`, by direct enumeration.
pub fn brute_force_states(h: &History) -> Vec<Vec<usize>> {
    let n = h.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let inside = |i: usize| mask & (1 << i) != 0;
        let max_inv: Option<&TimeStamp> = (0..n).filter(|&i| inside(i)).map(|i| &h.op(i).inv).max();
        let min_res: Option<&TimeStamp> = (0..n).filter(|&i| !inside(i)).map(|i| &h.op(i).res).min();
        let ok = match (max_inv, min_res) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        };
        if ok {
            out.push((0..n).filter(|&i| inside(i)).collect());
        }
    }
    out.sort();
    out
}

/// Single operations whose outcome distinguishes abstract states of `kind`.
pub fn probes(kind: AdtKind) -> Vec<AbstractOperation> {
    let values: Vec<Value> = (0..=4).map(Value::Concrete).chain([Value::Empty]).collect();
    let mut out = Vec::new();
    for &m in kind.methods() {
        for &v in &values {
            let base = AbstractOperation::new(m, v);
            match kind {
                AdtKind::Set | AdtKind::Multiset => {
                    out.push(base.with_aux(Aux::Bool(true)));
                    out.push(base.with_aux(Aux::Bool(false)));
                }
                AdtKind::RmwRegister | AdtKind::SizedStack => {
                    out.push(base);
                    for x in 0..=6 {
                        out.push(base.with_aux(Aux::Int(x)));
                    }
                }
                _ => out.push(base),
            }
        }
    }
    out
}

/// A random legal operation sequence of length `len` for `kind`, built from
/// the generator's sequential run.
pub fn legal_sequence(kind: AdtKind, len: usize, seed: u64) -> Vec<AbstractOperation> {
    let h = gen_history(kind, len, 1, seed).unwrap();
    let mut ops: Vec<&Operation> = h.ops().iter().collect();
    // Width 1 means the intervals are disjoint, so time order is the run order.
    ops.sort_by(|a, b| a.inv.cmp(&b.inv));
    ops.into_iter().map(AbstractOperation::from).collect()
}

pub fn run(kind: AdtKind, seq: &[AbstractOperation]) -> SimulatedObject {
    let mut obj = SimulatedObject::new(kind);
    for op in seq {
        assert!(obj.apply(op));
    }
    obj
}

/// Pairs of distinct legal permutations of the same operations.
pub fn permutation_pairs(kind: AdtKind, wanted: usize) -> Vec<(Vec<AbstractOperation>, Vec<AbstractOperation>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(kind as u64);
    let mut pairs = Vec::new();
    let mut seed = 0;
    while pairs.len() < wanted {
        seed += 1;
        assert!(seed < 100 * wanted as u64, "{kind}: too few permutation pairs");
        let len = rng.random_range(2..=7);
        let seq = legal_sequence(kind, len, seed);
        for _ in 0..50 {
            let mut perm = seq.clone();
            perm.shuffle(&mut rng);
            if perm != seq && sequence_member(kind, &perm) {
                pairs.push((seq, perm));
                break;
            }
        }
    }
    pairs
}

/// Compares state fingerprints and the outcome of every probe after two
/// legal permutations.
pub fn same_observable_state(kind: AdtKind, a: &[AbstractOperation], b: &[AbstractOperation]) -> Result<(), String> {
    let (x, y) = (run(kind, a), run(kind, b));
    if x.fingerprint() != y.fingerprint() {
        return Err(format!(
            "{kind}: {} vs {} after {a:?} / {b:?}",
            x.fingerprint(),
            y.fingerprint()
        ));
    }
    for p in &probes(kind) {
        let (mut x2, mut y2) = (x.clone(), y.clone());
        if x2.apply(p) != y2.apply(p) {
            return Err(format!("{kind}: probe {p:?} differs after {a:?} / {b:?}"));
        }
    }
    Ok(())
}

/// Largest number of left-symbol classes per row and of `T(v)` classes per
/// column of `table`, and the most `T(v)` symbols in a single cell.
pub fn class_counts(table: &ProductionTable, g: &FrontierGraph) -> (usize, usize, usize) {
    let mut rows = vec![BTreeSet::new(); g.len()];
    let mut cols = vec![BTreeSet::new(); g.len()];
    let mut cell_max = 0;
    for ((s1, s2), symbols) in table.entries() {
        let mut in_cell = 0;
        for nt in symbols {
            match nt {
                NonTerminal::T(_) => {
                    cols[s2].insert(nt);
                    in_cell += 1;
                }
                _ => {
                    rows[s1].insert(nt);
                }
            }
        }
        cell_max = cell_max.max(in_cell);
    }
    let max = |v: &[BTreeSet<NonTerminal>]| v.iter().map(BTreeSet::len).max().unwrap_or(0);
    (max(&rows), max(&cols), cell_max)
}

fn stack_op_kinds() -> Vec<(Method, Value)> {
    vec![
        (Method::Push, Value::Concrete(1)),
        (Method::Push, Value::Concrete(2)),
        (Method::Pop, Value::Concrete(1)),
        (Method::Pop, Value::Concrete(2)),
        (Method::Pop, Value::Empty),
        (Method::Peek, Value::Concrete(1)),
        (Method::Peek, Value::Empty),
    ]
}

fn grid_over(arity: usize, shapes: &[(i64, i64)]) -> Vec<History> {
    let cells: Vec<((Method, Value), (i64, i64))> = stack_op_kinds()
        .into_iter()
        .flat_map(|k| shapes.iter().map(move |&s| (k, s)))
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; arity];
    loop {
        let ops = idx
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let ((m, v), (lo, hi)) = cells[c];
                Operation::at(format!("g{i}"), m, v, lo, hi)
            })
            .collect();
        out.push(History::new(AdtKind::Stack, ops).unwrap());
        let mut pos = 0;
        loop {
            if pos == arity {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < cells.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Every stack history of two operations over a set of method, value and
/// interval shapes, and every history of three over a coarser set.
pub fn stack_grid() -> Vec<History> {
    let mut out = grid_over(2, &[(1, 2), (3, 4), (1, 4), (2, 3), (2, 5)]);
    out.extend(grid_over(3, &[(1, 4), (2, 3), (5, 6)]));
    out
}

/// Random stack histories of up to four operations with arbitrary overlaps.
pub fn random_small_stacks(count: usize, seed: u64) -> Vec<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = stack_op_kinds();
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let ops = (0..n)
                .map(|i| {
                    let (m, v) = kinds[rng.random_range(0..kinds.len())];
                    let lo = rng.random_range(0..8);
                    let hi = lo + rng.random_range(1..5);
                    Operation::at(format!("r{i}"), m, v, lo, hi)
                })
                .collect();
            History::new(AdtKind::Stack, ops).unwrap()
        })
        .collect()
}

/// The oracle verdict is the same before and after each preprocessing step.
pub fn transforms_sound(h: &History) -> Result<(), String> {
    let expected = oracle_check(h).unwrap().linearizable;
    let embedded = embed_failed(h);
    for (name, t) in [
        ("embed", embedded.clone()),
        ("mirror", mirror_close(h)),
        ("both", mirror_close(&embedded)),
    ] {
        if oracle_check(&t).unwrap().linearizable != expected {
            return Err(format!("{name} changes the verdict of {}", h.to_json()));
        }
    }
    Ok(())
}
