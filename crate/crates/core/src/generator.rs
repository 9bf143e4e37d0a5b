//! Random histories for testing: linearizable ones by construction, and
//! mutations of them that usually are not.
//!
//! A history is generated from a legal sequential run. Operation `i` of the
//! run owns slot `i` of the time line (times `4i + 1 ..= 4i + 3`) and is
//! linearized at `4i + 2`. Intervals are then stretched over neighbouring
//! slots as long as no slot is covered by more than `k` operations, which
//! bounds the concurrency width by `k` and keeps the run a valid linearization.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adt::{AbstractOperation, SimulatedObject, StateView};
use crate::model::{validate_history, AdtKind, Aux, History, Method, Operation, TimeStamp, Value};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("concurrency width must be at least 1")]
    ZeroWidth,
    #[error("cannot reach concurrency width {k} with {n} operations")]
    WidthTooLarge { n: usize, k: usize },
    #[error("cannot mutate an empty history")]
    EmptyHistory,
    #[error("no applicable mutation found")]
    NoMutation,
}

fn value_domain(n: usize) -> i64 {
    (n as i64 / 2).max(3)
}

/// Picks a random operation that is legal in the object's current state.
fn propose(kind: AdtKind, obj: &SimulatedObject, vmax: i64, rng: &mut ChaCha8Rng) -> AbstractOperation {
    use Method::*;
    let fresh = rng.random_range(1..=vmax);
    // Inserting methods are listed twice so containers tend to stay non-empty.
    let methods: &[Method] = match kind {
        AdtKind::Stack | AdtKind::SizedStack => &[Push, Push, Pop, Peek],
        AdtKind::Queue => &[Enq, Enq, Deq, Peek],
        AdtKind::PriorityQueue => &[Enq, Enq, Deq, Peek],
        AdtKind::Depq => &[Enq, Enq, Deq, Peek, DeqMin, PeekMin],
        AdtKind::Set => &[Add, Add, Remove, Contains],
        AdtKind::Multiset => &[Add, Add, Remove, Contains],
        AdtKind::Counter => &[Inc, Dec, Read],
        AdtKind::RmwRegister => &[Rmw],
    };
    let method = *methods.choose(rng).unwrap();
    match obj.view() {
        StateView::Scalar(c) => match method {
            Read => AbstractOperation::new(Read, Value::Concrete(c)),
            Rmw => AbstractOperation::new(Rmw, Value::Concrete(fresh)).with_aux(Aux::Int(c)),
            m => AbstractOperation::new(m, Value::Empty),
        },
        StateView::Bag(bag) => match method {
            Enq => AbstractOperation::new(Enq, Value::Concrete(fresh)),
            Deq | Peek => AbstractOperation::new(
                method,
                bag.keys().next_back().map_or(Value::Empty, |&v| Value::Concrete(v)),
            ),
            DeqMin | PeekMin => {
                AbstractOperation::new(method, bag.keys().next().map_or(Value::Empty, |&v| Value::Concrete(v)))
            }
            _ => {
                // Favour values already present so removals and lookups succeed.
                let present: Vec<i64> = bag.keys().copied().collect();
                let v = match present.choose(rng) {
                    Some(&p) if rng.random_bool(0.5) => p,
                    _ => fresh,
                };
                let here = bag.contains_key(&v);
                let ok = match method {
                    Add => kind == AdtKind::Multiset || !here,
                    _ => here,
                };
                AbstractOperation::new(method, Value::Concrete(v)).with_aux(Aux::Bool(ok))
            }
        },
        StateView::Seq(seq) => {
            let size = seq.len() as i64;
            let sized = kind == AdtKind::SizedStack;
            let top = if kind == AdtKind::Queue {
                seq.front()
            } else {
                seq.back()
            };
            match (method, top) {
                (Push | Enq, _) => {
                    let op = AbstractOperation::new(method, Value::Concrete(fresh));
                    if sized {
                        op.with_aux(Aux::Int(size + 1))
                    } else {
                        op
                    }
                }
                // A queue has no failed peek, so it dequeues instead.
                (Peek, None) if kind == AdtKind::Queue => AbstractOperation::new(Deq, Value::Empty),
                (m, None) => AbstractOperation::new(m, Value::Empty),
                (m, Some(&v)) => {
                    let op = AbstractOperation::new(m, v);
                    if sized {
                        op.with_aux(Aux::Int(size))
                    } else {
                        op
                    }
                }
            }
        }
    }
}

/// A linearizable history of `n` operations with concurrency width at most `k`.
pub fn gen_history(kind: AdtKind, n: usize, k: usize, seed: u64) -> Result<History, GenError> {
    if k == 0 {
        return Err(GenError::ZeroWidth);
    }
    if n > 0 && k > n {
        return Err(GenError::WidthTooLarge { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vmax = value_domain(n);
    let mut obj = SimulatedObject::new(kind);
    let mut run = Vec::with_capacity(n);
    for _ in 0..n {
        let op = propose(kind, &obj, vmax, &mut rng);
        assert!(obj.apply(&op), "proposed operation must be legal");
        run.push(op);
    }

    // Stretch intervals over neighbouring slots, never covering a slot more than k times.
    let mut cover = vec![1usize; n];
    let mut span: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let mut visit: Vec<usize> = (0..n).collect();
    visit.shuffle(&mut rng);
    for &i in &visit {
        let back = rng.random_range(0..=k);
        let fwd = rng.random_range(0..=k);
        for _ in 0..back {
            let s = span[i].0;
            if s == 0 || cover[s - 1] >= k {
                break;
            }
            cover[s - 1] += 1;
            span[i].0 = s - 1;
        }
        for _ in 0..fwd {
            let s = span[i].1;
            if s + 1 >= n || cover[s + 1] >= k {
                break;
            }
            cover[s + 1] += 1;
            span[i].1 = s + 1;
        }
    }

    // Ids are assigned in a shuffled order so they carry no hint of the run.
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut rng);
    let digits = n.saturating_sub(1).to_string().len();
    let mut ops: Vec<Operation> = run
        .into_iter()
        .zip(span)
        .zip(&labels)
        .map(|((a, (lo, hi)), &label)| Operation {
            id: format!("o{label:0digits$}"),
            method: a.method,
            value: a.value,
            aux: a.aux,
            inv: TimeStamp::from_integer(4 * lo as i64 + 1),
            res: TimeStamp::from_integer(4 * hi as i64 + 3),
        })
        .collect();
    ops.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(History::new(kind, ops).expect("generated history is well formed"))
}

fn retarget(v: Value, vmax: i64, rng: &mut ChaCha8Rng) -> Option<Value> {
    let Value::Concrete(x) = v else { return None };
    let mut y = rng.random_range(1..=vmax + 1);
    if y == x {
        y = vmax + 2;
    }
    Some(Value::Concrete(y))
}

fn flipped(kind: AdtKind, m: Method) -> Option<Method> {
    use Method::*;
    Some(match (kind, m) {
        (AdtKind::Stack | AdtKind::SizedStack, Push) => Pop,
        (AdtKind::Stack | AdtKind::SizedStack, Pop) => Push,
        (AdtKind::Queue | AdtKind::PriorityQueue | AdtKind::Depq, Enq) => Deq,
        (AdtKind::Queue | AdtKind::PriorityQueue | AdtKind::Depq, Deq) => Enq,
        (AdtKind::Depq, DeqMin) => Deq,
        (AdtKind::Set | AdtKind::Multiset, Add) => Remove,
        (AdtKind::Set | AdtKind::Multiset, Remove) => Add,
        (AdtKind::Set | AdtKind::Multiset, Contains) => Remove,
        (AdtKind::Counter, Inc) => Dec,
        (AdtKind::Counter, Dec) => Inc,
        _ => return None,
    })
}

/// One random mutation of `h`, with a short description. The result is a
/// well-formed history but may or may not be linearizable.
pub fn mutate_history(h: &History, seed: u64) -> Result<(History, String), GenError> {
    if h.is_empty() {
        return Err(GenError::EmptyHistory);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h.len();
    let vmax = h
        .ops()
        .iter()
        .filter_map(|o| o.value.concrete())
        .max()
        .unwrap_or(0)
        .max(value_domain(n));

    for _ in 0..64 {
        let mut ops = h.ops().to_vec();
        let i = rng.random_range(0..n);
        let description = match rng.random_range(0..4) {
            0 => {
                let j = rng.random_range(0..n);
                if ops[i].value == ops[j].value
                    || ops[i].value.concrete().is_none()
                    || ops[j].value.concrete().is_none()
                {
                    continue;
                }
                let (a, b) = (ops[i].value, ops[j].value);
                ops[i].value = b;
                ops[j].value = a;
                format!("swapped values of {} and {}", ops[i].id, ops[j].id)
            }
            1 => {
                let Some(m) = flipped(h.kind(), ops[i].method) else {
                    continue;
                };
                if m == Method::Dec || m == Method::Inc {
                    ops[i].method = m;
                } else {
                    if ops[i].value.concrete().is_none() {
                        continue;
                    }
                    ops[i].method = m;
                    if matches!(h.kind(), AdtKind::Set | AdtKind::Multiset) {
                        ops[i].aux = Some(Aux::Bool(true));
                    }
                }
                format!("changed {} to {}", ops[i].id, m)
            }
            2 => {
                if h.kind() == AdtKind::RmwRegister {
                    let Some(Aux::Int(seen)) = ops[i].aux else { continue };
                    ops[i].aux = Some(Aux::Int(seen + 1));
                    format!("changed the value {} read to {}", ops[i].id, seen + 1)
                } else {
                    let Some(v) = retarget(ops[i].value, vmax, &mut rng) else {
                        continue;
                    };
                    ops[i].value = v;
                    format!("changed the value of {} to {}", ops[i].id, v)
                }
            }
            _ => {
                let j = rng.random_range(0..n);
                if i == j || ops[j].inv <= TimeStamp::from_integer(0) {
                    continue;
                }
                // Squeeze operation i into the stretch before j starts.
                let t = ops[j].inv.as_rational().clone();
                let q = |num: i64| TimeStamp::from_rational(&t * num_rational::BigRational::new(num.into(), 4.into()));
                ops[i].inv = q(2);
                ops[i].res = q(3);
                format!("moved {} before {}", ops[i].id, ops[j].id)
            }
        };
        let candidate = History::unvalidated(h.kind(), ops);
        if validate_history(&candidate).is_empty() {
            let out = History::new(h.kind(), candidate.into_ops()).expect("validated above");
            return Ok((out, description));
        }
    }
    Err(GenError::NoMutation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_check;

    #[test]
    fn empty_and_errors() {
        assert!(gen_history(AdtKind::Queue, 0, 1, 7).unwrap().is_empty());
        assert_eq!(gen_history(AdtKind::Queue, 3, 0, 7), Err(GenError::ZeroWidth));
        assert_eq!(
            gen_history(AdtKind::Queue, 2, 3, 7),
            Err(GenError::WidthTooLarge { n: 2, k: 3 })
        );
        assert_eq!(
            mutate_history(&History::empty(AdtKind::Stack), 1).unwrap_err(),
            GenError::EmptyHistory
        );
    }

    #[test]
    fn deterministic() {
        let a = gen_history(AdtKind::Stack, 20, 3, 99).unwrap();
        let b = gen_history(AdtKind::Stack, 20, 3, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(mutate_history(&a, 5).unwrap(), mutate_history(&b, 5).unwrap());
    }

    #[test]
    fn linearizable_within_width() {
        for kind in AdtKind::ALL {
            for seed in 0..20 {
                let h = gen_history(kind, 7, 3, seed).unwrap();
                assert!(h.width() <= 3);
                assert!(oracle_check(&h).unwrap().linearizable, "{kind} seed {seed}");
            }
        }
        let h = gen_history(AdtKind::PriorityQueue, 6, 3, 42).unwrap();
        assert!(crate::aadt::check_aadt(&h).unwrap().linearizable);
    }

    #[test]
    fn queue_never_gets_failed_peeks() {
        for seed in 0..200 {
            let h = gen_history(AdtKind::Queue, 8, 2, seed).unwrap();
            let (m, _) = mutate_history(&h, seed).unwrap();
            for o in h.ops().iter().chain(m.ops()) {
                assert!(!(o.method == Method::Peek && o.value == Value::Empty));
            }
        }
    }

    #[test]
    fn retargeted_dequeue() {
        let h = History::new(
            AdtKind::Queue,
            vec![
                Operation::at("enq", Method::Enq, Value::Concrete(3), 1, 3),
                Operation::at("deq", Method::Deq, Value::Concrete(4), 2, 4),
            ],
        )
        .unwrap();
        assert!(!oracle_check(&h).unwrap().linearizable);
    }
}
