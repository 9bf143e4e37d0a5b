//! Sequential specifications as simulated objects.
//!
//! Each [`SimulatedObject`] accepts an operation only if the current state
//! produces exactly the recorded value and auxiliary observation. Accepted
//! operations leave an inverse record in a journal so the search engines can
//! backtrack in constant (or logarithmic) time.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{AdtKind, Aux, Method, Operation, Value};

/// An operation stripped of its identity and timing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AbstractOperation {
    pub method: Method,
    pub value: Value,
    pub aux: Option<Aux>,
}

impl AbstractOperation {
    pub fn new(method: Method, value: Value) -> Self {
        AbstractOperation {
            method,
            value,
            aux: None,
        }
    }

    pub fn with_aux(mut self, aux: Aux) -> Self {
        self.aux = Some(aux);
        self
    }
}

impl From<&Operation> for AbstractOperation {
    fn from(o: &Operation) -> Self {
        AbstractOperation {
            method: o.method,
            value: o.value,
            aux: o.aux,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdtError {
    #[error("undo on an object with an empty journal")]
    EmptyJournal,
}

/// Read-only view of an object's abstract state.
#[derive(Debug)]
pub enum StateView<'a> {
    Scalar(i64),
    Bag(&'a BTreeMap<i64, usize>),
    Seq(&'a VecDeque<Value>),
}

#[derive(Clone, Debug)]
enum State {
    /// counter value or register value
    Scalar(i64),
    /// set, multiset and priority queues: value -> multiplicity
    Bag(BTreeMap<i64, usize>),
    /// stack (top at back), queue (front at front), sized stack
    Seq(VecDeque<Value>),
}

#[derive(Clone, Debug)]
enum Undo {
    Nothing,
    Scalar(i64),
    BagInsert(i64),
    BagRemove(i64),
    PushBack,
    PopBack(Value),
    PopFront(Value),
}

#[derive(Clone, Debug)]
pub struct SimulatedObject {
    kind: AdtKind,
    state: State,
    journal: Vec<Undo>,
}

impl SimulatedObject {
    pub fn new(kind: AdtKind) -> Self {
        let state = match kind {
            AdtKind::Counter | AdtKind::RmwRegister => State::Scalar(0),
            AdtKind::Set | AdtKind::Multiset | AdtKind::PriorityQueue | AdtKind::Depq => State::Bag(BTreeMap::new()),
            AdtKind::Stack | AdtKind::Queue | AdtKind::SizedStack => State::Seq(VecDeque::new()),
        };
        SimulatedObject {
            kind,
            state,
            journal: Vec::new(),
        }
    }

    pub fn kind(&self) -> AdtKind {
        self.kind
    }

    pub fn view(&self) -> StateView<'_> {
        match &self.state {
            State::Scalar(v) => StateView::Scalar(*v),
            State::Bag(b) => StateView::Bag(b),
            State::Seq(s) => StateView::Seq(s),
        }
    }

    pub fn depth(&self) -> usize {
        self.journal.len()
    }

    /// Applies `op` if the current state admits it exactly as recorded.
    pub fn apply(&mut self, op: &AbstractOperation) -> bool {
        match self.step(op) {
            Some(undo) => {
                self.journal.push(undo);
                true
            }
            None => false,
        }
    }

    /// Reverts the most recent successful [`apply`](Self::apply).
    pub fn undo(&mut self) -> Result<(), AdtError> {
        let undo = self.journal.pop().ok_or(AdtError::EmptyJournal)?;
        match (&mut self.state, undo) {
            (_, Undo::Nothing) => {}
            (State::Scalar(v), Undo::Scalar(prev)) => *v = prev,
            (State::Bag(b), Undo::BagInsert(x)) => bag_remove(b, x),
            (State::Bag(b), Undo::BagRemove(x)) => *b.entry(x).or_default() += 1,
            (State::Seq(s), Undo::PushBack) => {
                s.pop_back();
            }
            (State::Seq(s), Undo::PopBack(v)) => s.push_back(v),
            (State::Seq(s), Undo::PopFront(v)) => s.push_front(v),
            _ => unreachable!("journal record does not match state shape"),
        }
        Ok(())
    }

    fn step(&mut self, op: &AbstractOperation) -> Option<Undo> {
        use Method::*;
        let AbstractOperation { method, value, aux } = *op;
        if !self.kind.allows(method) {
            return None;
        }
        match (self.kind, &mut self.state) {
            (AdtKind::Counter, State::Scalar(c)) => {
                let prev = *c;
                match (method, value) {
                    (Inc, Value::Empty) if aux.is_none() => *c += 1,
                    (Dec, Value::Empty) if aux.is_none() => *c -= 1,
                    (Read, Value::Concrete(v)) if v == *c && aux.is_none() => return Some(Undo::Nothing),
                    _ => return None,
                }
                Some(Undo::Scalar(prev))
            }
            (AdtKind::RmwRegister, State::Scalar(r)) => match (value, aux) {
                (Value::Concrete(w), Some(Aux::Int(seen))) if seen == *r => {
                    let prev = *r;
                    *r = w;
                    Some(Undo::Scalar(prev))
                }
                _ => None,
            },
            (AdtKind::Set | AdtKind::Multiset, State::Bag(b)) => {
                let v = value.concrete()?;
                let ok = match aux {
                    None => true,
                    Some(Aux::Bool(ok)) => ok,
                    Some(Aux::Int(_)) => return None,
                };
                let present = b.contains_key(&v);
                match method {
                    Add if self.kind == AdtKind::Multiset => ok.then(|| {
                        *b.entry(v).or_default() += 1;
                        Undo::BagInsert(v)
                    }),
                    Add if ok != present => Some(if ok {
                        b.insert(v, 1);
                        Undo::BagInsert(v)
                    } else {
                        Undo::Nothing
                    }),
                    Remove if ok == present => Some(if ok {
                        bag_remove(b, v);
                        Undo::BagRemove(v)
                    } else {
                        Undo::Nothing
                    }),
                    Contains if ok == present => Some(Undo::Nothing),
                    _ => None,
                }
            }
            (AdtKind::PriorityQueue | AdtKind::Depq, State::Bag(b)) => {
                if aux.is_some() {
                    return None;
                }
                let extreme = match method {
                    Enq => {
                        let v = value.concrete()?;
                        *b.entry(v).or_default() += 1;
                        return Some(Undo::BagInsert(v));
                    }
                    Deq | Peek => b.keys().next_back().copied(),
                    DeqMin | PeekMin => b.keys().next().copied(),
                    _ => return None,
                };
                match (extreme, value) {
                    (None, Value::Empty) => Some(Undo::Nothing),
                    (Some(x), Value::Concrete(v)) if x == v => Some(if matches!(method, Deq | DeqMin) {
                        bag_remove(b, v);
                        Undo::BagRemove(v)
                    } else {
                        Undo::Nothing
                    }),
                    _ => None,
                }
            }
            (AdtKind::Stack, State::Seq(s)) => {
                if aux.is_some() {
                    return None;
                }
                match method {
                    Push if value != Value::Empty => {
                        s.push_back(value);
                        Some(Undo::PushBack)
                    }
                    Pop | Peek => match (s.back().copied(), value) {
                        (None, Value::Empty) => Some(Undo::Nothing),
                        (Some(top), v) if top == v => Some(if method == Pop {
                            s.pop_back();
                            Undo::PopBack(top)
                        } else {
                            Undo::Nothing
                        }),
                        _ => None,
                    },
                    _ => None,
                }
            }
            (AdtKind::Queue, State::Seq(q)) => {
                if aux.is_some() {
                    return None;
                }
                match method {
                    Enq if value.concrete().is_some() => {
                        q.push_back(value);
                        Some(Undo::PushBack)
                    }
                    Deq | Peek => match (q.front().copied(), value) {
                        (None, Value::Empty) => Some(Undo::Nothing),
                        (Some(front), v) if front == v => Some(if method == Deq {
                            q.pop_front();
                            Undo::PopFront(front)
                        } else {
                            Undo::Nothing
                        }),
                        _ => None,
                    },
                    _ => None,
                }
            }
            (AdtKind::SizedStack, State::Seq(s)) => {
                let size = s.len() as i64;
                let size_ok = |expected: i64| match aux {
                    None => method == Peek || value == Value::Empty,
                    Some(Aux::Int(x)) => x == expected,
                    Some(Aux::Bool(_)) => false,
                };
                match method {
                    Push if value.concrete().is_some() && size_ok(size + 1) => {
                        s.push_back(value);
                        Some(Undo::PushBack)
                    }
                    Pop | Peek if size_ok(size) => match (s.back().copied(), value) {
                        (None, Value::Empty) => Some(Undo::Nothing),
                        (Some(top), v) if top == v => Some(if method == Pop {
                            s.pop_back();
                            Undo::PopBack(top)
                        } else {
                            Undo::Nothing
                        }),
                        _ => None,
                    },
                    _ => None,
                }
            }
            _ => unreachable!("state shape fixed by kind"),
        }
    }

    /// Canonical encoding of the abstract state: the counter or register value,
    /// sorted contents for bag-like kinds, contents in order for sequences.
    pub fn fingerprint(&self) -> String {
        match &self.state {
            State::Scalar(v) => v.to_string(),
            State::Bag(b) => {
                let items: Vec<String> = b
                    .iter()
                    .flat_map(|(v, &c)| std::iter::repeat_n(v.to_string(), c))
                    .collect();
                format!("[{}]", items.join(","))
            }
            State::Seq(s) => {
                let mut out = String::from("[");
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{v}");
                }
                out.push(']');
                out
            }
        }
    }
}

fn bag_remove(b: &mut BTreeMap<i64, usize>, v: i64) {
    let c = b.get_mut(&v).expect("value present in bag");
    *c -= 1;
    if *c == 0 {
        b.remove(&v);
    }
}

pub fn new_object(kind: AdtKind) -> SimulatedObject {
    SimulatedObject::new(kind)
}

pub fn apply_op(obj: &mut SimulatedObject, op: &AbstractOperation) -> bool {
    obj.apply(op)
}

pub fn undo_op(obj: &mut SimulatedObject) -> Result<(), AdtError> {
    obj.undo()
}

pub fn state_fingerprint(obj: &SimulatedObject) -> String {
    obj.fingerprint()
}

/// Whether `seq` belongs to the sequential specification of `kind`.
pub fn sequence_member<'a, I>(kind: AdtKind, seq: I) -> bool
where
    I: IntoIterator<Item = &'a AbstractOperation>,
{
    let mut obj = SimulatedObject::new(kind);
    seq.into_iter().all(|op| obj.apply(op))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(m: Method, v: i64) -> AbstractOperation {
        AbstractOperation::new(m, Value::Concrete(v))
    }

    fn eps(m: Method) -> AbstractOperation {
        AbstractOperation::new(m, Value::Empty)
    }

    #[test]
    fn initial_fingerprints() {
        assert_eq!(new_object(AdtKind::Counter).fingerprint(), "0");
        assert_eq!(new_object(AdtKind::PriorityQueue).fingerprint(), "[]");
        assert_eq!(new_object(AdtKind::RmwRegister).fingerprint(), "0");
    }

    #[test]
    fn max_priority_queue() {
        let mut pq = new_object(AdtKind::PriorityQueue);
        for v in 1..=3 {
            assert!(pq.apply(&op(Method::Enq, v)));
        }
        assert!(pq.apply(&op(Method::Deq, 3)));
        assert_eq!(pq.fingerprint(), "[1,2]");

        let mut pq = new_object(AdtKind::PriorityQueue);
        assert!(pq.apply(&op(Method::Enq, 1)));
        assert!(pq.apply(&op(Method::Enq, 2)));
        assert!(!pq.apply(&op(Method::Deq, 1)));
        assert_eq!(pq.fingerprint(), "[1,2]");
    }

    #[test]
    fn depq_both_ends() {
        let mut d = new_object(AdtKind::Depq);
        for v in [5, 1, 9] {
            assert!(d.apply(&op(Method::Enq, v)));
        }
        assert!(d.apply(&op(Method::PeekMin, 1)));
        assert!(d.apply(&op(Method::DeqMin, 1)));
        assert!(d.apply(&op(Method::Deq, 9)));
        assert!(!d.apply(&op(Method::Deq, 1)));
        assert!(d.apply(&op(Method::Deq, 5)));
        assert!(d.apply(&eps(Method::DeqMin)));
    }

    #[test]
    fn queue_specification_examples() {
        let tau1 = [
            op(Method::Enq, 1),
            op(Method::Enq, 2),
            op(Method::Deq, 1),
            op(Method::Deq, 2),
        ];
        assert!(sequence_member(AdtKind::Queue, &tau1));
        let tau2 = [op(Method::Enq, 1), op(Method::Deq, 2), op(Method::Enq, 2)];
        assert!(!sequence_member(AdtKind::Queue, &tau2));
        let mut q = new_object(AdtKind::Queue);
        assert!(q.apply(&tau2[0]));
        assert!(!q.apply(&tau2[1]));
        for kind in AdtKind::ALL {
            assert!(sequence_member(kind, &[]));
        }
    }

    #[test]
    fn counter_and_register() {
        let mut c = new_object(AdtKind::Counter);
        assert!(c.apply(&eps(Method::Inc)));
        assert!(c.apply(&eps(Method::Inc)));
        assert!(c.apply(&eps(Method::Dec)));
        assert_eq!(c.fingerprint(), "1");
        assert!(c.apply(&op(Method::Read, 1)));
        assert!(!c.apply(&op(Method::Read, 2)));

        let mut r = new_object(AdtKind::RmwRegister);
        assert!(r.apply(&op(Method::Rmw, 1).with_aux(Aux::Int(0))));
        assert!(r.apply(&op(Method::Rmw, 5).with_aux(Aux::Int(1))));
        assert!(!r.apply(&op(Method::Rmw, 7).with_aux(Aux::Int(1))));
        assert_eq!(r.fingerprint(), "5");
    }

    #[test]
    fn set_results_must_match_state() {
        let mut s = new_object(AdtKind::Set);
        assert!(!s.apply(&op(Method::Add, 1).with_aux(Aux::Bool(false))));
        assert!(s.apply(&op(Method::Add, 1).with_aux(Aux::Bool(true))));
        assert!(s.apply(&op(Method::Add, 1).with_aux(Aux::Bool(false))));
        assert!(s.apply(&op(Method::Contains, 1).with_aux(Aux::Bool(true))));
        assert!(s.apply(&op(Method::Remove, 2).with_aux(Aux::Bool(false))));
        assert!(!s.apply(&op(Method::Remove, 2)));

        let mut m = new_object(AdtKind::Multiset);
        assert!(m.apply(&op(Method::Add, 1)));
        assert!(m.apply(&op(Method::Add, 1)));
        assert!(!m.apply(&op(Method::Add, 1).with_aux(Aux::Bool(false))));
        assert_eq!(m.fingerprint(), "[1,1]");
    }

    #[test]
    fn stacks_and_failed_operations() {
        let mut s = new_object(AdtKind::Stack);
        assert!(s.apply(&eps(Method::Pop)));
        assert!(s.apply(&eps(Method::Peek)));
        assert!(s.apply(&op(Method::Push, 1)));
        assert!(!s.apply(&eps(Method::Peek)));
        assert!(s.apply(&op(Method::Peek, 1)));
        assert!(s.apply(&AbstractOperation::new(Method::Push, Value::Bottom)));
        assert!(s.apply(&AbstractOperation::new(Method::Peek, Value::Bottom)));
        assert_eq!(s.fingerprint(), "[1,⊥]");

        let mut z = new_object(AdtKind::SizedStack);
        assert!(z.apply(&op(Method::Push, 4).with_aux(Aux::Int(1))));
        assert!(!z.apply(&op(Method::Push, 4).with_aux(Aux::Int(1))));
        assert!(z.apply(&op(Method::Push, 4).with_aux(Aux::Int(2))));
        assert!(!z.apply(&op(Method::Pop, 4).with_aux(Aux::Int(1))));
        assert!(z.apply(&op(Method::Pop, 4).with_aux(Aux::Int(2))));
        assert!(z.apply(&op(Method::Peek, 4)));
    }

    #[test]
    fn undo_restores_and_fails_when_empty() {
        let mut q = new_object(AdtKind::Queue);
        assert_eq!(q.undo(), Err(AdtError::EmptyJournal));
        let before = q.fingerprint();
        assert!(q.apply(&op(Method::Enq, 5)));
        q.undo().unwrap();
        assert_eq!(q.fingerprint(), before);
    }

    #[test]
    fn stack_and_queue_are_not_anagram_agnostic() {
        // Same multiset of operations, both orders legal, different states.
        let a = [op(Method::Push, 1), op(Method::Push, 2)];
        let b = [op(Method::Push, 2), op(Method::Push, 1)];
        let fp = |kind, seq: &[AbstractOperation]| {
            let mut o = new_object(kind);
            assert!(seq.iter().all(|x| o.apply(x)));
            o.fingerprint()
        };
        assert_ne!(fp(AdtKind::Stack, &a), fp(AdtKind::Stack, &b));
        // and a suffix separates them
        let probe = op(Method::Pop, 2);
        assert!(sequence_member(AdtKind::Stack, a.iter().chain([&probe])));
        assert!(!sequence_member(AdtKind::Stack, b.iter().chain([&probe])));

        let a = [op(Method::Enq, 1), op(Method::Enq, 2)];
        let b = [op(Method::Enq, 2), op(Method::Enq, 1)];
        assert_ne!(fp(AdtKind::Queue, &a), fp(AdtKind::Queue, &b));
        let probe = op(Method::Deq, 1);
        assert!(sequence_member(AdtKind::Queue, a.iter().chain([&probe])));
        assert!(!sequence_member(AdtKind::Queue, b.iter().chain([&probe])));
    }
}
