//! Operations, histories and exact time handling.
//!
//! A [`History`] records the operations observed on a single concurrent
//! object. Every operation carries an invocation and a response time; times are
//! exact non-negative rationals so that strict comparisons between endpoints
//! never depend on rounding.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An exact, non-negative point in logical time.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeStamp(BigRational);

impl TimeStamp {
    pub fn from_integer(v: i64) -> Self {
        TimeStamp(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        TimeStamp(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        TimeStamp(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for TimeStamp {
    type Err = String;

    /// Accepts `"p"` or `"p/q"` with decimal integers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s, "1"),
        };
        let num: BigInt = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let den: BigInt = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        let r = BigRational::new(num, den);
        if r.is_negative() {
            return Err(format!("negative time {s:?}"));
        }
        Ok(TimeStamp(r))
    }
}

/// The abstract data type monitored by a history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdtKind {
    Stack,
    Queue,
    PriorityQueue,
    Depq,
    Set,
    Multiset,
    Counter,
    RmwRegister,
    SizedStack,
}

impl AdtKind {
    pub const ALL: [AdtKind; 9] = [
        AdtKind::Stack,
        AdtKind::Queue,
        AdtKind::PriorityQueue,
        AdtKind::Depq,
        AdtKind::Set,
        AdtKind::Multiset,
        AdtKind::Counter,
        AdtKind::RmwRegister,
        AdtKind::SizedStack,
    ];

    /// The seven anagram-agnostic kinds.
    pub const AADT: [AdtKind; 7] = [
        AdtKind::PriorityQueue,
        AdtKind::Depq,
        AdtKind::Set,
        AdtKind::Multiset,
        AdtKind::Counter,
        AdtKind::RmwRegister,
        AdtKind::SizedStack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdtKind::Stack => "stack",
            AdtKind::Queue => "queue",
            AdtKind::PriorityQueue => "priority-queue",
            AdtKind::Depq => "depq",
            AdtKind::Set => "set",
            AdtKind::Multiset => "multiset",
            AdtKind::Counter => "counter",
            AdtKind::RmwRegister => "rmw-register",
            AdtKind::SizedStack => "sized-stack",
        }
    }

    pub fn is_aadt(self) -> bool {
        !matches!(self, AdtKind::Stack | AdtKind::Queue)
    }

    pub fn methods(self) -> &'static [Method] {
        use Method::*;
        match self {
            AdtKind::Stack | AdtKind::SizedStack => &[Push, Pop, Peek],
            AdtKind::Queue | AdtKind::PriorityQueue => &[Enq, Deq, Peek],
            AdtKind::Depq => &[Enq, Deq, DeqMin, Peek, PeekMin],
            AdtKind::Set | AdtKind::Multiset => &[Add, Remove, Contains],
            AdtKind::Counter => &[Inc, Dec, Read],
            AdtKind::RmwRegister => &[Rmw],
        }
    }

    pub fn allows(self, m: Method) -> bool {
        self.methods().contains(&m)
    }
}

impl fmt::Display for AdtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdtKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdtKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown adt {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Push,
    Pop,
    Peek,
    Enq,
    Deq,
    DeqMin,
    PeekMin,
    Inc,
    Dec,
    Read,
    Add,
    Remove,
    Contains,
    Rmw,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Push,
        Method::Pop,
        Method::Peek,
        Method::Enq,
        Method::Deq,
        Method::DeqMin,
        Method::PeekMin,
        Method::Inc,
        Method::Dec,
        Method::Read,
        Method::Add,
        Method::Remove,
        Method::Contains,
        Method::Rmw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Push => "push",
            Method::Pop => "pop",
            Method::Peek => "peek",
            Method::Enq => "enq",
            Method::Deq => "deq",
            Method::DeqMin => "deq-min",
            Method::PeekMin => "peek-min",
            Method::Inc => "inc",
            Method::Dec => "dec",
            Method::Read => "read",
            Method::Add => "add",
            Method::Remove => "remove",
            Method::Contains => "contains",
            Method::Rmw => "rmw",
        }
    }

    /// Methods whose value may be ε (a failed removal or observation).
    pub fn may_fail(self) -> bool {
        matches!(
            self,
            Method::Pop | Method::Peek | Method::Deq | Method::DeqMin | Method::PeekMin
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// The argument or result carried by an operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Concrete(i64),
    /// ε: the result of a failed operation, or no argument at all.
    Empty,
    /// ⊥: sentinel introduced by the failed-operation embedding for stacks.
    Bottom,
}

impl Value {
    pub fn concrete(self) -> Option<i64> {
        match self {
            Value::Concrete(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_empty(self) -> bool {
        self == Value::Empty
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Concrete(v) => write!(f, "{v}"),
            Value::Empty => f.write_str("ε"),
            Value::Bottom => f.write_str("⊥"),
        }
    }
}

/// Auxiliary observation recorded with an operation (a size, a success flag, an
/// observed pre-value).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Aux {
    Bool(bool),
    Int(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub id: String,
    pub method: Method,
    pub value: Value,
    pub aux: Option<Aux>,
    pub inv: TimeStamp,
    pub res: TimeStamp,
}

impl Operation {
    pub fn new(id: impl Into<String>, method: Method, value: Value, inv: TimeStamp, res: TimeStamp) -> Self {
        Operation {
            id: id.into(),
            method,
            value,
            aux: None,
            inv,
            res,
        }
    }

    pub fn with_aux(mut self, aux: Aux) -> Self {
        self.aux = Some(aux);
        self
    }

    /// Shorthand for integer-timed operations, used heavily by tests.
    pub fn at(id: impl Into<String>, method: Method, value: Value, inv: i64, res: i64) -> Self {
        Operation::new(
            id,
            method,
            value,
            TimeStamp::from_integer(inv),
            TimeStamp::from_integer(res),
        )
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}({})", self.id, self.method, self.value)?;
        if let Some(aux) = self.aux {
            match aux {
                Aux::Bool(b) => write!(f, "=>{b}")?,
                Aux::Int(i) => write!(f, "=>{i}")?,
            }
        }
        write!(f, "[{}, {}]", self.inv, self.res)
    }
}

/// What a violation is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateId,
    InvNotBeforeRes,
    MethodNotAllowed,
    BadValue,
    BadAux,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub op_id: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "operation {:?}: {}", self.op_id, self.message)
    }
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("malformed history document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("operation {op:?}: unparseable time {text:?}: {reason}")]
    BadTime { op: String, text: String, reason: String },
    #[error("operation {op:?}: {message}")]
    Invalid {
        op: String,
        kind: ViolationKind,
        message: String,
    },
}

impl From<Violation> for HistoryError {
    fn from(v: Violation) -> Self {
        HistoryError::Invalid {
            op: v.op_id,
            kind: v.kind,
            message: v.message,
        }
    }
}

/// A finite set of operations on one object, plus derived metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct History {
    kind: AdtKind,
    ops: Vec<Operation>,
    width: usize,
}

impl History {
    /// Builds a history and rejects it if any invariant is violated.
    pub fn new(kind: AdtKind, ops: Vec<Operation>) -> Result<Self, HistoryError> {
        let h = History::unvalidated(kind, ops);
        match validate_history(&h).into_iter().next() {
            Some(v) => Err(v.into()),
            None => Ok(h),
        }
    }

    /// Builds a history without checking invariants. Checkers assume valid input;
    /// use [`validate_history`] before handing such a history to them.
    pub fn unvalidated(kind: AdtKind, ops: Vec<Operation>) -> Self {
        let width = sweep_width(&ops);
        History { kind, ops, width }
    }

    pub fn empty(kind: AdtKind) -> Self {
        History::unvalidated(kind, Vec::new())
    }

    pub fn kind(&self) -> AdtKind {
        self.kind
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn op(&self, i: usize) -> &Operation {
        &self.ops[i]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The concurrency width k.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Sorted multiset of all invocation and response times.
    pub fn endpoints(&self) -> Vec<TimeStamp> {
        let mut ts: Vec<TimeStamp> = self.ops.iter().flat_map(|o| [o.inv.clone(), o.res.clone()]).collect();
        ts.sort();
        ts
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ops.iter().position(|o| o.id == id)
    }

    pub fn into_ops(self) -> Vec<Operation> {
        self.ops
    }

    pub fn with_kind(self, kind: AdtKind) -> Self {
        History { kind, ..self }
    }

    pub fn to_json(&self) -> String {
        serialize_history(self)
    }
}

/// Maximum number of closed intervals sharing a common point.
fn sweep_width(ops: &[Operation]) -> usize {
    // (time, 0 = inv, 1 = res): invocations sort first at equal times so that
    // touching closed intervals count as overlapping.
    let mut events: Vec<(&TimeStamp, u8)> = ops.iter().flat_map(|o| [(&o.inv, 0u8), (&o.res, 1u8)]).collect();
    events.sort();
    let (mut active, mut best) = (0usize, 0usize);
    for (_, e) in events {
        if e == 0 {
            active += 1;
            best = best.max(active);
        } else {
            active -= 1;
        }
    }
    best
}

/// Concurrency width of `h`: the largest number of operations whose intervals
/// contain a common time.
pub fn concurrency_width(h: &History) -> usize {
    h.width
}

/// Checks every operation and history invariant.
pub fn validate_history(h: &History) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for op in &h.ops {
        let mut violate = |kind, message: String| {
            out.push(Violation {
                op_id: op.id.clone(),
                kind,
                message,
            })
        };
        if !seen.insert(op.id.as_str()) {
            violate(ViolationKind::DuplicateId, "duplicate id".into());
        }
        if op.inv >= op.res {
            violate(
                ViolationKind::InvNotBeforeRes,
                format!("inv ≥ res ({} ≥ {})", op.inv, op.res),
            );
        }
        if !h.kind.allows(op.method) {
            violate(
                ViolationKind::MethodNotAllowed,
                format!("method {} is not allowed for {}", op.method, h.kind),
            );
            continue;
        }
        if let Err(msg) = check_value_shape(h.kind, op) {
            violate(ViolationKind::BadValue, msg);
        }
        if let Err(msg) = check_aux_shape(h.kind, op) {
            violate(ViolationKind::BadAux, msg);
        }
    }
    out
}

fn check_value_shape(kind: AdtKind, op: &Operation) -> Result<(), String> {
    use Method::*;
    let ok = match op.method {
        Inc | Dec => op.value == Value::Empty,
        m if m.may_fail() => true,
        // ⊥ only reaches pushes through the stack embedding.
        Push if kind == AdtKind::Stack => op.value != Value::Empty,
        _ => matches!(op.value, Value::Concrete(_)),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("value {} is not allowed for {}", op.value, op.method))
    }
}

fn check_aux_shape(kind: AdtKind, op: &Operation) -> Result<(), String> {
    use Method::*;
    let ok = match kind {
        AdtKind::Set | AdtKind::Multiset => matches!(op.aux, None | Some(Aux::Bool(_))),
        AdtKind::RmwRegister => matches!(op.aux, Some(Aux::Int(_))),
        AdtKind::SizedStack => match (op.method, op.value) {
            (Push | Pop, Value::Concrete(_)) => matches!(op.aux, Some(Aux::Int(s)) if s >= 1),
            (_, Value::Empty) => matches!(op.aux, None | Some(Aux::Int(0))),
            _ => matches!(op.aux, None | Some(Aux::Int(1..))),
        },
        _ => op.aux.is_none(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("aux {:?} is not allowed for {} on {}", op.aux, op.method, kind))
    }
}

/// Replaces every endpoint by its rank among the distinct endpoint values.
/// Equal endpoints keep equal ranks, so the relative order of all endpoints is
/// preserved exactly.
pub fn normalize_times(h: &History) -> History {
    let mut distinct = h.endpoints();
    distinct.dedup();
    let rank = |t: &TimeStamp| distinct.binary_search(t).expect("endpoint present") as i64;
    let ops = h
        .ops
        .iter()
        .map(|o| Operation {
            inv: TimeStamp::from_integer(rank(&o.inv)),
            res: TimeStamp::from_integer(rank(&o.res)),
            ..o.clone()
        })
        .collect();
    History {
        kind: h.kind,
        ops,
        width: h.width,
    }
}

// ---------------------------------------------------------------------------
// JSON document format

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistory {
    adt: String,
    operations: Vec<RawOperation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperation {
    id: String,
    method: String,
    #[serde(default)]
    value: Option<i64>,
    #[serde(default)]
    aux: Option<Aux>,
    inv: RawTime,
    res: RawTime,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawTime {
    Int(u64),
    Text(String),
}

impl RawTime {
    fn parse(&self, op: &str) -> Result<TimeStamp, HistoryError> {
        match self {
            RawTime::Int(v) => Ok(TimeStamp(BigRational::from_integer(BigInt::from(*v)))),
            RawTime::Text(s) => s.parse().map_err(|reason| HistoryError::BadTime {
                op: op.to_string(),
                text: s.clone(),
                reason,
            }),
        }
    }

    fn from_stamp(t: &TimeStamp) -> RawTime {
        match (t.is_integer(), u64::try_from(t.0.numer())) {
            (true, Ok(v)) => RawTime::Int(v),
            _ => RawTime::Text(t.to_string()),
        }
    }
}

/// Parses and validates a history document.
pub fn parse_history(text: &str) -> Result<History, HistoryError> {
    let raw: RawHistory = serde_json::from_str(text)?;
    let kind: AdtKind = raw.adt.parse().map_err(HistoryError::Schema)?;
    let mut ops = Vec::with_capacity(raw.operations.len());
    for r in raw.operations {
        let method: Method = r.method.parse().map_err(|e: String| HistoryError::Invalid {
            op: r.id.clone(),
            kind: ViolationKind::MethodNotAllowed,
            message: e,
        })?;
        let inv = r.inv.parse(&r.id)?;
        let res = r.res.parse(&r.id)?;
        ops.push(Operation {
            value: r.value.map_or(Value::Empty, Value::Concrete),
            aux: r.aux,
            id: r.id,
            method,
            inv,
            res,
        });
    }
    History::new(kind, ops)
}

/// Serializes a history to the document format read by [`parse_history`].
///
/// Panics if the history contains the internal ⊥ sentinel, which has no
/// document representation.
pub fn serialize_history(h: &History) -> String {
    let raw = RawHistory {
        adt: h.kind.name().to_string(),
        operations: h
            .ops
            .iter()
            .map(|o| RawOperation {
                id: o.id.clone(),
                method: o.method.name().to_string(),
                value: match o.value {
                    Value::Concrete(v) => Some(v),
                    Value::Empty => None,
                    Value::Bottom => panic!("⊥ cannot be serialized"),
                },
                aux: o.aux,
                inv: RawTime::from_stamp(&o.inv),
                res: RawTime::from_stamp(&o.res),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("history serializes")
}
