//! Verdicts and witness linearizations.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::adt::{AbstractOperation, SimulatedObject};
use crate::model::{History, TimeStamp};

/// One operation placed at its linearization point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessEntry {
    pub op: usize,
    pub time: TimeStamp,
}

/// The outcome of a linearizability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub linearizable: bool,
    /// Present on positive verdicts: the operations in linearization order.
    pub witness: Option<Vec<WitnessEntry>>,
}

impl Verdict {
    pub fn rejected() -> Self {
        Verdict {
            linearizable: false,
            witness: None,
        }
    }

    /// A positive verdict for the interval-consistent `order` of `h`.
    ///
    /// Panics if `order` is not interval-consistent; every engine only produces
    /// orders read off frontier paths.
    pub fn accepted(h: &History, order: &[usize]) -> Self {
        let witness = assign_timestamps(h, order).expect("engine produced an interval-consistent order");
        Verdict {
            linearizable: true,
            witness: Some(witness),
        }
    }

    pub fn order(&self) -> Option<Vec<usize>> {
        self.witness.as_ref().map(|w| w.iter().map(|e| e.op).collect())
    }
}

/// Places each operation of `order` at a rational time strictly inside its
/// interval with strictly increasing times. Each operation goes into the first
/// gap between distinct endpoints that follows both its own invocation and its
/// predecessor; operations sharing a gap are spread evenly across it.
///
/// Returns `None` if `order` is not a permutation that admits such times.
pub fn assign_timestamps(h: &History, order: &[usize]) -> Option<Vec<WitnessEntry>> {
    if order.len() != h.len() {
        return None;
    }
    let mut seen = vec![false; h.len()];
    let mut points: Vec<&TimeStamp> = h.ops().iter().flat_map(|o| [&o.inv, &o.res]).collect();
    points.sort();
    points.dedup();
    let rank = |t: &TimeStamp| points.binary_search(&t).unwrap();

    let mut gaps = Vec::with_capacity(order.len());
    let mut gap = 0usize;
    for &i in order {
        if std::mem::replace(seen.get_mut(i)?, true) {
            return None;
        }
        let op = h.op(i);
        gap = gap.max(rank(&op.inv));
        if gap >= rank(&op.res) {
            return None;
        }
        gaps.push(gap);
    }

    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < gaps.len() {
        let g = gaps[start];
        let end = start + gaps[start..].iter().take_while(|&&x| x == g).count();
        let lo = points[g].as_rational();
        let width = points[g + 1].as_rational() - lo;
        let parts = BigInt::from(end - start + 1);
        for (j, &op) in order[start..end].iter().enumerate() {
            let frac = BigRational::new(BigInt::from(j + 1), parts.clone());
            out.push(WitnessEntry {
                op,
                time: TimeStamp::from_rational(lo + &width * frac),
            });
        }
        start = end;
    }
    Some(out)
}

/// Checks that `witness` is a legal linearization of `h`: every operation
/// appears once, strictly inside its interval, times strictly increase, and
/// the induced sequence is accepted by the sequential specification.
pub fn validate_witness(h: &History, witness: &[WitnessEntry]) -> Result<(), String> {
    if witness.len() != h.len() {
        return Err(format!(
            "witness has {} entries, history has {}",
            witness.len(),
            h.len()
        ));
    }
    let mut seen = vec![false; h.len()];
    let mut obj = SimulatedObject::new(h.kind());
    let mut last: Option<&TimeStamp> = None;
    for e in witness {
        let op = h.ops().get(e.op).ok_or_else(|| format!("unknown operation {}", e.op))?;
        if std::mem::replace(&mut seen[e.op], true) {
            return Err(format!("{} appears twice", op.id));
        }
        if !(op.inv < e.time && e.time < op.res) {
            return Err(format!("{} placed at {} outside its interval", op.id, e.time));
        }
        if last.is_some_and(|t| *t >= e.time) {
            return Err(format!("{} placed at {} breaks strict ordering", op.id, e.time));
        }
        last = Some(&e.time);
        if !obj.apply(&AbstractOperation::from(op)) {
            return Err(format!("{op} is illegal at its position"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdtKind, Method, Operation, Value};

    fn h_queue() -> History {
        History::new(
            AdtKind::Queue,
            vec![
                Operation::at("o1", Method::Enq, Value::Concrete(3), 1, 3),
                Operation::at("o2", Method::Deq, Value::Concrete(3), 2, 4),
            ],
        )
        .unwrap()
    }

    #[test]
    fn timestamps_inside_intervals() {
        let h = h_queue();
        let w = assign_timestamps(&h, &[0, 1]).unwrap();
        assert_eq!(w[0].time, TimeStamp::from_ratio(3, 2));
        assert_eq!(w[1].time, TimeStamp::from_ratio(5, 2));
        assert!(validate_witness(&h, &w).is_ok());
        // reversed order is interval-consistent but illegal for a queue
        let w = assign_timestamps(&h, &[1, 0]).unwrap();
        assert!(validate_witness(&h, &w).unwrap_err().contains("illegal"));
    }

    #[test]
    fn shared_gap_is_split() {
        let h = History::new(
            AdtKind::Counter,
            (0..3)
                .map(|i| Operation::at(format!("c{i}"), Method::Inc, Value::Empty, 0, 1))
                .collect(),
        )
        .unwrap();
        let w = assign_timestamps(&h, &[2, 0, 1]).unwrap();
        let times: Vec<String> = w.iter().map(|e| e.time.to_string()).collect();
        assert_eq!(times, ["1/4", "1/2", "3/4"]);
        assert!(validate_witness(&h, &w).is_ok());
    }

    #[test]
    fn inconsistent_orders_are_rejected() {
        let h = History::new(
            AdtKind::Counter,
            vec![
                Operation::at("a", Method::Inc, Value::Empty, 1, 2),
                Operation::at("b", Method::Inc, Value::Empty, 3, 4),
            ],
        )
        .unwrap();
        assert!(assign_timestamps(&h, &[1, 0]).is_none());
        assert!(assign_timestamps(&h, &[0, 0]).is_none());
        assert!(assign_timestamps(&h, &[0]).is_none());
    }
}
