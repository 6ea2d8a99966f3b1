use std::cmp::Ordering;
use std::collections::BinaryHeap;

struct Slot<T> {
    key: f64,
    tie: u64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Slot<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Slot<T> {}

impl<T> PartialOrd for Slot<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Slot<T> {
    // Reversed so that `BinaryHeap` pops the smallest (key, tie, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.tie.cmp(&self.tie))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-priority queue keyed by `(key, tie)` that counts insertions.
pub(crate) struct MinQueue<T> {
    heap: BinaryHeap<Slot<T>>,
    seq: u64,
}

impl<T> MinQueue<T> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    pub fn push(&mut self, key: f64, tie: u64, item: T) {
        self.heap.push(Slot {
            key,
            tie,
            seq: self.seq,
            item,
        });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(f64, T)> {
        self.heap.pop().map(|s| (s.key, s.item))
    }

    /// Total number of pushes so far.
    pub fn insertions(&self) -> u64 {
        self.seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_key_then_tie_order() {
        let mut q = MinQueue::new();
        q.push(2.0, 0, "c");
        q.push(1.0, 5, "b");
        q.push(1.0, 3, "a");
        q.push(f64::INFINITY, 0, "d");
        assert_eq!(q.insertions(), 4);
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, v)| v)).collect();
        assert_eq!(order, ["a", "b", "c", "d"]);
    }
}
