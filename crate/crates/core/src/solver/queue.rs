use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// Order in which pending subproblems are explored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Fraction of captured samples minus the lower bound, largest first.
    #[default]
    Priority,
    /// Smallest lower bound first.
    LowerBound,
    Fifo,
    Lifo,
}

#[derive(Debug)]
pub(crate) struct Entry {
    priority: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Work queue; duplicates of a node are allowed.
#[derive(Debug)]
pub(crate) enum WorkQueue {
    Heap(BinaryHeap<Entry>, Schedule),
    Fifo(VecDeque<usize>),
    Lifo(Vec<usize>),
}

impl WorkQueue {
    pub fn new(schedule: Schedule) -> Self {
        match schedule {
            Schedule::Priority | Schedule::LowerBound => WorkQueue::Heap(BinaryHeap::new(), schedule),
            Schedule::Fifo => WorkQueue::Fifo(VecDeque::new()),
            Schedule::Lifo => WorkQueue::Lifo(Vec::new()),
        }
    }

    /// `fraction` is the share of samples captured, `lb` the node's lower bound.
    pub fn push(&mut self, node: usize, fraction: f64, lb: f64, seq: u64) {
        match self {
            WorkQueue::Heap(heap, schedule) => {
                let priority = match schedule {
                    Schedule::Priority => fraction - lb,
                    _ => -lb,
                };
                heap.push(Entry { priority, seq, node });
            }
            WorkQueue::Fifo(q) => q.push_back(node),
            WorkQueue::Lifo(s) => s.push(node),
        }
    }

    pub fn pop(&mut self) -> Option<usize> {
        match self {
            WorkQueue::Heap(heap, _) => heap.pop().map(|e| e.node),
            WorkQueue::Fifo(q) => q.pop_front(),
            WorkQueue::Lifo(s) => s.pop(),
        }
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        match self {
            WorkQueue::Heap(heap, _) => heap.len(),
            WorkQueue::Fifo(q) => q.len(),
            WorkQueue::Lifo(s) => s.len(),
        }
    }
}
