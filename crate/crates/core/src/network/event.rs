//! Deterministic discrete-event queue.
//!
//! Events pop in non-decreasing time; ties break by insertion sequence
//! number, so identical schedules replay identically. Scheduling an event
//! earlier than the current simulation time is a causality bug and panics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug)]
struct Entry<T> {
    time_ns: f64,
    seq: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.time_ns == other.time_ns && self.seq == other.seq
    }
}
impl<T> Eq for Entry<T> {}

impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want earliest-first.
        other
            .time_ns
            .total_cmp(&self.time_ns)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<Entry<T>>,
    now_ns: f64,
    seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now_ns: 0.0,
            seq: 0,
        }
    }

    pub fn now_ns(&self) -> f64 {
        self.now_ns
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule(&mut self, time_ns: f64, payload: T) {
        assert!(
            time_ns >= self.now_ns,
            "causality violation: scheduling at {time_ns} ns before now = {} ns",
            self.now_ns
        );
        let entry = Entry {
            time_ns,
            seq: self.seq,
            payload,
        };
        self.seq += 1;
        self.heap.push(entry);
    }

    pub fn pop(&mut self) -> Option<(f64, T)> {
        let entry = self.heap.pop()?;
        debug_assert!(entry.time_ns >= self.now_ns);
        self.now_ns = entry.time_ns;
        Some((entry.time_ns, entry.payload))
    }
}
