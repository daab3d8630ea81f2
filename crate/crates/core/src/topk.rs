//! Bounded result sets ordered by `(distance, id)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f32,
}

impl Neighbor {
    pub fn new(id: u32, distance: f32) -> Self {
        Neighbor { id, distance }
    }

    /// Ascending distance, then ascending id.
    #[inline]
    pub fn cmp_by_distance(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

/// Max-heap entry: the farthest neighbor sits on top.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Farthest(pub Neighbor);

impl PartialEq for Farthest {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Farthest {}
impl PartialOrd for Farthest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Farthest {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_by_distance(&other.0)
    }
}

/// Min-heap entry: the nearest neighbor sits on top.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Nearest(pub Neighbor);

impl PartialEq for Nearest {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Nearest {}
impl PartialOrd for Nearest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Nearest {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cmp_by_distance(&self.0)
    }
}

/// The `capacity` best neighbors seen so far.
#[derive(Debug, Clone)]
pub struct TopK {
    capacity: usize,
    heap: BinaryHeap<Farthest>,
}

impl TopK {
    pub fn new(capacity: usize) -> Self {
        TopK {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    /// DCO threshold: the worst kept distance once full, infinity before.
    #[inline]
    pub fn threshold(&self) -> f32 {
        if self.is_full() {
            self.heap.peek().map_or(f32::INFINITY, |f| f.0.distance)
        } else {
            f32::INFINITY
        }
    }

    pub fn worst(&self) -> Option<Neighbor> {
        self.heap.peek().map(|f| f.0)
    }

    /// Inserts `n`, evicting the worst entry if over capacity. Returns false
    /// when `n` itself was the one evicted.
    pub fn push(&mut self, n: Neighbor) -> bool {
        if self.capacity == 0 {
            return false;
        }
        self.heap.push(Farthest(n));
        if self.heap.len() > self.capacity {
            let evicted = self.heap.pop().unwrap().0;
            return !(evicted.id == n.id && evicted.distance.to_bits() == n.distance.to_bits());
        }
        true
    }

    pub fn into_sorted(self) -> Vec<Neighbor> {
        let mut v: Vec<Neighbor> = self.heap.into_iter().map(|f| f.0).collect();
        v.sort_by(Neighbor::cmp_by_distance);
        v
    }
}

/// Output of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Sorted by ascending distance, ties by id.
    pub neighbors: Vec<Neighbor>,
    /// Fewer than `K` candidates were available.
    pub incomplete: bool,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<u32> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}
