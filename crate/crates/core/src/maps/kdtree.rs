//! Exact k-nearest-neighbour search over a median-split k-d tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Row-major points.
    points: Vec<f64>,
    /// Point ids, grouped by leaf.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// `(squared distance, index)`, ordered so the heap top is the worst candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    /// Builds the tree over `count = points.len() / dim` row-major points.
    pub fn build(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::invalid("point buffer is not a whole number of rows"));
        }
        let count = points.len() / dim;
        if count == 0 {
            return Err(Error::invalid("k-d tree needs at least one point"));
        }
        let mut tree = Self {
            dim,
            points,
            order: (0..count).collect(),
            nodes: Vec::new(),
        };
        tree.split(0, count);
        Ok(tree)
    }

    fn coord(&self, id: usize, axis: usize) -> f64 {
        self.points[id * self.dim + axis]
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return slot;
        }
        let axis = (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.order[start..end]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &id| {
                        (lo.min(self.coord(id, a)), hi.max(self.coord(id, a)))
                    });
                (a, hi - lo)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
            .map(|(a, _)| a)
            .unwrap();
        let mid = start + (end - start) / 2;
        let (dim, points) = (self.dim, &self.points);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis].total_cmp(&points[b * dim + axis])
        });
        let value = self.coord(self.order[mid], axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.split(start, mid);
        let right = self.split(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.points[id * self.dim..(id + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// The `k` nearest points to `q`, closest first (ties by index).
    pub fn query(&self, q: &[f64], k: usize) -> Result<Vec<usize>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "k-d tree query",
                expected: self.dim,
                found: q.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "asked for {k} neighbours among {} points",
                self.len()
            )));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|c| c.1).collect())
    }

    fn search(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let cand = Candidate(squared_distance(self.point(id), q), id);
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, heap);
                if heap.len() < k || delta * delta <= heap.peek().unwrap().0 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reference answer by sorting every distance.
pub fn linear_scan(points: &[f64], dim: usize, q: &[f64], k: usize) -> Vec<usize> {
    let mut all: Vec<Candidate> = points
        .chunks_exact(dim)
        .enumerate()
        .map(|(i, p)| Candidate(squared_distance(p, q), i))
        .collect();
    all.sort();
    all.truncate(k);
    all.into_iter().map(|c| c.1).collect()
}
