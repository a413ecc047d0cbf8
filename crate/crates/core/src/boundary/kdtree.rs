//! Exact k-nearest-neighbor search over an axis-aligned KD-tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

pub const DEFAULT_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Inner { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Matrix,
    /// Point indices, grouped so that every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sq_dist: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.sq_dist.total_cmp(&other.sq_dist).then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl KdTree {
    pub fn build(points: &Matrix) -> Result<KdTree> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &Matrix, leaf_size: usize) -> Result<KdTree> {
        if points.rows() == 0 {
            return Err(Error::invalid("cannot build a KD-tree over zero points"));
        }
        let mut t = KdTree { points: points.clone(), order: (0..points.rows()).collect(), nodes: Vec::new() };
        t.grow(0, points.rows(), leaf_size.max(1));
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    fn grow(&mut self, start: usize, end: usize, leaf_size: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= leaf_size {
            return slot;
        }
        // split on the widest axis at the median
        let d = self.points.cols();
        let mut axis = 0;
        let mut widest = -1.0;
        for j in 0..d {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.points.get(i, j);
                (lo.min(v), hi.max(v))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = j;
            }
        }
        if widest <= 0.0 {
            return slot;
        }
        let pts = &self.points;
        self.order[start..end].sort_by(|&a, &b| pts.get(a, axis).total_cmp(&pts.get(b, axis)).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        let value = self.points.get(self.order[mid], axis);
        let left = self.grow(start, mid, leaf_size);
        let right = self.grow(mid, end, leaf_size);
        self.nodes[slot] = KdNode::Inner { axis, value, left, right };
        slot
    }

    /// The k nearest points sorted by (distance, index).
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if k > self.len() {
            return Err(Error::invalid(format!("k = {k} exceeds the {} stored points", self.len())));
        }
        if query.len() != self.points.cols() {
            return Err(Error::invalid("query dimension differs from the tree"));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(0, query, k, &mut heap);
        }
        Ok(heap.into_sorted_vec())
    }

    fn search(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor { index: i, sq_dist: sq_dist(q, self.points.row(i)) };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Inner { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // points on the far side are at least |diff| away along `axis`
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").sq_dist {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

/// Linear-scan reference with the same ordering.
pub fn knn_scan(points: &Matrix, query: &[f64], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> =
        (0..points.rows()).map(|i| Neighbor { index: i, sq_dist: sq_dist(query, points.row(i)) }).collect();
    all.sort();
    all.truncate(k);
    all
}
