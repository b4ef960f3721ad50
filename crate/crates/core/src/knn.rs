//! Exact nearest-neighbour queries in 3D.
//!
//! Results are ordered by `(squared distance, index)`, so equidistant
//! candidates resolve to the lower index. Small sets are scanned directly; a
//! kd-tree is built from [`BRUTE_FORCE_LIMIT`] points upward.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

pub const BRUTE_FORCE_LIMIT: usize = 512;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
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
        self.cmp_key(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3<f64>>,
    /// Permutation of point indices; leaves own contiguous ranges of it.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if points.len() >= BRUTE_FORCE_LIMIT {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = self.points[self.order[start]].coords;
        let mut hi = lo;
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i].coords);
            hi = hi.sup(&self.points[i].coords);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, closest first. `exclude` skips one
    /// index (the query point itself when searching a point's neighbours).
    pub fn knn(&self, query: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        if self.nodes.is_empty() {
            for (i, p) in self.points.iter().enumerate() {
                if Some(i) != exclude {
                    push_bounded(&mut heap, k, Neighbor { index: i, dist_sq: (p - query).norm_squared() });
                }
            }
        } else {
            self.search(0, query, k, exclude, &mut heap);
        }
        heap.into_sorted_vec()
    }

    pub fn nearest(&self, query: &Point3<f64>) -> Option<Neighbor> {
        self.knn(query, 1, None).into_iter().next()
    }

    fn search(
        &self,
        node: usize,
        query: &Point3<f64>,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) != exclude {
                        let d = (self.points[i] - query).norm_squared();
                        push_bounded(heap, k, Neighbor { index: i, dist_sq: d });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                // `<=` keeps equidistant lower-index candidates reachable.
                let prune = heap.len() == k && diff * diff > heap.peek().map_or(f64::INFINITY, |n| n.dist_sq);
                if !prune {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

fn push_bounded(heap: &mut BinaryHeap<Neighbor>, k: usize, cand: Neighbor) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(worst) = heap.peek() {
        if cand < *worst {
            heap.pop();
            heap.push(cand);
        }
    }
}
