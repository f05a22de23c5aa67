//! Static 2-D k-d tree answering exact k-nearest and k-farthest queries.
//!
//! Candidate keys are `(distance, index)` pairs compared lexicographically,
//! matching the exhaustive orderings bit for bit. Box bounds are computed
//! with the same floating-point operations as point distances, so they can
//! never exclude a point whose key ties the current worst.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::metric::{spatial_value, SpatialMetric};
use crate::data::Point;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    dist: f64,
    idx: u32,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        crate::cmp_f64(self.dist, other.dist).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 2],
    hi: [f64; 2],
    start: u32,
    end: u32,
    /// Children as node indices; `u32::MAX` for leaves.
    left: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == u32::MAX
    }
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    metric: SpatialMetric,
    nodes: Vec<Node>,
    points: Vec<Point>,
    ids: Vec<u32>,
}

impl KdTree {
    /// Builds over `(global index, position)` pairs. Only euclidean and L1
    /// metrics have box bounds.
    pub(crate) fn build(metric: SpatialMetric, items: &[(u32, Point)]) -> Self {
        assert!(
            matches!(metric, SpatialMetric::Euclidean | SpatialMetric::L1),
            "k-d tree supports euclidean and l1 only"
        );
        let mut order: Vec<(u32, Point)> = items.to_vec();
        let mut tree = KdTree {
            metric,
            nodes: Vec::new(),
            points: Vec::with_capacity(items.len()),
            ids: Vec::with_capacity(items.len()),
        };
        if !order.is_empty() {
            let n = order.len();
            tree.build_rec(&mut order, 0, n);
        }
        tree.points = order.iter().map(|(_, p)| *p).collect();
        tree.ids = order.iter().map(|(i, _)| *i).collect();
        tree
    }

    fn build_rec(&mut self, items: &mut [(u32, Point)], start: usize, end: usize) -> u32 {
        let slice = &mut items[start..end];
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (_, p) in slice.iter() {
            lo[0] = lo[0].min(p.x);
            lo[1] = lo[1].min(p.y);
            hi[0] = hi[0].max(p.x);
            hi[1] = hi[1].max(p.y);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
        });
        if slice.len() > LEAF_SIZE {
            let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
            let coord = |p: &Point| if axis == 0 { p.x } else { p.y };
            let mid = slice.len() / 2;
            slice.select_nth_unstable_by(mid, |a, b| crate::cmp_f64(coord(&a.1), coord(&b.1)));
            let left = self.build_rec(items, start, start + mid);
            let right = self.build_rec(items, start + mid, end);
            let node = &mut self.nodes[id as usize];
            node.left = left;
            node.right = right;
        }
        id
    }

    fn combine(&self, dx: f64, dy: f64) -> f64 {
        match self.metric {
            SpatialMetric::Euclidean => (dx * dx + dy * dy).sqrt(),
            _ => dx + dy,
        }
    }

    fn lower_bound(&self, node: &Node, q: Point) -> f64 {
        let gap = |v: f64, lo: f64, hi: f64| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            }
        };
        self.combine(
            gap(q.x, node.lo[0], node.hi[0]),
            gap(q.y, node.lo[1], node.hi[1]),
        )
    }

    fn upper_bound(&self, node: &Node, q: Point) -> f64 {
        let span = |v: f64, lo: f64, hi: f64| (v - lo).abs().max((v - hi).abs());
        self.combine(
            span(q.x, node.lo[0], node.hi[0]),
            span(q.y, node.lo[1], node.hi[1]),
        )
    }

    /// Up to `k` accepted points closest to `q`, ordered by ascending
    /// `(distance, index)`.
    pub(crate) fn nearest(
        &self,
        q: Point,
        k: usize,
        accept: impl Fn(u32) -> bool,
    ) -> Vec<(f64, u32)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Key> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if heap.len() == k && self.lower_bound(node, q) > heap.peek().unwrap().dist {
                continue;
            }
            if node.is_leaf() {
                for s in node.start as usize..node.end as usize {
                    let idx = self.ids[s];
                    if !accept(idx) {
                        continue;
                    }
                    let key = Key {
                        dist: spatial_value(self.metric, q, self.points[s]),
                        idx,
                    };
                    if heap.len() < k {
                        heap.push(key);
                    } else if key < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(key);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.lower_bound(&self.nodes[l as usize], q);
                let dr = self.lower_bound(&self.nodes[r as usize], q);
                // push the farther child first so the nearer is explored first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let mut out: Vec<(f64, u32)> = heap.into_iter().map(|k| (k.dist, k.idx)).collect();
        out.sort_by(|a, b| crate::cmp_f64(a.0, b.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Up to `k` accepted points farthest from `q`, ordered by descending
    /// `(distance, index)`.
    pub(crate) fn farthest(
        &self,
        q: Point,
        k: usize,
        accept: impl Fn(u32) -> bool,
    ) -> Vec<(f64, u32)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<std::cmp::Reverse<Key>> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if heap.len() == k && self.upper_bound(node, q) < heap.peek().unwrap().0.dist {
                continue;
            }
            if node.is_leaf() {
                for s in node.start as usize..node.end as usize {
                    let idx = self.ids[s];
                    if !accept(idx) {
                        continue;
                    }
                    let key = Key {
                        dist: spatial_value(self.metric, q, self.points[s]),
                        idx,
                    };
                    if heap.len() < k {
                        heap.push(std::cmp::Reverse(key));
                    } else if key > heap.peek().unwrap().0 {
                        heap.pop();
                        heap.push(std::cmp::Reverse(key));
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let ul = self.upper_bound(&self.nodes[l as usize], q);
                let ur = self.upper_bound(&self.nodes[r as usize], q);
                if ul >= ur {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let mut out: Vec<(f64, u32)> = heap.into_iter().map(|k| (k.0.dist, k.0.idx)).collect();
        out.sort_by(|a, b| crate::cmp_f64(b.0, a.0).then(b.1.cmp(&a.1)));
        out
    }
}
