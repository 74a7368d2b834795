//! Exact k-d tree over 3D points.
//!
//! Ties in distance resolve to the lowest point index, so query results are
//! identical to a brute-force scan ordered by `(distance, index)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::{dist2, Vec3};

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Balanced k-d tree; immutable once built.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub const DEFAULT_LEAF_SIZE: usize = 16;

impl KdTree {
    /// Builds the tree; `None` for an empty point set.
    pub fn build(points: Vec<Vec3>) -> Option<Self> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: Vec<Vec3>, leaf_size: usize) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let mut tree = KdTree {
            order: (0..points.len() as u32).collect(),
            points,
            nodes: Vec::new(),
            leaf_size: leaf_size.max(1),
        };
        tree.build_node(0, tree.points.len());
        Some(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= self.leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i as usize];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let value = self.points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Vec3 {
        self.points[index]
    }

    /// Nearest point to `query`: `(index, euclidean distance)`.
    pub fn nearest(&self, query: Vec3) -> (usize, f64) {
        self.knn(query, 1)[0]
    }

    /// The `k` nearest points sorted by `(distance, index)`.
    pub fn knn(&self, query: Vec3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len()).max(1);
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index as usize, c.d2.sqrt())).collect()
    }

    fn search(&self, node: usize, q: Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { d2: dist2(q, self.points[i as usize]), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // points equal to `value` may sit on either side, so only prune strictly
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(points: &[Vec3], q: Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist2(q, *p), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(d, i)| (i, d.sqrt())).collect()
    }

    #[test]
    fn single_point() {
        let t = KdTree::build(vec![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(t.nearest([9.0, 9.0, 9.0]).0, 0);
        assert_eq!(t.nearest([1.0, 2.0, 3.0]), (0, 0.0));
        assert!(KdTree::build(vec![]).is_none());
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = crate::rng::stream(11);
        let pts: Vec<Vec3> = (0..2000).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let tree = KdTree::build(pts.clone()).unwrap();
        for _ in 0..500 {
            let q = [rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2)];
            assert_eq!(tree.nearest(q), brute(&pts, q, 1)[0]);
            assert_eq!(tree.knn(q, 8), brute(&pts, q, 8));
        }
        for (i, p) in pts.iter().enumerate().take(100) {
            assert_eq!(tree.nearest(*p), (i, 0.0));
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // lattice points: many exact distance ties, plus duplicates
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        pts.extend(pts.clone());
        let tree = KdTree::with_leaf_size(pts.clone(), 2).unwrap();
        let mut rng = crate::rng::stream(3);
        for _ in 0..300 {
            let q = [
                rng.gen_range(0..12) as f64 * 0.5,
                rng.gen_range(0..12) as f64 * 0.5,
                rng.gen_range(0..12) as f64 * 0.5,
            ];
            assert_eq!(tree.knn(q, 5), brute(&pts, q, 5));
        }
    }
}
