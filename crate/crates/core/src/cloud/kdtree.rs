use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{PointCloud, Vec3};

const LEAF_SIZE: usize = 12;

/// Query hit: point index and euclidean distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize, lo: Vec3, hi: Vec3 },
    Split { axis: usize, value: f64, left: usize, right: usize, lo: Vec3, hi: Vec3 },
}

/// Exact kd-tree over a fixed set of positions.
///
/// Results are identical to a linear scan: neighbors are ordered by
/// `(squared distance, index)`, so ties go to the lower point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

pub fn build_index(cloud: &PointCloud) -> SpatialIndex {
    SpatialIndex::new(cloud.positions())
}

#[derive(PartialEq)]
struct HeapEntry {
    d2: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl SpatialIndex {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        let root = if points.is_empty() {
            None
        } else {
            Some(build(&points, &mut order, 0, points.len(), &mut nodes))
        };
        Self { points, order, nodes, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// The `k` nearest points, ascending. Returns every point when `k` exceeds the size.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<Neighbor> {
        let Some(root) = self.root else { return Vec::new() };
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(root, query, k, &mut heap);
        let mut out: Vec<_> = heap.into_vec();
        out.sort();
        out.into_iter()
            .map(|e| Neighbor { index: e.index, distance: e.d2.sqrt() })
            .collect()
    }

    pub fn nearest(&self, query: &Vec3) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    /// All points with distance ≤ `radius`, ascending.
    pub fn radius_search(&self, query: &Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        self.radius_search_into(query, radius, &mut out);
        out
    }

    /// Like [`radius_search`](Self::radius_search) but reuses `out`.
    pub fn radius_search_into(&self, query: &Vec3, radius: f64, out: &mut Vec<Neighbor>) {
        out.clear();
        let Some(root) = self.root else { return };
        let r2 = radius * radius;
        let mut hits: Vec<(f64, usize)> = Vec::new();
        self.radius_node(root, query, r2, &mut |d2, i| hits.push((d2, i)));
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.extend(hits.into_iter().map(|(d2, index)| Neighbor { index, distance: d2.sqrt() }));
    }

    /// Unsorted indices within `radius`; cheaper when order does not matter.
    pub fn radius_indices_into(&self, query: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if let Some(root) = self.root {
            self.radius_node(root, query, radius * radius, &mut |_, i| out.push(i));
        }
    }

    pub fn count_within(&self, query: &Vec3, radius: f64) -> usize {
        let mut n = 0;
        if let Some(root) = self.root {
            self.radius_node(root, query, radius * radius, &mut |_, _| n += 1);
        }
        n
    }

    fn knn_node(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<HeapEntry>) {
        match &self.nodes[node] {
            Node::Leaf { start, end, .. } => {
                for &i in &self.order[*start..*end] {
                    let entry = HeapEntry { d2: (self.points[i] - q).norm_squared(), index: i };
                    if heap.len() < k {
                        heap.push(entry);
                    } else if entry < *heap.peek().expect("non-empty") {
                        heap.pop();
                        heap.push(entry);
                    }
                }
            }
            Node::Split { axis, value, left, right, .. } => {
                let (near, far) = if q[*axis] <= *value { (*left, *right) } else { (*right, *left) };
                self.knn_node(near, q, k, heap);
                let bound = self.box_distance_sq(far, q);
                // Equal bounds must still be visited: a farther subtree may hold a lower-index tie.
                if heap.len() < k || bound <= heap.peek().expect("non-empty").d2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    fn radius_node(&self, node: usize, q: &Vec3, r2: f64, visit: &mut impl FnMut(f64, usize)) {
        match &self.nodes[node] {
            Node::Leaf { start, end, .. } => {
                for &i in &self.order[*start..*end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 <= r2 {
                        visit(d2, i);
                    }
                }
            }
            Node::Split { left, right, .. } => {
                for child in [*left, *right] {
                    if self.box_distance_sq(child, q) <= r2 {
                        self.radius_node(child, q, r2, visit);
                    }
                }
            }
        }
    }

    fn box_distance_sq(&self, node: usize, q: &Vec3) -> f64 {
        let (lo, hi) = self.node_bounds(node);
        let mut d2 = 0.0;
        for k in 0..3 {
            let d = if q[k] < lo[k] {
                lo[k] - q[k]
            } else if q[k] > hi[k] {
                q[k] - hi[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    fn node_bounds(&self, node: usize) -> (Vec3, Vec3) {
        match &self.nodes[node] {
            Node::Split { lo, hi, .. } | Node::Leaf { lo, hi, .. } => (*lo, *hi),
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &mut order[start..end];
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in slice.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let extent = hi - lo;
    let axis = extent.imax();
    // Coincident points cannot be separated by any split.
    if end - start <= LEAF_SIZE || extent[axis] <= 0.0 {
        nodes.push(Node::Leaf { start, end, lo, hi });
        return nodes.len() - 1;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    let split = start + mid;
    let placeholder = nodes.len();
    nodes.push(Node::Leaf { start, end, lo, hi });
    let left = build(points, order, start, split, nodes);
    let right = build(points, order, split, end, nodes);
    nodes[placeholder] = Node::Split { axis, value, left, right, lo, hi };
    placeholder
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn single_point() {
        let index = SpatialIndex::new(vec![Vec3::new(1.0, 2.0, 2.0)]);
        let hits = index.knn(&Vec3::zeros(), 1);
        assert_eq!(hits, vec![Neighbor { index: 0, distance: 3.0 }]);
        assert_eq!(index.knn(&Vec3::zeros(), 10).len(), 1);
    }

    #[test]
    fn knn_matches_linear_scan() {
        let mut rng = crate::rng::seeded(7);
        let pts: Vec<Vec3> = (0..2000).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let index = SpatialIndex::new(pts.clone());
        for _ in 0..50 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random());
            let got: Vec<usize> = index.knn(&q, 5).iter().map(|n| n.index).collect();
            assert_eq!(got, brute_knn(&pts, &q, 5));
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        // Integer grid: many exactly equidistant neighbors.
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    pts.push(Vec3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        pts.reverse();
        let index = SpatialIndex::new(pts.clone());
        for q in [Vec3::new(2.0, 2.0, 2.0), Vec3::new(2.5, 2.5, 2.5), Vec3::new(0.0, 5.0, 2.0)] {
            for k in [1, 3, 7, 19] {
                let got: Vec<usize> = index.knn(&q, k).iter().map(|n| n.index).collect();
                assert_eq!(got, brute_knn(&pts, &q, k));
            }
        }
    }

    #[test]
    fn radius_on_unit_grid_returns_only_own_cell() {
        let pts: Vec<Vec3> = (0..5).flat_map(|x| (0..5).map(move |y| Vec3::new(x as f64, y as f64, 0.0))).collect();
        let index = SpatialIndex::new(pts);
        let hits = index.radius_search(&Vec3::new(2.1, 3.0, 0.0), 0.5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].index, 13);
    }

    #[test]
    fn empty_index() {
        let index = SpatialIndex::new(Vec::new());
        assert!(index.knn(&Vec3::zeros(), 3).is_empty());
        assert!(index.radius_search(&Vec3::zeros(), 1.0).is_empty());
    }
}
