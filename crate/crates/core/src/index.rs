//! Exact nearest-neighbor search over a cloud's positions.
//!
//! A balanced kd-tree split at the median of the widest axis. All queries
//! are exact and order results by `(distance, point index)`, so ties always
//! resolve to the lowest index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{dist2, Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Read-only kd-tree borrowed over a position array.
#[derive(Debug, Clone)]
pub struct SpatialIndex<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Query result: neighbor indices with their Euclidean distances, ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Neighborhood {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn from_sorted(mut hits: Vec<Candidate>) -> Self {
        hits.sort_unstable();
        Self {
            indices: hits.iter().map(|c| c.index).collect(),
            distances: hits.iter().map(|c| c.d2.sqrt()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> SpatialIndex<'a> {
    pub fn build(cloud: &'a PointCloud) -> Result<Self> {
        Self::from_points(cloud.positions())
    }

    pub fn from_points(points: &'a [Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap();
        if hi[axis] == lo[axis] {
            // All points coincide; splitting cannot separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` (all points when `k >= n`).
    pub fn knn(&self, query: &Point3, k: usize) -> Neighborhood {
        if k == 0 {
            return Neighborhood::default();
        }
        let k = k.min(self.points.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut off = [0.0; 3];
        self.knn_node(0, query, k, 0.0, &mut off, &mut heap);
        Neighborhood::from_sorted(heap.into_vec())
    }

    /// Index and squared distance of the single nearest point.
    pub fn nearest(&self, query: &Point3) -> (usize, f64) {
        let mut best = Candidate {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        let mut off = [0.0; 3];
        self.nearest_node(0, query, 0.0, &mut off, &mut best);
        (best.index, best.d2)
    }

    /// Every point within distance `r` of `query`, ascending by (distance, index).
    pub fn radius(&self, query: &Point3, r: f64) -> Neighborhood {
        if !(r >= 0.0) {
            return Neighborhood::default();
        }
        let r2 = r * r;
        let mut hits = Vec::new();
        let mut off = [0.0; 3];
        self.radius_node(0, query, r2, 0.0, &mut off, &mut hits);
        Neighborhood::from_sorted(hits)
    }

    fn knn_node(
        &self,
        node: usize,
        q: &Point3,
        k: usize,
        rd: f64,
        off: &mut [f64; 3],
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, rd, off, heap);
                let old = off[axis];
                let far_rd = rd - old * old + diff * diff;
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().d2
                };
                if far_rd <= worst {
                    off[axis] = diff;
                    self.knn_node(far, q, k, far_rd, off, heap);
                    off[axis] = old;
                }
            }
        }
    }

    fn nearest_node(&self, node: usize, q: &Point3, rd: f64, off: &mut [f64; 3], best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_node(near, q, rd, off, best);
                let old = off[axis];
                let far_rd = rd - old * old + diff * diff;
                if far_rd <= best.d2 {
                    off[axis] = diff;
                    self.nearest_node(far, q, far_rd, off, best);
                    off[axis] = old;
                }
            }
        }
    }

    fn radius_node(
        &self,
        node: usize,
        q: &Point3,
        r2: f64,
        rd: f64,
        off: &mut [f64; 3],
        hits: &mut Vec<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(q, &self.points[i]);
                    if d2 <= r2 {
                        hits.push(Candidate { d2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_node(near, q, r2, rd, off, hits);
                let old = off[axis];
                let far_rd = rd - old * old + diff * diff;
                if far_rd <= r2 {
                    off[axis] = diff;
                    self.radius_node(far, q, r2, far_rd, off, hits);
                    off[axis] = old;
                }
            }
        }
    }
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nn_distance(index: &SpatialIndex) -> f64 {
    let points = index.points();
    if points.len() < 2 {
        return 0.0;
    }
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nb = index.knn(p, 2);
            nb.indices
                .iter()
                .zip(&nb.distances)
                .find(|(&j, _)| j != i)
                .map(|(_, &d)| d)
                .unwrap_or(0.0)
        })
        .sum();
    total / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Neighborhood {
        let mut all: Vec<Candidate> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Candidate { d2: dist2(q, p), index: i })
            .collect();
        all.sort();
        all.truncate(k);
        Neighborhood::from_sorted(all)
    }

    fn brute_radius(points: &[Point3], q: &Point3, r: f64) -> Neighborhood {
        let hits = points
            .iter()
            .enumerate()
            .map(|(i, p)| Candidate { d2: dist2(q, p), index: i })
            .filter(|c| c.d2 <= r * r)
            .collect();
        Neighborhood::from_sorted(hits)
    }

    #[test]
    fn single_point_index() {
        let pts = [[1.0, 2.0, 3.0]];
        let index = SpatialIndex::from_points(&pts).unwrap();
        let nb = index.knn(&[10.0, -4.0, 0.0], 3);
        assert_eq!(nb.indices, vec![0]);
        assert_eq!(index.nearest(&[0.0; 3]).0, 0);
        assert_eq!(index.radius(&[1.0, 2.0, 3.0], 0.5).indices, vec![0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(SpatialIndex::from_points(&[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn query_at_existing_point() {
        let pts: Vec<Point3> = (0..50).map(|i| [i as f64, (i * 7 % 11) as f64, 0.0]).collect();
        let index = SpatialIndex::from_points(&pts).unwrap();
        let nb = index.knn(&pts[17], 1);
        assert_eq!(nb.indices, vec![17]);
        assert_eq!(nb.distances, vec![0.0]);
    }

    #[test]
    fn collinear_two_nearest() {
        let pts: Vec<Point3> = (0..4).map(|i| [i as f64, 0.0, 0.0]).collect();
        let index = SpatialIndex::from_points(&pts).unwrap();
        let nb = index.knn(&[1.4, 0.0, 0.0], 2);
        assert_eq!(nb.indices, vec![1, 2]);
        assert!((nb.distances[0] - 0.4).abs() < 1e-12);
        assert!((nb.distances[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn equidistant_lower_index_wins() {
        let pts = [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 5.0, 0.0]];
        let index = SpatialIndex::from_points(&pts).unwrap();
        assert_eq!(index.knn(&[0.0; 3], 1).indices, vec![0]);
        assert_eq!(index.nearest(&[0.0; 3]).0, 0);
    }

    #[test]
    fn duplicates_report_zero_distance() {
        let pts = vec![[1.0, 1.0, 1.0]; 40];
        let index = SpatialIndex::from_points(&pts).unwrap();
        let nb = index.knn(&[1.0, 1.0, 1.0], 3);
        assert_eq!(nb.indices, vec![0, 1, 2]);
        assert_eq!(nb.distances, vec![0.0; 3]);
    }

    #[test]
    fn radius_edge_cases() {
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..5 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let index = SpatialIndex::from_points(&pts).unwrap();
        // Interior grid node: itself plus its six axis neighbors.
        let center = [2.0, 2.0, 2.0];
        let nb = index.radius(&center, 1.0);
        assert_eq!(nb.len(), 7);
        assert_eq!(nb.distances[0], 0.0);
        assert!(nb.distances[1..].iter().all(|&d| d == 1.0));
        // Corner node has only three axis neighbors.
        assert_eq!(index.radius(&[0.0; 3], 1.0).len(), 4);
        // Radius below the nearest spacing.
        assert!(index.radius(&[0.5, 0.5, 0.5], 0.3).is_empty());
        // Radius covering the whole bounding box.
        assert_eq!(index.radius(&[0.0; 3], 7.0).len(), pts.len());
    }

    #[test]
    fn mean_nn_distance_of_grid() {
        let pts: Vec<Point3> = (0..10).map(|i| [i as f64 * 2.0, 0.0, 0.0]).collect();
        let index = SpatialIndex::from_points(&pts).unwrap();
        assert_eq!(mean_nn_distance(&index), 2.0);
    }

    #[test]
    fn matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let n = rng.random_range(1..2000);
            let pts: Vec<Point3> = (0..n)
                .map(|_| [0.0; 3].map(|_: f64| rng.random_range(0..64) as f64))
                .collect();
            let index = SpatialIndex::from_points(&pts).unwrap();
            for _ in 0..50 {
                let q = [0.0; 3].map(|_: f64| rng.random_range(-5.0..70.0));
                let k = rng.random_range(1..20);
                assert_eq!(index.knn(&q, k), brute_knn(&pts, &q, k));
                let r = rng.random_range(0.5..12.0);
                assert_eq!(index.radius(&q, r), brute_radius(&pts, &q, r));
                let (i, d2) = index.nearest(&q);
                let b = brute_knn(&pts, &q, 1);
                assert_eq!(i, b.indices[0]);
                assert_eq!(d2.sqrt(), b.distances[0]);
            }
        }
    }

    proptest! {
        #[test]
        fn shuffling_preserves_distances(seed in 0u64..1000, n in 2usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point3> = (0..n)
                .map(|_| [0.0; 3].map(|_: f64| rng.random_range(0..20) as f64))
                .collect();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
            let a = SpatialIndex::from_points(&pts).unwrap();
            let b = SpatialIndex::from_points(&shuffled).unwrap();
            let q = [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), 3.5];
            prop_assert_eq!(a.knn(&q, 7).distances, b.knn(&q, 7).distances);
            prop_assert_eq!(a.radius(&q, 4.0).distances, b.radius(&q, 4.0).distances);
        }
    }
}
