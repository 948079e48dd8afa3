//! 3D kd-tree for exact nearest-neighbor and radius queries.
//!
//! Queries return exactly what a brute-force linear scan would: distances
//! are computed with the same formula, and ties at the k-th neighbor are
//! broken toward the smaller point index.

use crate::scalar::Real;
use crate::Point3;

const LEAF_SIZE: usize = 16;

enum Node<S: Real> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: S,
        left: usize,
        right: usize,
    },
}

/// Immutable spatial index over a point set. Concurrent read-only queries
/// are safe.
pub struct KdTree3<S: Real> {
    points: Vec<Point3<S>>,
    order: Vec<usize>,
    nodes: Vec<Node<S>>,
    root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<S: Real> {
    pub index: usize,
    pub distance: S,
}

impl<S: Real> KdTree3<S> {
    pub fn build(points: &[Point3<S>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self {
            points: points.to_vec(),
            order: Vec::new(),
            nodes: Vec::new(),
            root: 0,
        };
        let root = if points.is_empty() {
            tree.nodes.push(Node::Leaf { start: 0, end: 0 });
            0
        } else {
            tree.build_node(&mut order, 0)
        };
        tree.order = order;
        tree.root = root;
        tree
    }

    fn build_node(&mut self, indices: &mut [usize], offset: usize) -> usize {
        if indices.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: offset,
                end: offset + indices.len(),
            });
            return self.nodes.len() - 1;
        }

        // Split on the axis with the widest extent.
        let mut lo = [S::max_value().unwrap(); 3];
        let mut hi = [S::min_value().unwrap(); 3];
        for &i in indices.iter() {
            let p = &self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let mut axis = 0;
        for a in 1..3 {
            if hi[a] - lo[a] > hi[axis] - lo[axis] {
                axis = a;
            }
        }
        if hi[axis] - lo[axis] == S::zero() {
            // All coordinates identical; no useful split exists.
            self.nodes.push(Node::Leaf {
                start: offset,
                end: offset + indices.len(),
            });
            return self.nodes.len() - 1;
        }

        let mid = indices.len() / 2;
        let points = &self.points;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .expect("finite coordinates")
        });
        let value = self.points[indices[mid]][axis];

        let (left_slice, right_slice) = indices.split_at_mut(mid);
        let left = self.build_node(left_slice, offset);
        let right = self.build_node(right_slice, offset + mid);
        self.nodes.push(Node::Split {
            axis,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest neighbors of `query`, sorted by `(distance, index)`.
    pub fn knn(&self, query: &Point3<S>, k: usize) -> Vec<Neighbor<S>> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut best: Vec<Neighbor<S>> = Vec::with_capacity(k + 1);
        self.knn_visit(self.root, query, k, &mut best);
        best
    }

    fn knn_visit(&self, node: usize, query: &Point3<S>, k: usize, best: &mut Vec<Neighbor<S>>) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = (self.points[i] - query).norm();
                    let candidate = Neighbor { index: i, distance: d };
                    if best.len() < k {
                        let pos = best.partition_point(|n| before(n, &candidate));
                        best.insert(pos, candidate);
                    } else if before(&candidate, best.last().unwrap()) {
                        let pos = best.partition_point(|n| before(n, &candidate));
                        best.insert(pos, candidate);
                        best.pop();
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - *value;
                let (near, far) = if delta <= S::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.knn_visit(near, query, k, best);
                // Equal plane distance can still hide an equal-distance
                // neighbor with a smaller index, so the bound is non-strict.
                if best.len() < k || delta.abs() <= best.last().unwrap().distance {
                    self.knn_visit(far, query, k, best);
                }
            }
        }
    }

    /// The single nearest neighbor.
    pub fn nearest(&self, query: &Point3<S>) -> Option<Neighbor<S>> {
        self.knn(query, 1).into_iter().next()
    }

    /// All points with `‖p − query‖ ≤ radius`, sorted by point index.
    pub fn within_radius(&self, query: &Point3<S>, radius: S) -> Vec<Neighbor<S>> {
        let mut out = Vec::new();
        if self.points.is_empty() || radius < S::zero() {
            return out;
        }
        self.radius_visit(self.root, query, radius, &mut out);
        out.sort_by_key(|n| n.index);
        out
    }

    fn radius_visit(&self, node: usize, query: &Point3<S>, radius: S, out: &mut Vec<Neighbor<S>>) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = (self.points[i] - query).norm();
                    if d <= radius {
                        out.push(Neighbor { index: i, distance: d });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - *value;
                if delta <= radius {
                    self.radius_visit(*left, query, radius, out);
                }
                if -delta <= radius {
                    self.radius_visit(*right, query, radius, out);
                }
            }
        }
    }
}

/// Strict `(distance, index)` ordering used for k-NN ranking.
#[inline]
fn before<S: Real>(a: &Neighbor<S>, b: &Neighbor<S>) -> bool {
    a.distance < b.distance || (a.distance == b.distance && a.index < b.index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3<f64>], query: &Point3<f64>, k: usize) -> Vec<Neighbor<f64>> {
        let mut all: Vec<Neighbor<f64>> = points
            .iter()
            .enumerate()
            .map(|(index, p)| Neighbor {
                index,
                distance: (p - query).norm(),
            })
            .collect();
        all.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap()
                .then(a.index.cmp(&b.index))
        });
        all.truncate(k);
        all
    }

    fn brute_radius(points: &[Point3<f64>], query: &Point3<f64>, r: f64) -> Vec<Neighbor<f64>> {
        points
            .iter()
            .enumerate()
            .map(|(index, p)| Neighbor {
                index,
                distance: (p - query).norm(),
            })
            .filter(|n| n.distance <= r)
            .collect()
    }

    #[test]
    fn knn_matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let n = rng.random_range(1..400);
            let points: Vec<Point3<f64>> = (0..n).map(|_| random_point(&mut rng, 1.0)).collect();
            let tree = KdTree3::build(&points);
            for _ in 0..20 {
                let q = random_point(&mut rng, 1.2);
                let k = rng.random_range(1..=n.min(12));
                assert_eq!(tree.knn(&q, k), brute_knn(&points, &q, k));
            }
        }
    }

    #[test]
    fn knn_breaks_exact_ties_toward_smaller_index() {
        // A symmetric grid full of ties.
        let mut points = Vec::new();
        for x in -2..=2 {
            for y in -2..=2 {
                for z in -2..=2 {
                    points.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let tree = KdTree3::build(&points);
        for k in [1, 4, 6, 7, 19, 27] {
            let q = Point3::new(0.0, 0.0, 0.0);
            assert_eq!(tree.knn(&q, k), brute_knn(&points, &q, k));
        }
    }

    #[test]
    fn duplicate_points_are_all_reported() {
        let points = vec![Point3::new(1.0f64, 1.0, 1.0); 5];
        let tree = KdTree3::build(&points);
        let got = tree.knn(&Point3::new(0.0, 0.0, 0.0), 3);
        assert_eq!(
            got.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn radius_matches_linear_scan_and_includes_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let points: Vec<Point3<f64>> = (0..500).map(|_| random_point(&mut rng, 1.0)).collect();
        let tree = KdTree3::build(&points);
        for _ in 0..50 {
            let q = random_point(&mut rng, 1.0);
            let r = rng.random_range(0.0..0.8);
            assert_eq!(tree.within_radius(&q, r), brute_radius(&points, &q, r));
        }
        // Boundary inclusion: distance exactly r.
        let axis = vec![Point3::new(0.0f64, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let tree = KdTree3::build(&axis);
        let hits = tree.within_radius(&Point3::new(0.0, 0.0, 0.0), 1.0);
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn k_larger_than_point_count_returns_all() {
        let points = vec![
            Point3::new(0.0f64, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let tree = KdTree3::build(&points);
        assert_eq!(tree.knn(&Point3::new(0.0, 0.0, 0.0), 10).len(), 3);
    }

    #[test]
    fn empty_tree_yields_no_neighbors() {
        let tree = KdTree3::<f64>::build(&[]);
        assert!(tree.nearest(&Point3::new(0.0, 0.0, 0.0)).is_none());
        assert!(tree.within_radius(&Point3::new(0.0, 0.0, 0.0), 1.0).is_empty());
    }
}
