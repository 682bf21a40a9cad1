//! Balanced 3-d tree for radius and k-nearest queries.
//!
//! The tree is built once over an immutable set of positions. Query results
//! are exact: radius queries return every index with `‖x_i − c‖ ≤ r`, and
//! k-nearest queries order by distance with ties broken by the lower index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result, Vec3};

const LEAF_SIZE: usize = 8;

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
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            root: 0,
        };
        if !points.is_empty() {
            tree.root = tree.build(0, points.len());
        } else {
            tree.nodes.push(Node::Leaf { start: 0, end: 0 });
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        // split along the axis of largest extent
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
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

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Indices within distance `r` of `center`, ascending.
    pub fn radius_neighbors(&self, center: &Vec3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.points.is_empty() || !(r >= 0.0) {
            return out;
        }
        self.radius_rec(self.root, center, r * r, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, center: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if (self.points[i] - center).norm_squared() <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let d = center[axis] - value;
                // points equal to the split value may sit on either side
                if d <= 0.0 || d * d <= r2 {
                    self.radius_rec(left, center, r2, out);
                }
                if d >= 0.0 || d * d <= r2 {
                    self.radius_rec(right, center, r2, out);
                }
            }
        }
    }

    /// The `k` nearest indices, distance-ascending with ties broken by index.
    pub fn knn(&self, center: &Vec3, k: usize) -> Result<Vec<usize>> {
        Ok(self
            .knn_with_distances(center, k)?
            .into_iter()
            .map(|(i, _)| i)
            .collect())
    }

    /// Like [`KdTree::knn`] but also returns Euclidean distances.
    pub fn knn_with_distances(&self, center: &Vec3, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 || k > self.points.len() {
            return Err(Error::domain(format!(
                "k = {k} out of range 1..={}",
                self.points.len()
            )));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(self.root, center, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        Ok(found
            .into_iter()
            .map(|c| (c.index, c.dist2.sqrt()))
            .collect())
    }

    fn knn_rec(&self, node: usize, center: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Candidate {
                        dist2: (self.points[i] - center).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
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
                let d = center[axis] - value;
                let (near, far) = if d <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_rec(near, center, k, heap);
                let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
                if heap.len() < k || d * d <= worst {
                    self.knn_rec(far, center, k, heap);
                }
            }
        }
    }

    /// Index of the closest point (lowest index on ties).
    pub fn nearest(&self, center: &Vec3) -> Option<usize> {
        self.knn(center, 1).ok().map(|v| v[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0)
            .collect()
    }

    fn brute_radius(points: &[Vec3], c: &Vec3, r: f64) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| (points[i] - c).norm_squared() <= r * r)
            .collect()
    }

    fn brute_knn(points: &[Vec3], c: &Vec3, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| {
            (points[a] - c)
                .norm_squared()
                .total_cmp(&(points[b] - c).norm_squared())
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }

    #[test]
    fn radius_matches_linear_scan() {
        let pts = random_cloud(5000, 1);
        let tree = KdTree::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let c = Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0;
            let r = rng.random::<f64>() * 2.0;
            assert_eq!(tree.radius_neighbors(&c, r), brute_radius(&pts, &c, r));
        }
    }

    #[test]
    fn knn_matches_linear_scan() {
        let pts = random_cloud(3000, 3);
        let tree = KdTree::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0;
            assert_eq!(tree.knn(&c, 12).unwrap(), brute_knn(&pts, &c, 12));
        }
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        // four points equidistant from the origin
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.knn(&Vec3::zeros(), 2).unwrap(), vec![0, 1]);
        assert_eq!(tree.knn(&Vec3::zeros(), 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn knn_single_and_full() {
        let pts = random_cloud(50, 5);
        let tree = KdTree::new(&pts);
        assert_eq!(tree.knn(&pts[17], 1).unwrap(), vec![17]);
        assert_eq!(tree.knn(&pts[3], 50).unwrap(), brute_knn(&pts, &pts[3], 50));
        assert!(tree.knn(&pts[3], 0).is_err());
        assert!(tree.knn(&pts[3], 51).is_err());
    }

    #[test]
    fn tiny_radius_hits_only_the_center_point() {
        let pts = random_cloud(200, 6);
        let tree = KdTree::new(&pts);
        assert_eq!(tree.radius_neighbors(&pts[42], 1e-9), vec![42]);
        assert_eq!(tree.radius_neighbors(&pts[0], 1e3).len(), 200);
    }
}
