//! Exact nearest-neighbour index over a fixed point set.

use crate::geometry::Point3;

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

/// Static 3-d tree. Queries are exact; equal distances resolve to the lowest
/// point index so results do not depend on tree layout.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = KdTree {
            points: points.iter().map(|p| p.to_array()).collect(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
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
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
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

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0)
    }

    pub fn nearest(&self, query: &Point3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let q = query.to_array();
        let mut best = Neighbor {
            index: usize::MAX,
            distance_squared: f64::INFINITY,
        };
        self.search(0, &q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let p = &self.points[i];
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    if d < best.distance_squared || (d == best.distance_squared && i < best.index) {
                        *best = Neighbor {
                            index: i,
                            distance_squared: d,
                        };
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
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                // `<=` keeps equal-distance candidates reachable for the tie rule.
                if diff * diff <= best.distance_squared {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// Indices of all points within `radius` of `query`, ascending.
    pub fn within_radius(&self, query: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.collect_radius(0, &query.to_array(), radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect_radius(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(self.order[start..end].iter().copied().filter(|&i| {
                    let p = &self.points[i];
                    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2) <= r2
                }));
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff < 0.0 || diff * diff <= r2 {
                    self.collect_radius(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.collect_radius(right, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3], q: &Point3) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            distance_squared: f64::INFINITY,
        };
        for (i, p) in points.iter().enumerate() {
            let d = p.distance_squared(q);
            if d < best.distance_squared {
                best = Neighbor {
                    index: i,
                    distance_squared: d,
                };
            }
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = Point3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-2.0..2.0),
            );
            assert_eq!(tree.nearest(&q), Some(brute(&pts, &q)));
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        // Duplicates and a lattice where many points are equidistant.
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        pts.push(Point3::new(2.0, 2.0, 0.0));
        pts.insert(0, Point3::new(2.0, 2.0, 0.0));
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Point3::new(2.0, 2.0, 0.0)).unwrap().index, 0);
        // centre of a lattice cell: four equidistant neighbours
        let n = tree.nearest(&Point3::new(1.5, 1.5, 0.0)).unwrap();
        assert_eq!(n.index, brute(&pts, &Point3::new(1.5, 1.5, 0.0)).index);
    }

    #[test]
    fn radius_query() {
        let pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new(i as f64 * 0.1, 0.0, 0.0))
            .collect();
        let tree = KdTree::new(&pts);
        assert_eq!(
            tree.within_radius(&Point3::new(0.0, 0.0, 0.0), 0.25),
            vec![0, 1, 2]
        );
        assert!(KdTree::new(&[]).nearest(&Point3::ORIGIN).is_none());
    }
}
