//! Board corners from sparse LiDAR returns.
//!
//! Boundary points are split into the four edges of each contour, a line is
//! fitted to every edge with RANSAC, and each corner is taken as the midpoint
//! of the shortest segment between its two adjacent edge lines. Fitted edge
//! lengths are checked against the board model.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::board::{order_in_basis, BoardModel, Contour, EdgeId, EdgeLabel, ViewBasis, LIDAR_UP};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// `|d1 . d2|` above which two lines are treated as parallel.
const PARALLEL_COS: f64 = 1.0 - 1e-9;

/// Infinite line with a unit direction whose first nonzero component is
/// positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    point: Point3,
    direction: Vector3<f64>,
}

impl Line3 {
    pub fn new(point: Point3, direction: Vector3<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !point.is_finite() || !norm.is_finite() {
            return Err(Error::NonFinite("line".into()));
        }
        if norm == 0.0 {
            return Err(Error::DegenerateGeometry("line direction is zero".into()));
        }
        let mut direction = direction / norm;
        if let Some(first) = direction.iter().find(|c| **c != 0.0) {
            if *first < 0.0 {
                direction = -direction;
            }
        }
        Ok(Self { point, direction })
    }

    pub fn through(a: &Point3, b: &Point3) -> Result<Self> {
        Self::new(*a, b.coords() - a.coords())
    }

    pub fn point(&self) -> Point3 {
        self.point
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    pub fn at(&self, s: f64) -> Point3 {
        (self.point.coords() + self.direction * s).into()
    }

    /// Signed position of the foot of the perpendicular from `p`.
    pub fn parameter_of(&self, p: &Point3) -> f64 {
        (p.coords() - self.point.coords()).dot(&self.direction)
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        let d = p.coords() - self.point.coords();
        (d - self.direction * d.dot(&self.direction)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment3 {
    pub a: Point3,
    pub b: Point3,
}

impl LineSegment3 {
    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }

    pub fn midpoint(&self) -> Point3 {
        (self.a + self.b) * 0.5
    }
}

/// Mutual perpendicular between two lines, from `l1` to `l2`. Intersecting
/// lines give a zero-length segment.
pub fn shortest_connecting_segment(l1: &Line3, l2: &Line3) -> Result<LineSegment3> {
    let (d1, d2) = (l1.direction, l2.direction);
    let b = d1.dot(&d2);
    if b.abs() > PARALLEL_COS {
        return Err(Error::ParallelLines);
    }
    let w0 = l1.point.coords() - l2.point.coords();
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let den = 1.0 - b * b;
    // Swapping the lines swaps s and t exactly.
    let s = (b * e - d) / den;
    let t = (e - b * d) / den;
    Ok(LineSegment3 {
        a: l1.at(s),
        b: l2.at(t),
    })
}

/// Corner estimate between two edge lines and the length of the gap it
/// bridges. Symmetric in its arguments.
pub fn corner_from_edges(l1: &Line3, l2: &Line3) -> Result<(Point3, f64)> {
    let seg = shortest_connecting_segment(l1, l2)?;
    Ok((seg.midpoint(), seg.length()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacLineParams {
    /// Inlier distance, metres.
    pub threshold: f64,
    pub iterations: usize,
    /// Defaults to half the points, at least 2.
    pub min_inliers: Option<usize>,
    pub seed: u64,
}

impl Default for RansacLineParams {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            iterations: 1000,
            min_inliers: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub line: Line3,
    pub inliers: Vec<bool>,
}

impl LineFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Robust line fit. Hypotheses are point pairs: every pair when there are
/// no more pairs than iterations, otherwise pairs drawn from one seeded
/// stream per iteration. The best hypothesis has the most inliers, then the
/// smallest summed inlier distance; the result is the principal axis of its
/// inliers.
pub fn ransac_fit_line(points: &[Point3], params: &RansacLineParams) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: n });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("line points".into()));
    }
    let min_inliers = params.min_inliers.unwrap_or(n.div_ceil(2)).max(2);

    let mut best: Option<(usize, f64, usize, usize)> = None;
    let mut consider = |i: usize, j: usize| {
        let Ok(line) = Line3::through(&points[i], &points[j]) else {
            return;
        };
        let (mut count, mut total) = (0usize, 0.0);
        for p in points {
            let d = line.distance(p);
            if d <= params.threshold {
                count += 1;
                total += d;
            }
        }
        let better = match best {
            None => true,
            Some((bc, bt, _, _)) => count > bc || (count == bc && total < bt),
        };
        if better {
            best = Some((count, total, i, j));
        }
    };
    let pairs = n * (n - 1) / 2;
    if pairs <= params.iterations {
        for i in 0..n {
            for j in i + 1..n {
                consider(i, j);
            }
        }
    } else {
        for it in 0..params.iterations {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(it as u64);
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            consider(i.min(j), i.max(j));
        }
    }
    let Some((count, _, i, j)) = best else {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    };
    if count < min_inliers {
        return Err(Error::NoConsensus {
            best: count,
            required: min_inliers,
        });
    }
    let hypothesis = Line3::through(&points[i], &points[j])?;
    let inliers: Vec<bool> = points
        .iter()
        .map(|p| hypothesis.distance(p) <= params.threshold)
        .collect();
    let chosen: Vec<Point3> = points
        .iter()
        .zip(&inliers)
        .filter(|(_, &m)| m)
        .map(|(p, _)| *p)
        .collect();
    let line = principal_line(&chosen).unwrap_or(hypothesis);
    Ok(LineFit { line, inliers })
}

/// Least-squares line: centroid and dominant eigenvector of the scatter.
fn principal_line(points: &[Point3]) -> Option<Line3> {
    let c = Point3::centroid(points)?;
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords() - c.coords();
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(scatter);
    let k = eig.eigenvalues.imax();
    if eig.eigenvalues[k] <= 0.0 {
        return None;
    }
    Line3::new(c, eig.eigenvectors.column(k).into_owned()).ok()
}

/// Points of one board edge, with their indices in the source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCluster {
    pub label: EdgeLabel,
    pub points: PointCloud,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    /// Sensor up axis.
    pub up: Vector3<f64>,
    /// Sensor origin in the cloud's frame.
    pub viewpoint: Point3,
    /// A within-ring gap wider than this many median spacings is the cutout.
    pub gap_factor: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            up: Vector3::from(LIDAR_UP),
            viewpoint: Point3::ORIGIN,
            gap_factor: 4.0,
        }
    }
}

/// Splits the boundary of one board's returns into edges.
///
/// With ring indices, each ring's outermost returns are outer boundary
/// points and the two returns bordering its widest gap (hollow boards only)
/// are cutout boundary points. Without rings the planar convex hull is used,
/// which only works for solid boards. Each side (left or right of the
/// board as seen from the sensor) is then split at its extreme point into an
/// upper and a lower edge.
///
/// An upright (untilted) board yields poor clusters but no error.
pub fn cluster_edges(
    board_points: &PointCloud,
    model: &BoardModel,
    params: &ClusterParams,
) -> Result<Vec<EdgeCluster>> {
    model.validate()?;
    let pts = board_points.points();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: pts.len(),
        });
    }
    let basis = ViewBasis::fit(pts, &params.up, &params.viewpoint)?;
    let flat: Vec<(f64, f64)> = pts.iter().map(|p| basis.project(p)).collect();

    let mut sides: BTreeMap<Contour, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    match board_points.rings() {
        Some(rings) => {
            let mut by_ring: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
            for (i, r) in rings.iter().enumerate() {
                by_ring.entry(*r).or_default().push(i);
            }
            for idx in by_ring.values_mut() {
                idx.sort_by(|&a, &b| flat[a].0.total_cmp(&flat[b].0).then(a.cmp(&b)));
                let outer = sides.entry(Contour::Outer).or_default();
                let (first, last) = (idx[0], idx[idx.len() - 1]);
                if first == last {
                    if flat[first].0 >= 0.0 {
                        outer.0.push(first);
                    } else {
                        outer.1.push(first);
                    }
                    continue;
                }
                outer.0.push(last);
                outer.1.push(first);
                if model.is_hollow() {
                    if let Some((a, b)) = widest_gap(idx, &flat, params.gap_factor) {
                        let inner = sides.entry(Contour::Inner).or_default();
                        inner.0.push(b);
                        inner.1.push(a);
                    }
                }
            }
        }
        None => {
            if model.is_hollow() {
                return Err(Error::invalid(
                    "board points",
                    "hollow boards need ring indices or manual edge labels",
                ));
            }
            sides.insert(Contour::Outer, hull_sides(&flat));
        }
    }

    let contours: &[Contour] = if model.is_hollow() {
        &[Contour::Outer, Contour::Inner]
    } else {
        &[Contour::Outer]
    };
    let mut clusters = Vec::with_capacity(4 * contours.len());
    for &contour in contours {
        let (left, right) = sides.remove(&contour).unwrap_or_default();
        let (tl, bl) = split_side(&left, &flat, true);
        let (tr, br) = split_side(&right, &flat, false);
        for (edge, mut idx) in [
            (EdgeId::TopLeft, tl),
            (EdgeId::TopRight, tr),
            (EdgeId::BottomLeft, bl),
            (EdgeId::BottomRight, br),
        ] {
            let label = EdgeLabel::new(contour, edge);
            if idx.len() < 2 {
                return Err(Error::TooSparse {
                    edge: label.to_string(),
                    count: idx.len(),
                });
            }
            idx.sort_unstable();
            clusters.push(EdgeCluster {
                label,
                points: board_points.select(&idx),
                indices: idx,
            });
        }
    }
    Ok(clusters)
}

/// Bordering indices `(right, left)` of the widest within-ring gap, if it is
/// wide enough to be the cutout. `idx` is sorted by the left coordinate.
fn widest_gap(idx: &[usize], flat: &[(f64, f64)], factor: f64) -> Option<(usize, usize)> {
    if idx.len() < 4 {
        return None;
    }
    let steps: Vec<f64> = idx
        .windows(2)
        .map(|w| flat[w[1]].0 - flat[w[0]].0)
        .collect();
    let mut sorted = steps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let (k, widest) = steps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    (*widest > factor * median && median > 0.0).then(|| (idx[k], idx[k + 1]))
}

/// Convex hull of the projected points split into (left chain, right chain)
/// between the top and bottom vertices.
fn hull_sides(flat: &[(f64, f64)]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| {
        flat[a]
            .0
            .total_cmp(&flat[b].0)
            .then(flat[a].1.total_cmp(&flat[b].1))
            .then(a.cmp(&b))
    });
    let cross = |o: usize, a: usize, b: usize| {
        (flat[a].0 - flat[o].0) * (flat[b].1 - flat[o].1)
            - (flat[a].1 - flat[o].1) * (flat[b].0 - flat[o].0)
    };
    let extent = flat
        .iter()
        .fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
    // Collinear boundary points stay on the hull.
    let tol = 1e-12 * extent * extent;
    let mut hull: Vec<usize> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(order.iter())
        } else {
            Box::new(order.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) < -tol
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull.sort_unstable();
    hull.dedup();
    let top = hull
        .iter()
        .copied()
        .max_by(|&a, &b| flat[a].1.total_cmp(&flat[b].1));
    let bottom = hull
        .iter()
        .copied()
        .min_by(|&a, &b| flat[a].1.total_cmp(&flat[b].1));
    let (Some(top), Some(bottom)) = (top, bottom) else {
        return (Vec::new(), Vec::new());
    };
    let mid_l = hull.iter().map(|&i| flat[i].0).sum::<f64>() / hull.len() as f64;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &i in &hull {
        let is_left = if i == top || i == bottom {
            flat[i].0 >= mid_l
        } else {
            // (left, up) is mirrored: positive l lies clockwise of the chord
            cross(bottom, top, i) < 0.0
        };
        if is_left {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    (left, right)
}

/// Splits one side's boundary points at the side's extreme point into
/// (upper, lower). The extreme point joins whichever group needs it or
/// whose line passes closer.
///
/// A side of four or more points whose extreme sits at one end (an upright
/// board) is split at the median height instead, so both edges get points.
fn split_side(side: &[usize], flat: &[(f64, f64)], left: bool) -> (Vec<usize>, Vec<usize>) {
    let (upper, lower) = split_at_extreme(side, flat, left);
    if side.len() < 4 || (upper.len() >= 2 && lower.len() >= 2) {
        return (upper, lower);
    }
    let mut by_height = side.to_vec();
    by_height.sort_by(|&a, &b| flat[b].1.total_cmp(&flat[a].1).then(a.cmp(&b)));
    let lower = by_height.split_off(by_height.len() / 2);
    (by_height, lower)
}

fn split_at_extreme(side: &[usize], flat: &[(f64, f64)], left: bool) -> (Vec<usize>, Vec<usize>) {
    let key = |i: usize| if left { flat[i].0 } else { -flat[i].0 };
    let Some(extreme) = side
        .iter()
        .copied()
        .max_by(|&a, &b| key(a).total_cmp(&key(b)).then(b.cmp(&a)))
    else {
        return (Vec::new(), Vec::new());
    };
    let ue = flat[extreme].1;
    let mut upper: Vec<usize> = Vec::new();
    let mut lower: Vec<usize> = Vec::new();
    for &i in side {
        if i == extreme {
            continue;
        }
        if flat[i].1 > ue {
            upper.push(i);
        } else {
            lower.push(i);
        }
    }
    let to_upper = match (upper.len() >= 2, lower.len() >= 2) {
        (false, true) => true,
        (true, false) => false,
        (false, false) => upper.len() <= lower.len(),
        (true, true) => {
            line_distance_2d(&upper, flat, extreme) <= line_distance_2d(&lower, flat, extreme)
        }
    };
    if to_upper {
        upper.push(extreme);
    } else {
        lower.push(extreme);
    }
    (upper, lower)
}

fn line_distance_2d(group: &[usize], flat: &[(f64, f64)], p: usize) -> f64 {
    let n = group.len() as f64;
    let (mx, my) = group.iter().fold((0.0, 0.0), |(a, b), &i| {
        (a + flat[i].0 / n, b + flat[i].1 / n)
    });
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &i in group {
        let (dx, dy) = (flat[i].0 - mx, flat[i].1 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (c, s) = (theta.cos(), theta.sin());
    let (dx, dy) = (flat[p].0 - mx, flat[p].1 - my);
    (dx * s - dy * c).abs()
}

/// Clusters from manually assigned `(point index, edge)` labels.
pub fn clusters_from_labels(
    cloud: &PointCloud,
    labels: &[(usize, EdgeLabel)],
) -> Result<Vec<EdgeCluster>> {
    let mut groups: BTreeMap<EdgeLabel, Vec<usize>> = BTreeMap::new();
    for &(i, label) in labels {
        if i >= cloud.len() {
            return Err(Error::invalid(
                "edge label",
                format!("point index {i} outside cloud of {} points", cloud.len()),
            ));
        }
        groups.entry(label).or_default().push(i);
    }
    Ok(groups
        .into_iter()
        .map(|(label, mut idx)| {
            idx.sort_unstable();
            idx.dedup();
            EdgeCluster {
                label,
                points: cloud.select(&idx),
                indices: idx,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractParams {
    pub ransac: RansacLineParams,
    /// Largest accepted edge length error, metres.
    pub reject_threshold: f64,
    pub up: Vector3<f64>,
    pub viewpoint: Point3,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            ransac: RansacLineParams::default(),
            reject_threshold: 0.05,
            up: Vector3::from(LIDAR_UP),
            viewpoint: Point3::ORIGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLine {
    pub label: EdgeLabel,
    pub line: Line3,
    pub inliers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedBoard {
    /// Outer corners then cutout corners, each in canonical order.
    pub corners: Vec<Point3>,
    /// Length of the bridging segment behind each corner, same order.
    pub gap_lengths: Vec<f64>,
    pub edge_lines: Vec<EdgeLine>,
    /// `|fitted - expected|` per edge, same order as `edge_lines`.
    pub edge_length_errors: Vec<f64>,
    /// Some edge was fitted from fewer than three points.
    pub low_confidence: bool,
}

/// Corners of one board from its edge clusters (4 for a solid board, 8 for
/// a hollow one).
pub fn extract_board(
    clusters: &[EdgeCluster],
    model: &BoardModel,
    params: &ExtractParams,
) -> Result<ExtractedBoard> {
    model.validate()?;
    let contours: Vec<(Contour, f64, f64)> = match &model.cutout {
        Some(c) => vec![
            (Contour::Outer, model.outer_width, model.outer_height),
            (Contour::Inner, c.width, c.height),
        ],
        None => vec![(Contour::Outer, model.outer_width, model.outer_height)],
    };
    if clusters.len() != 4 * contours.len() {
        return Err(Error::invalid(
            "edge clusters",
            format!("expected {}, got {}", 4 * contours.len(), clusters.len()),
        ));
    }

    let mut board = ExtractedBoard {
        corners: Vec::new(),
        gap_lengths: Vec::new(),
        edge_lines: Vec::new(),
        edge_length_errors: Vec::new(),
        low_confidence: false,
    };
    let mut outer_basis: Option<ViewBasis> = None;
    for (contour, width, height) in contours {
        let mut lines = Vec::with_capacity(4);
        for edge in EdgeId::ALL {
            let label = EdgeLabel::new(contour, edge);
            let cluster = clusters
                .iter()
                .find(|c| c.label == label)
                .ok_or_else(|| Error::invalid("edge clusters", format!("no `{label}` cluster")))?;
            let pts = cluster.points.points();
            if pts.len() < 2 {
                return Err(Error::TooSparse {
                    edge: label.to_string(),
                    count: pts.len(),
                });
            }
            let fit = ransac_fit_line(pts, &params.ransac)?;
            let inliers = fit.inlier_count();
            board.low_confidence |= pts.len() < 3 || inliers < 3;
            lines.push(fit.line);
            board.edge_lines.push(EdgeLine {
                label,
                line: fit.line,
                inliers,
            });
        }
        let [tl, tr, bl, br] = [lines[0], lines[1], lines[2], lines[3]];
        // top, left, bottom, right
        let named = [
            corner_from_edges(&tl, &tr)?,
            corner_from_edges(&tl, &bl)?,
            corner_from_edges(&bl, &br)?,
            corner_from_edges(&br, &tr)?,
        ];
        let pts: Vec<Point3> = named.iter().map(|c| c.0).collect();

        // edges between consecutive named corners: TL, BL, BR, TR
        let len = |a: usize, b: usize| pts[a].distance(&pts[b]);
        let (l_tl, l_bl, l_br, l_tr) = (len(0, 1), len(1, 2), len(2, 3), len(3, 0));
        let a = [
            (l_tl - width).abs(),
            (l_tr - height).abs(),
            (l_bl - height).abs(),
            (l_br - width).abs(),
        ];
        let b = [
            (l_tl - height).abs(),
            (l_tr - width).abs(),
            (l_bl - width).abs(),
            (l_br - height).abs(),
        ];
        let errors = if a.iter().sum::<f64>() <= b.iter().sum::<f64>() {
            a
        } else {
            b
        };
        for (edge, err) in EdgeId::ALL.iter().zip(errors) {
            if err > params.reject_threshold {
                return Err(Error::BoardRejected {
                    edge: EdgeLabel::new(contour, *edge).to_string(),
                    error: err,
                    threshold: params.reject_threshold,
                });
            }
        }
        board.edge_length_errors.extend(errors);

        let basis = match outer_basis {
            None => {
                let b = ViewBasis::fit(&pts, &params.up, &params.viewpoint)?;
                outer_basis = Some(b);
                b
            }
            Some(mut b) => {
                b.origin = Point3::centroid(&pts).expect("four corners").coords();
                b
            }
        };
        for i in order_in_basis(&pts, &basis) {
            board.corners.push(named[i].0);
            board.gap_lengths.push(named[i].1);
        }
    }
    Ok(board)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::Cutout;
    use crate::geometry::{FrameId, RigidTransform, RotationMatrix};
    use rand_distr::{Distribution, Normal};

    fn frame() -> FrameId {
        FrameId::new("lidar").unwrap()
    }

    #[test]
    fn line_canonical_direction() {
        let l = Line3::new(Point3::ORIGIN, Vector3::new(-2.0, 1.0, 0.0)).unwrap();
        assert!(l.direction().x > 0.0);
        assert!((l.direction().norm() - 1.0).abs() <= 1e-12);
        let l = Line3::new(Point3::ORIGIN, Vector3::new(0.0, -1.0, 3.0)).unwrap();
        assert!(l.direction().y > 0.0);
        assert!(Line3::new(Point3::ORIGIN, Vector3::zeros()).is_err());
    }

    #[test]
    fn ransac_collinear() {
        let pts: Vec<Point3> = (0..10)
            .map(|i| Point3::new(i as f64, 2.0 * i as f64, 1.0))
            .collect();
        let fit = ransac_fit_line(&pts, &RansacLineParams::default()).unwrap();
        assert!(fit.inliers.iter().all(|&b| b));
        for p in &pts {
            assert!(fit.line.distance(p) <= 1e-12);
        }
    }

    #[test]
    fn ransac_excludes_planted_outliers() {
        let mut pts: Vec<Point3> = (0..14)
            .map(|i| Point3::new(0.1 * i as f64, 0.0, 0.0))
            .collect();
        let outliers: Vec<Point3> = (0..6)
            .map(|i| Point3::new(0.2 * i as f64, 0.5, if i % 2 == 0 { 0.0 } else { 0.3 }))
            .collect();
        pts.extend(&outliers);
        let fit = ransac_fit_line(&pts, &RansacLineParams::default()).unwrap();
        assert!(fit.inliers[..14].iter().all(|&b| b));
        assert!(fit.inliers[14..].iter().all(|&b| !b));
        assert!((fit.line.direction() - Vector3::x()).norm() <= 1e-12);
    }

    #[test]
    fn ransac_noisy_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let dir = Vector3::new(1.0, 1.0, 0.5).normalize();
        let pts: Vec<Point3> = (0..40)
            .map(|i| {
                let s = i as f64 * 0.02;
                Point3::new(
                    s * dir.x + noise.sample(&mut rng),
                    s * dir.y + noise.sample(&mut rng),
                    s * dir.z + noise.sample(&mut rng),
                )
            })
            .collect();
        let fit = ransac_fit_line(&pts, &RansacLineParams::default()).unwrap();
        let angle = fit
            .line
            .direction()
            .dot(&dir)
            .abs()
            .min(1.0)
            .acos()
            .to_degrees();
        assert!(angle <= 0.5, "{angle}");
    }

    #[test]
    fn ransac_sampled_mode_is_seeded() {
        let pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new(i as f64 * 0.01, ((i * 37) % 11) as f64 * 1e-3, 0.0))
            .collect();
        let params = RansacLineParams {
            iterations: 50,
            ..RansacLineParams::default()
        };
        let a = ransac_fit_line(&pts, &params).unwrap();
        let b = ransac_fit_line(&pts, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ransac_errors() {
        assert!(matches!(
            ransac_fit_line(&[Point3::ORIGIN], &RansacLineParams::default()),
            Err(Error::InsufficientPoints { .. })
        ));
        let scattered: Vec<Point3> = (0..8)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 8.0;
                Point3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        assert!(matches!(
            ransac_fit_line(&scattered, &RansacLineParams::default()),
            Err(Error::NoConsensus {
                best: 2,
                required: 4
            })
        ));
    }

    #[test]
    fn segment_examples() {
        let x = Line3::new(Point3::ORIGIN, Vector3::x()).unwrap();
        let y = Line3::new(Point3::ORIGIN, Vector3::y()).unwrap();
        let s = shortest_connecting_segment(&x, &y).unwrap();
        assert_eq!(s.length(), 0.0);
        assert_eq!(s.midpoint(), Point3::ORIGIN);

        let par = Line3::new(Point3::new(0.0, 1.0, 1.0), Vector3::x()).unwrap();
        assert!(matches!(
            shortest_connecting_segment(&x, &par),
            Err(Error::ParallelLines)
        ));

        let l2 = Line3::new(Point3::new(0.0, 1.0, 2.0), Vector3::y()).unwrap();
        let s = shortest_connecting_segment(&x, &l2).unwrap();
        // brute-force minimization over a grid
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -200..=200 {
            for j in -200..=200 {
                let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
                let d = x.at(a).distance(&l2.at(b));
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        assert!((s.length() - best.0).abs() <= 1e-9);
        assert!(s.a.distance(&x.at(best.1)) <= 1e-2);
        assert!(s.b.distance(&l2.at(best.2)) <= 1e-2);
        assert!(s.a.distance(&Point3::ORIGIN) <= 1e-12);
        assert!(s.b.distance(&Point3::new(0.0, 0.0, 2.0)) <= 1e-12);
    }

    #[test]
    fn corner_examples() {
        let l1 = Line3::new(Point3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 1.0, 0.0)).unwrap();
        let l2 = Line3::new(Point3::new(1.0, 2.0, 3.0), Vector3::new(0.0, 1.0, -1.0)).unwrap();
        let (c, gap) = corner_from_edges(&l1, &l2).unwrap();
        assert!(c.distance(&Point3::new(1.0, 2.0, 3.0)) <= 1e-12);
        assert!(gap <= 1e-12);

        // common perpendicular along z, 0.2 mm long
        let a = Line3::new(Point3::new(0.3, 0.0, 1.0), Vector3::new(1.0, 1.0, 0.0)).unwrap();
        let b = Line3::new(Point3::new(0.3, 0.0, 1.0002), Vector3::new(1.0, -2.0, 0.0)).unwrap();
        let (c, gap) = corner_from_edges(&a, &b).unwrap();
        assert!((gap - 2e-4).abs() <= 1e-12);
        assert!(c.distance(&Point3::new(0.3, 0.0, 1.0001)) <= 1e-12);
        assert_eq!(corner_from_edges(&b, &a).unwrap(), (c, gap));
    }

    /// Points along the edges of `model` placed by `pose`, `per_edge` each.
    fn edge_points(
        model: &BoardModel,
        pose: &RigidTransform,
        per_edge: usize,
        sigma: f64,
        seed: u64,
    ) -> Vec<EdgeCluster> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let mut rects = vec![(Contour::Outer, model.outer_corners())];
        if let Some(c) = model.cutout_corners() {
            rects.push((Contour::Inner, c));
        }
        let mut out = Vec::new();
        for (contour, rect) in rects {
            let world: Vec<Point3> = rect.iter().map(|p| pose.transform_point(p)).collect();
            let basis = ViewBasis::fit(&world, &Vector3::from(LIDAR_UP), &Point3::ORIGIN).unwrap();
            for k in 0..4 {
                let (a, b) = (world[k], world[(k + 1) % 4]);
                let mid = (a + b) * 0.5;
                let (l, u) = basis.project(&mid);
                let (cl, cu) = basis.project(&(Point3::centroid(&world).unwrap()));
                let edge = EdgeId::from_sides(u > cu, l > cl);
                let pts: Vec<Point3> = (1..=per_edge)
                    .map(|i| {
                        let s = i as f64 / (per_edge + 1) as f64;
                        let p = a + (b - a) * s;
                        if sigma > 0.0 {
                            p + Point3::new(
                                noise.sample(&mut rng),
                                noise.sample(&mut rng),
                                noise.sample(&mut rng),
                            )
                        } else {
                            p
                        }
                    })
                    .collect();
                out.push(EdgeCluster {
                    label: EdgeLabel::new(contour, edge),
                    indices: (0..pts.len()).collect(),
                    points: PointCloud::new(frame(), pts).unwrap(),
                });
            }
        }
        out
    }

    fn diamond_pose() -> RigidTransform {
        // board facing the sensor along -x, rotated 45 degrees in-plane
        let face = RotationMatrix::from_rows([[0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
            .unwrap();
        RigidTransform::new(
            face * RotationMatrix::about_z(std::f64::consts::FRAC_PI_4),
            Point3::new(2.0, 0.1, 0.05),
            FrameId::new("board").unwrap(),
            frame(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_board_is_exact() {
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let pose = diamond_pose();
        let clusters = edge_points(&model, &pose, 6, 0.0, 1);
        let b = extract_board(&clusters, &model, &ExtractParams::default()).unwrap();
        assert_eq!(b.corners.len(), 4);
        assert!(b.gap_lengths.iter().all(|g| *g <= 1e-12));
        assert!(b.edge_length_errors.iter().all(|e| *e <= 1e-12));
        assert!(!b.low_confidence);
        // top corner first, then counter-clockwise from the sensor: left is +y
        assert!(b.corners[0].z > b.corners[1].z.max(b.corners[3].z));
        assert!(b.corners[1].y > b.corners[3].y);
        for c in &b.corners {
            let hit = model
                .outer_corners()
                .iter()
                .any(|q| pose.transform_point(q).distance(c) <= 1e-12);
            assert!(hit);
        }
    }

    #[test]
    fn hollow_board_has_eight_corners_with_inner_inside() {
        let model = BoardModel::hollow(
            0.8,
            0.6,
            Cutout {
                width: 0.3,
                height: 0.2,
                offset: [0.05, 0.02],
            },
        )
        .unwrap();
        let pose = diamond_pose();
        let clusters = edge_points(&model, &pose, 8, 0.0, 2);
        let b = extract_board(&clusters, &model, &ExtractParams::default()).unwrap();
        assert_eq!(b.corners.len(), 8);
        let basis =
            ViewBasis::fit(&b.corners[..4], &Vector3::from(LIDAR_UP), &Point3::ORIGIN).unwrap();
        let outer: Vec<(f64, f64)> = b.corners[..4].iter().map(|p| basis.project(p)).collect();
        for p in &b.corners[4..] {
            let q = basis.project(p);
            // (left, up) is a mirrored frame: the corner loop turns clockwise there
            for k in 0..4 {
                let (a, c) = (outer[k], outer[(k + 1) % 4]);
                let cross = (c.0 - a.0) * (q.1 - a.1) - (c.1 - a.1) * (q.0 - a.0);
                assert!(cross < 0.0);
            }
        }
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let clusters = edge_points(&model, &diamond_pose(), 5, 0.0, 3);
        let bigger = BoardModel::solid(0.6, 0.6).unwrap();
        assert!(matches!(
            extract_board(&clusters, &bigger, &ExtractParams::default()),
            Err(Error::BoardRejected { .. })
        ));
    }

    #[test]
    fn two_point_edges_are_low_confidence() {
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let clusters = edge_points(&model, &diamond_pose(), 2, 0.0, 4);
        let b = extract_board(&clusters, &model, &ExtractParams::default()).unwrap();
        assert!(b.low_confidence);
        let mut one = clusters.clone();
        one[0].points = one[0].points.select(&[0]);
        assert!(matches!(
            extract_board(&one, &model, &ExtractParams::default()),
            Err(Error::TooSparse { count: 1, .. })
        ));
    }

    #[test]
    fn hull_clustering_without_rings() {
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let pose = diamond_pose();
        let clusters = edge_points(&model, &pose, 6, 0.0, 5);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for c in &clusters {
            for p in c.points.points() {
                pts.push(*p);
                truth.push(c.label);
            }
        }
        // interior points never reach the hull
        pts.push(pose.transform_point(&Point3::new(0.0, 0.0, 0.0)));
        truth.push(EdgeLabel::new(Contour::Inner, EdgeId::TopLeft));
        let cloud = PointCloud::new(frame(), pts).unwrap();
        let got = cluster_edges(&cloud, &model, &ClusterParams::default()).unwrap();
        assert_eq!(got.len(), 4);
        for c in &got {
            assert!(
                c.indices.iter().all(|&i| truth[i] == c.label),
                "{:?}",
                c.label
            );
        }
    }

    #[test]
    fn manual_labels_group_points() {
        let cloud = PointCloud::new(frame(), vec![Point3::ORIGIN; 5]).unwrap();
        let tl = EdgeLabel::new(Contour::Outer, EdgeId::TopLeft);
        let br = EdgeLabel::new(Contour::Inner, EdgeId::BottomRight);
        let got = clusters_from_labels(&cloud, &[(3, tl), (0, tl), (4, br)]).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].indices, vec![0, 3]);
        assert_eq!(got[1].label, br);
        assert!(clusters_from_labels(&cloud, &[(9, tl)]).is_err());
    }
}
