//! Numeric checks for a cloud fused into another sensor's frame.
//!
//! A translation error in the extrinsics shows up as duplicated structure:
//! points of the moved cloud sit a few centimetres beside their true
//! surfaces instead of on them. A rotation error shows up as misalignment
//! that grows with range. The report measures both.

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::spatial::KdTree;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// Nearest-neighbour distance above which a point counts as duplicated
    /// structure, metres.
    pub hallucination_radius: f64,
    /// Points farther than this from any point of the other cloud are outside
    /// the overlap, metres.
    pub structure_radius: f64,
    /// Number of range bins for the divergence profile.
    pub bins: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            hallucination_radius: 0.05,
            structure_radius: 0.5,
            bins: 10,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hallucination_radius.is_finite() && self.hallucination_radius > 0.0) {
            return Err(Error::invalid(
                "fusion parameters",
                "hallucination radius must be positive",
            ));
        }
        if !(self.structure_radius.is_finite() && self.structure_radius > self.hallucination_radius)
        {
            return Err(Error::invalid(
                "fusion parameters",
                "structure radius must exceed the hallucination radius",
            ));
        }
        if self.bins == 0 {
            return Err(Error::invalid(
                "fusion parameters",
                "at least one range bin is needed",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeBin {
    /// Range interval `[lo, hi)` from the target frame origin, metres; the
    /// last bin is closed.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean nearest-neighbour distance of the bin's points; `None` if empty.
    pub mean_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    /// Moved points within `structure_radius` of the target cloud.
    pub overlap_count: usize,
    pub mean_distance: f64,
    pub median_distance: f64,
    /// Fraction of overlap points farther than `hallucination_radius` from
    /// the target cloud.
    pub duplication_score: f64,
    /// Divergence by range over all moved points.
    pub range_bins: Vec<RangeBin>,
}

/// Moves `a` into `b`'s frame, concatenates the clouds and scores the fit.
pub fn fuse(
    a: &PointCloud,
    b: &PointCloud,
    a_to_b: &RigidTransform,
    params: &FusionParams,
) -> Result<(PointCloud, FusionReport)> {
    params.validate()?;
    if a_to_b.to_frame() != b.frame() {
        return Err(Error::frame_mismatch(b.frame(), a_to_b.to_frame()));
    }
    let moved = a_to_b.apply(a)?;
    let report = fusion_report(&moved, b, params)?;
    let mut points = moved.into_points();
    points.extend_from_slice(b.points());
    Ok((PointCloud::new(b.frame().clone(), points)?, report))
}

/// Report for two clouds already in the same frame.
pub fn fusion_report(
    moved: &PointCloud,
    b: &PointCloud,
    params: &FusionParams,
) -> Result<FusionReport> {
    params.validate()?;
    if moved.frame() != b.frame() {
        return Err(Error::frame_mismatch(b.frame(), moved.frame()));
    }
    if moved.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("fusion clouds"));
    }
    let tree = KdTree::new(b.points());
    let nearest: Vec<f64> = moved
        .points()
        .iter()
        .map(|p| {
            tree.nearest(p)
                .expect("nonempty tree")
                .distance_squared
                .sqrt()
        })
        .collect();

    let mut overlap: Vec<f64> = nearest
        .iter()
        .copied()
        .filter(|d| *d <= params.structure_radius)
        .collect();
    let overlap_count = overlap.len();
    let (mean_distance, median_distance, duplication_score) = if overlap.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let n = overlap.len() as f64;
        let mean = overlap.iter().sum::<f64>() / n;
        overlap.sort_by(f64::total_cmp);
        let mid = overlap.len() / 2;
        let median = if overlap.len().is_multiple_of(2) {
            0.5 * (overlap[mid - 1] + overlap[mid])
        } else {
            overlap[mid]
        };
        let dup = overlap
            .iter()
            .filter(|d| **d > params.hallucination_radius)
            .count() as f64
            / n;
        (mean, median, dup)
    };

    let ranges: Vec<f64> = moved
        .points()
        .iter()
        .map(|p| p.distance(&Point3::ORIGIN))
        .collect();
    let lo = ranges.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ranges.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / params.bins as f64;
    let mut sums = vec![(0usize, 0.0f64); params.bins];
    for (r, d) in ranges.iter().zip(&nearest) {
        let k = if width > 0.0 {
            (((r - lo) / width) as usize).min(params.bins - 1)
        } else {
            0
        };
        sums[k].0 += 1;
        sums[k].1 += d;
    }
    let range_bins = sums
        .iter()
        .enumerate()
        .map(|(k, (count, sum))| RangeBin {
            lo: lo + width * k as f64,
            hi: if k + 1 == params.bins {
                hi
            } else {
                lo + width * (k + 1) as f64
            },
            count: *count,
            mean_distance: (*count > 0).then(|| sum / *count as f64),
        })
        .collect();

    Ok(FusionReport {
        overlap_count,
        mean_distance,
        median_distance,
        duplication_score,
        range_bins,
    })
}

/// Surface samples of small spheres on a Fibonacci lattice. Different
/// `phase` values give interleaved samplings of the same surfaces.
pub fn sample_spheres(
    centres: &[Point3],
    radius: f64,
    per_sphere: usize,
    phase: f64,
) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(centres.len() * per_sphere);
    for c in centres {
        for i in 0..per_sphere {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / per_sphere as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64 + phase;
            out.push(*c + Point3::new(r * theta.cos(), r * theta.sin(), z) * radius);
        }
    }
    out
}

/// Sphere centres on a 1 m grid, 2 to 8 m ahead: distinct objects for the
/// duplication check.
pub fn object_grid() -> Vec<Point3> {
    let mut v = Vec::new();
    for i in 0..7 {
        for j in -3..=3 {
            for k in 0..2 {
                v.push(Point3::new(2.0 + i as f64, j as f64, k as f64 - 0.5));
            }
        }
    }
    v
}

/// Sphere centres every metre from 2 to 20 m, alternating sides of a
/// corridor 3 m wide: range-dependent misalignment check.
pub fn corridor() -> Vec<Point3> {
    (2..=20)
        .map(|i| Point3::new(i as f64, if i % 2 == 0 { 1.5 } else { -1.5 }, 0.0))
        .collect()
}
