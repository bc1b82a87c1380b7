//! Rigid registration between two 3D point sets.
//!
//! [`kabsch_solve`] is the closed-form least-squares solution when pairs are
//! known (board corners seen by both sensors). [`icp_solve`] is the
//! closest-point baseline that has to guess the pairing, and
//! [`average_runs`] fuses repeated calibrations.

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::{Error, Result};
use crate::geometry::{
    FrameId, Point3, PointCloud, RigidTransform, RotationMatrix, UnitQuaternion,
};
use crate::spatial::KdTree;

/// Relative singular-value floor below which a direction counts as missing.
const DEGENERATE_RATIO: f64 = 1e-10;
/// Second singular value below this fraction of the first flags a
/// near-collinear (weakly constrained) problem.
const NEAR_DEGENERATE_RATIO: f64 = 1e-3;

/// Paired source (`P`, e.g. LiDAR) and target (`Q`, e.g. camera) points;
/// pairing is by index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    source: PointCloud,
    target: PointCloud,
}

impl CorrespondenceSet {
    pub fn new(source: PointCloud, target: PointCloud) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::LengthMismatch {
                left: source.len(),
                right: target.len(),
            });
        }
        if source.frame() == target.frame() {
            return Err(Error::invalid(
                "correspondence set",
                format!("source and target share frame `{}`", source.frame()),
            ));
        }
        Ok(Self { source, target })
    }

    pub fn from_pairs(
        source_frame: FrameId,
        target_frame: FrameId,
        pairs: impl IntoIterator<Item = (Point3, Point3)>,
    ) -> Result<Self> {
        let (p, q): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Self::new(
            PointCloud::new(source_frame, p)?,
            PointCloud::new(target_frame, q)?,
        )
    }

    pub fn source(&self) -> &PointCloud {
        &self.source
    }

    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Point3, &Point3)> {
        self.source.points().iter().zip(self.target.points())
    }

    /// Keep only the listed pair indices.
    pub fn select(&self, indices: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet {
            source: self.source.select(indices),
            target: self.target.select(indices),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Kabsch,
    Icp,
    Pnp,
    PnpRansac,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Kabsch => "kabsch",
            Method::Icp => "icp",
            Method::Pnp => "pnp",
            Method::PnpRansac => "pnp-ransac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "kabsch" => Method::Kabsch,
            "icp" => Method::Icp,
            "pnp" => Method::Pnp,
            "pnp-ransac" => Method::PnpRansac,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// The SVD step needed the determinant correction to avoid a reflection.
    pub reflection_corrected: bool,
    /// Source spread is nearly one-dimensional; rotation is weakly observable.
    pub near_degenerate: bool,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub inliers: Option<Vec<bool>>,
}

/// Estimated transform plus residual statistics. For the 3D solvers the
/// residuals are metres, for the PnP solvers pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub transform: RigidTransform,
    pub rmse: f64,
    pub residuals: Vec<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

pub(crate) fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub(crate) struct RigidFit {
    pub rotation: RotationMatrix,
    pub translation: Point3,
    pub reflection_corrected: bool,
    pub near_degenerate: bool,
}

/// Least-squares rotation and translation taking `source[i]` onto `target[i]`.
pub(crate) fn fit_rigid(source: &[Point3], target: &[Point3]) -> Result<RigidFit> {
    debug_assert_eq!(source.len(), target.len());
    if source.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "{} correspondences, need at least 3",
            source.len()
        )));
    }
    if let Some(i) = source.iter().chain(target).position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("correspondence point {i}")));
    }

    let p_bar = Point3::centroid(source).unwrap().coords();
    let q_bar = Point3::centroid(target).unwrap().coords();

    // H = sum (q_i - q̄)(p_i - p̄)^T, i.e. Y X^T with X, Y the centred sets.
    let h = source
        .iter()
        .zip(target)
        .fold(Matrix3::zeros(), |acc, (p, q)| {
            acc + (q.coords() - q_bar) * (p.coords() - p_bar).transpose()
        });

    let svd = SVD::new(h, true, true);
    let d = svd.singular_values;
    if d[0] <= 0.0 || (d[1] <= DEGENERATE_RATIO * d[0] && d[2] <= DEGENERATE_RATIO * d[0]) {
        return Err(Error::DegenerateGeometry(
            "points are collinear or coincident; rotation about their axis is unobservable".into(),
        ));
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");

    // C = diag(1, 1, sign(det(U V^T))) drops the reflection by flipping the
    // axis of the smallest singular value.
    let det = (u * v_t).determinant();
    let reflection_corrected = det < 0.0;
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = RotationMatrix::from_matrix_unchecked(u * correction * v_t);

    let translation = Point3::from(q_bar - rotation.matrix() * p_bar);
    Ok(RigidFit {
        rotation,
        translation,
        reflection_corrected,
        near_degenerate: d[1] <= NEAR_DEGENERATE_RATIO * d[0],
    })
}

fn residuals(transform: &RigidTransform, source: &[Point3], target: &[Point3]) -> Vec<f64> {
    source
        .iter()
        .zip(target)
        .map(|(p, q)| transform.transform_point(p).distance(q))
        .collect()
}

/// Closed-form rigid alignment with known correspondences.
///
/// Minimizes `sum |R p_i + t - q_i|^2`. The rotation comes from the SVD of the
/// centred cross-covariance with the determinant correction, and the
/// translation is `t = q̄ - R p̄`. Planar inputs are fine; collinear ones are
/// rejected because the roll about the line is unobservable.
pub fn kabsch_solve(c: &CorrespondenceSet) -> Result<CalibrationResult> {
    let fit = fit_rigid(c.source.points(), c.target.points())?;
    let transform = RigidTransform::new(
        fit.rotation,
        fit.translation,
        c.source.frame().clone(),
        c.target.frame().clone(),
    )?;
    let residuals = residuals(&transform, c.source.points(), c.target.points());
    Ok(CalibrationResult {
        rmse: rms(&residuals),
        transform,
        residuals,
        method: Method::Kabsch,
        diagnostics: Diagnostics {
            reflection_corrected: fit.reflection_corrected,
            near_degenerate: fit.near_degenerate,
            iterations: None,
            converged: true,
            inliers: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once an iteration improves the rmse by less than this (metres).
    pub convergence_tol: f64,
    pub max_correspondence_distance: Option<f64>,
    /// Starting source -> target transform; identity when `None`.
    pub initial_guess: Option<RigidTransform>,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            convergence_tol: 1e-6,
            max_correspondence_distance: None,
            initial_guess: None,
        }
    }
}

/// Point-to-point ICP: alternate closest-point pairing and [`kabsch_solve`]
/// on the current pairing until the rmse stops improving.
///
/// Each step solves from the original source points, so the returned
/// transform is absolute rather than an accumulation of increments. The
/// reported rmse and residuals are over the final pairing.
pub fn icp_solve(
    source: &PointCloud,
    target: &PointCloud,
    params: &IcpParams,
) -> Result<CalibrationResult> {
    for cloud in [source, target] {
        if cloud.len() < 3 {
            return Err(Error::InsufficientPoints {
                needed: 3,
                got: cloud.len(),
            });
        }
    }
    let mut transform = match &params.initial_guess {
        Some(guess) => {
            if guess.from_frame() != source.frame() {
                return Err(Error::frame_mismatch(source.frame(), guess.from_frame()));
            }
            if guess.to_frame() != target.frame() {
                return Err(Error::frame_mismatch(target.frame(), guess.to_frame()));
            }
            guess.clone()
        }
        None => RigidTransform::new(
            RotationMatrix::identity(),
            Point3::ORIGIN,
            source.frame().clone(),
            target.frame().clone(),
        )?,
    };

    let tree = KdTree::new(target.points());
    let gate = params
        .max_correspondence_distance
        .map(|d| d * d)
        .unwrap_or(f64::INFINITY);

    let mut src = Vec::with_capacity(source.len());
    let mut dst = Vec::with_capacity(source.len());
    let mut last = None;
    for iteration in 1..=params.max_iterations.max(1) {
        src.clear();
        dst.clear();
        let mut paired_sq = 0.0;
        for p in source.points() {
            let moved = transform.transform_point(p);
            let nn = tree.nearest(&moved).expect("target is nonempty");
            if nn.distance_squared <= gate {
                src.push(*p);
                dst.push(target.points()[nn.index]);
                paired_sq += nn.distance_squared;
            }
        }
        if src.is_empty() {
            return Err(Error::NoCorrespondences);
        }
        let rmse_before = (paired_sq / src.len() as f64).sqrt();

        let fit = fit_rigid(&src, &dst)?;
        transform = RigidTransform::new(
            fit.rotation,
            fit.translation,
            source.frame().clone(),
            target.frame().clone(),
        )?;
        let res = residuals(&transform, &src, &dst);
        let rmse = rms(&res);
        let converged = rmse_before - rmse < params.convergence_tol;
        last = Some((res, rmse, iteration, converged, fit));
        if converged {
            break;
        }
    }

    let (residuals, rmse, iterations, converged, fit) = last.expect("at least one iteration");
    log::debug!("icp finished after {iterations} iterations, rmse {rmse:.6} m");
    Ok(CalibrationResult {
        transform,
        rmse,
        residuals,
        method: Method::Icp,
        diagnostics: Diagnostics {
            reflection_corrected: fit.reflection_corrected,
            near_degenerate: fit.near_degenerate,
            iterations: Some(iterations),
            converged,
            inliers: None,
        },
    })
}

/// Mean of repeated calibrations of a fixed sensor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedExtrinsics {
    pub mean_translation: Point3,
    pub mean_rotation: UnitQuaternion,
    pub sample_count: usize,
    pub per_run: Vec<CalibrationResult>,
    from_frame: FrameId,
    to_frame: FrameId,
}

impl AveragedExtrinsics {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::new(
            self.mean_rotation.to_rotation(),
            self.mean_translation,
            self.from_frame.clone(),
            self.to_frame.clone(),
        )
        .expect("mean of finite translations is finite")
    }
}

/// Arithmetic mean of translations and normalized mean of quaternions.
///
/// Quaternions are first flipped into the hemisphere of the first run so
/// that `q` and `-q` reinforce rather than cancel.
pub fn average_runs(runs: &[CalibrationResult]) -> Result<AveragedExtrinsics> {
    let first = runs.first().ok_or(Error::EmptyInput("calibration runs"))?;
    let from = first.transform.from_frame();
    let to = first.transform.to_frame();
    if let Some(bad) = runs
        .iter()
        .find(|r| r.transform.from_frame() != from || r.transform.to_frame() != to)
    {
        return Err(Error::InconsistentFrames(format!(
            "expected {from} -> {to}, found {} -> {}",
            bad.transform.from_frame(),
            bad.transform.to_frame()
        )));
    }
    let transforms: Vec<&RigidTransform> = runs.iter().map(|r| &r.transform).collect();
    let (mean_translation, mean_rotation) = mean_pose(&transforms)?;
    Ok(AveragedExtrinsics {
        mean_translation,
        mean_rotation,
        sample_count: runs.len(),
        per_run: runs.to_vec(),
        from_frame: from.clone(),
        to_frame: to.clone(),
    })
}

fn mean_pose(transforms: &[&RigidTransform]) -> Result<(Point3, UnitQuaternion)> {
    let n = transforms.len() as f64;
    let t_sum = transforms
        .iter()
        .fold(Vector3::zeros(), |acc, t| acc + t.translation().coords());
    let quats: Vec<UnitQuaternion> = transforms
        .iter()
        .map(|t| t.rotation().to_quaternion())
        .collect();
    Ok(((t_sum / n).into(), average_quaternions(&quats)?))
}

/// Normalized arithmetic mean after flipping every sample into the first
/// sample's hemisphere. Returned in canonical sign.
pub fn average_quaternions(quats: &[UnitQuaternion]) -> Result<UnitQuaternion> {
    let reference = *quats.first().ok_or(Error::EmptyInput("quaternions"))?;
    let mut sum = [0.0; 4];
    for q in quats {
        let q = if q.dot(&reference) < 0.0 {
            q.negated()
        } else {
            *q
        };
        for (acc, c) in sum.iter_mut().zip(q.to_array()) {
            *acc += c;
        }
    }
    let n = quats.len() as f64;
    Ok(UnitQuaternion::new(sum[0] / n, sum[1] / n, sum[2] / n, sum[3] / n)?.canonical())
}

/// Running average after each run, `trace[k]` averaging runs `0..=k`.
pub fn running_average(runs: &[CalibrationResult]) -> Result<Vec<RigidTransform>> {
    (1..=runs.len())
        .map(|k| average_runs(&runs[..k]).map(|a| a.transform()))
        .collect()
}

/// `sqrt(mean |R p_i + t - q_i|^2)` for a given transform.
pub fn registration_rmse(c: &CorrespondenceSet, t: &RigidTransform) -> Result<f64> {
    if t.from_frame() != c.source.frame() {
        return Err(Error::frame_mismatch(c.source.frame(), t.from_frame()));
    }
    if t.to_frame() != c.target.frame() {
        return Err(Error::frame_mismatch(c.target.frame(), t.to_frame()));
    }
    Ok(rms(&residuals(t, c.source.points(), c.target.points())))
}

/// Component-wise mean of `q_i - p_i`: the rotation-free translation guess.
pub fn mean_offset(c: &CorrespondenceSet) -> Result<Point3> {
    if c.is_empty() {
        return Err(Error::EmptyInput("correspondence set"));
    }
    let sum = c.pairs().fold(Vector3::zeros(), |acc, (p, q)| {
        acc + (q.coords() - p.coords())
    });
    Ok((sum / c.len() as f64).into())
}
