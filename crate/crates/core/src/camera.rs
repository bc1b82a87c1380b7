//! Camera side of the calibration: board corners from tag poses, pinhole
//! projection, and the 2D-3D (PnP) path.
//!
//! The PnP solver starts from a direct linear estimate (a 3x4 DLT for points
//! in general position, a plane homography for coplanar points) and refines
//! the reprojection error with Gauss-Newton and step halving.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix6, Vector3, Vector6, SVD};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::board::{order_in_basis, BoardModel, ViewBasis, CAMERA_UP};
use crate::error::{Error, Result};
use crate::geometry::{FrameId, Point3, PointCloud, RigidTransform, RotationMatrix};
use crate::registration::{rms, CalibrationResult, Diagnostics, Method};

/// Minimum depth in front of the camera, metres.
const MIN_DEPTH: f64 = 1e-9;
/// Relative eigenvalue below which a 3D point set is treated as coplanar.
const PLANAR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Skew.
    pub gamma: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, gamma: f64) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid(
                "intrinsics",
                "focal lengths must be positive",
            ));
        }
        if !(cx.is_finite() && cy.is_finite() && gamma.is_finite()) {
            return Err(Error::invalid(
                "intrinsics",
                "non-finite principal point or skew",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            gamma,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.gamma, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0,
        )
    }

    /// Pixel to normalized image coordinates (`K^-1 [u v 1]`).
    fn normalize(&self, px: &Point2) -> (f64, f64) {
        let y = (px.v - self.cy) / self.fy;
        let x = (px.u - self.cx - self.gamma * y) / self.fx;
        (x, y)
    }

    fn project_camera_point(&self, p: &Vector3<f64>) -> Result<Point2> {
        if p.z <= MIN_DEPTH {
            return Err(Error::BehindCamera { depth: p.z });
        }
        Ok(Point2 {
            u: (self.fx * p.x + self.gamma * p.y) / p.z + self.cx,
            v: self.fy * p.y / p.z + self.cy,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Board-to-camera pose reported by a fiducial detector.
#[derive(Debug, Clone, PartialEq)]
pub struct TagPose {
    pub tag_id: u32,
    pub pose: RigidTransform,
}

/// One 3D point with its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D3D {
    pub point: Point3,
    pub pixel: Point2,
}

/// Board corners in the camera frame, in canonical order (outer then cutout)
/// relative to the optical-frame up axis.
pub fn board_corners_camera_frame(model: &BoardModel, pose: &TagPose) -> Result<PointCloud> {
    board_corners_in_frame(model, &pose.pose, &Vector3::from(CAMERA_UP))
}

/// Maps model corners through `board_to_sensor` and orders them for a sensor
/// at the target frame's origin with the given up axis.
pub fn board_corners_in_frame(
    model: &BoardModel,
    board_to_sensor: &RigidTransform,
    up: &Vector3<f64>,
) -> Result<PointCloud> {
    model.validate()?;
    let outer: Vec<Point3> = model
        .outer_corners()
        .iter()
        .map(|p| board_to_sensor.transform_point(p))
        .collect();
    // The board normal is known exactly here; no plane fit needed.
    let normal = board_to_sensor.rotation().rotate(&Vector3::z());
    let origin = board_to_sensor.transform_point(&model.center()).coords();
    let basis = ViewBasis::from_normal(origin, normal, up, &Point3::ORIGIN)?;
    let mut corners: Vec<Point3> = order_in_basis(&outer, &basis)
        .into_iter()
        .map(|i| outer[i])
        .collect();
    if let Some(inner) = model.cutout_corners() {
        let inner: Vec<Point3> = inner
            .iter()
            .map(|p| board_to_sensor.transform_point(p))
            .collect();
        let mut inner_basis = basis;
        inner_basis.origin = Point3::centroid(&inner).expect("four corners").coords();
        corners.extend(
            order_in_basis(&inner, &inner_basis)
                .into_iter()
                .map(|i| inner[i]),
        );
    }
    PointCloud::new(board_to_sensor.to_frame().clone(), corners)
}

/// Pinhole projection of `p` after the extrinsic transform.
pub fn project(intr: &CameraIntrinsics, extr: &RigidTransform, p: &Point3) -> Result<Point2> {
    intr.project_camera_point(&extr.transform_point(p).coords())
}

/// Root-mean-square pixel distance between projected points and observations.
pub fn backprojection_rmse(
    intr: &CameraIntrinsics,
    extr: &RigidTransform,
    corr: &[Correspondence2D3D],
) -> Result<f64> {
    if corr.is_empty() {
        return Err(Error::EmptyInput("2D-3D correspondences"));
    }
    let residuals = pixel_residuals(
        intr,
        extr.rotation().matrix(),
        &extr.translation().coords(),
        corr,
    )?;
    Ok(rms(&residuals))
}

fn pixel_residuals(
    intr: &CameraIntrinsics,
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    corr: &[Correspondence2D3D],
) -> Result<Vec<f64>> {
    corr.iter()
        .map(|c| {
            let px = intr.project_camera_point(&(r * c.point.coords() + t))?;
            Ok(px.distance(&c.pixel))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PnpOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub from_frame: FrameId,
    pub to_frame: FrameId,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            gradient_tol: 1e-10,
            from_frame: FrameId::new("lidar").expect("nonempty"),
            to_frame: FrameId::new("camera").expect("nonempty"),
        }
    }
}

/// Minimum number of correspondences accepted by [`pnp_solve`].
pub const PNP_MIN_POINTS: usize = 6;

/// Pose minimizing the squared reprojection error of the correspondences.
pub fn pnp_solve(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
    options: &PnpOptions,
) -> Result<CalibrationResult> {
    let fit = solve_pose(intr, corr, options)?;
    let transform = RigidTransform::new(
        RotationMatrix::from_matrix_unchecked(fit.rotation),
        fit.translation.into(),
        options.from_frame.clone(),
        options.to_frame.clone(),
    )?;
    let residuals = pixel_residuals(intr, &fit.rotation, &fit.translation, corr)?;
    Ok(CalibrationResult {
        rmse: rms(&residuals),
        transform,
        residuals,
        method: Method::Pnp,
        diagnostics: Diagnostics {
            iterations: Some(fit.iterations),
            converged: true,
            ..Diagnostics::default()
        },
    })
}

struct PoseFit {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    iterations: usize,
}

fn solve_pose(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
    options: &PnpOptions,
) -> Result<PoseFit> {
    if corr.len() < PNP_MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: PNP_MIN_POINTS,
            got: corr.len(),
        });
    }
    if corr
        .iter()
        .any(|c| !c.point.is_finite() || !c.pixel.u.is_finite() || !c.pixel.v.is_finite())
    {
        return Err(Error::NonFinite("2D-3D correspondence".into()));
    }
    let (r0, t0) = initial_pose(intr, corr)?;
    refine_pose(intr, corr, r0, t0, options, &mut Vec::new())
}

fn initial_pose(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let points: Vec<Point3> = corr.iter().map(|c| c.point).collect();
    let centroid = Point3::centroid(&points).expect("nonempty").coords();
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords() - centroid;
        acc + d * d.transpose()
    });
    let eig = nalgebra::SymmetricEigen::new(scatter);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l = [
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    ];
    if l[0] <= 0.0 || l[1] <= PLANAR_RATIO * l[0] {
        return Err(Error::DegenerateConfiguration(
            "3D points are collinear or coincident".into(),
        ));
    }
    let normalized: Vec<(f64, f64)> = corr.iter().map(|c| intr.normalize(&c.pixel)).collect();
    if l[2] <= PLANAR_RATIO * l[0] {
        let e1 = eig.eigenvectors.column(idx[0]).into_owned();
        let e2 = eig.eigenvectors.column(idx[1]).into_owned();
        planar_pose(&points, &normalized, centroid, e1, e2)
    } else {
        dlt_pose(&points, &normalized)
    }
}

/// Translation + isotropic scale taking 2D points to mean distance sqrt(2).
fn normalizing_transform_2d(pts: &[(f64, f64)]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let mean_dist = pts.iter().map(|(x, y)| (x - mx).hypot(y - my)).sum::<f64>() / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Smallest right singular vector of `a`, with a rank check on the next one.
fn null_vector(a: DMatrix<f64>, what: &str) -> Result<Vec<f64>> {
    let cols = a.ncols();
    let svd = SVD::new(a, false, true);
    let s = &svd.singular_values;
    let v_t = svd.v_t.expect("requested V^T");
    if s[0] <= 0.0 || s[cols - 2] <= 1e-12 * s[0] {
        return Err(Error::DegenerateConfiguration(format!(
            "{what} design matrix is rank deficient"
        )));
    }
    Ok(v_t.row(cols - 1).iter().copied().collect())
}

fn dlt_pose(points: &[Point3], normalized: &[(f64, f64)]) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let n = points.len();
    let t2 = normalizing_transform_2d(normalized);
    let centroid = Point3::centroid(points).expect("nonempty").coords();
    let mean_dist = points
        .iter()
        .map(|p| (p.coords() - centroid).norm())
        .sum::<f64>()
        / n as f64;
    let s3 = 3f64.sqrt() / mean_dist;

    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, (p, (x, y))) in points.iter().zip(normalized).enumerate() {
        let q = (p.coords() - centroid) * s3;
        let h = t2 * Vector3::new(*x, *y, 1.0);
        let (u, v) = (h.x / h.z, h.y / h.z);
        let xh = [q.x, q.y, q.z, 1.0];
        for k in 0..4 {
            a[(2 * i, k)] = xh[k];
            a[(2 * i, 8 + k)] = -u * xh[k];
            a[(2 * i + 1, 4 + k)] = xh[k];
            a[(2 * i + 1, 8 + k)] = -v * xh[k];
        }
    }
    let sol = null_vector(a, "DLT")?;
    let p_norm = Matrix3x4::from_row_slice(&sol);
    // Undo the normalizations: P = T2^-1 P~ T3.
    let t3 = nalgebra::Matrix4::new(
        s3,
        0.0,
        0.0,
        -s3 * centroid.x,
        0.0,
        s3,
        0.0,
        -s3 * centroid.y,
        0.0,
        0.0,
        s3,
        -s3 * centroid.z,
        0.0,
        0.0,
        0.0,
        1.0,
    );
    let t2_inv = t2.try_inverse().expect("similarity is invertible");
    let mut m = t2_inv * p_norm * t3;
    let mut a3 = m.fixed_view::<3, 3>(0, 0).into_owned();
    if a3.determinant() < 0.0 {
        m = -m;
        a3 = -a3;
    }
    let svd = SVD::new(a3, true, true);
    let scale = svd.singular_values.mean();
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let t = m.column(3).into_owned() / scale;
    Ok((r, t))
}

fn planar_pose(
    points: &[Point3],
    normalized: &[(f64, f64)],
    centroid: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let e2 = (e2 - e1 * e1.dot(&e2)).normalize();
    let e3 = e1.cross(&e2);
    let basis = Matrix3::from_columns(&[e1, e2, e3]);
    let plane: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let d = p.coords() - centroid;
            (d.dot(&e1), d.dot(&e2))
        })
        .collect();
    let tp = normalizing_transform_2d(&plane);
    let ti = normalizing_transform_2d(normalized);
    let n = points.len();
    let mut a = DMatrix::zeros(2 * n, 9);
    for (i, ((a_, b_), (x, y))) in plane.iter().zip(normalized).enumerate() {
        let s = tp * Vector3::new(*a_, *b_, 1.0);
        let d = ti * Vector3::new(*x, *y, 1.0);
        let sh = [s.x / s.z, s.y / s.z, 1.0];
        let (u, v) = (d.x / d.z, d.y / d.z);
        for k in 0..3 {
            a[(2 * i, k)] = sh[k];
            a[(2 * i, 6 + k)] = -u * sh[k];
            a[(2 * i + 1, 3 + k)] = sh[k];
            a[(2 * i + 1, 6 + k)] = -v * sh[k];
        }
    }
    let sol = null_vector(a, "homography")?;
    let h_norm = Matrix3::from_row_slice(&sol);
    let mut h = ti.try_inverse().expect("similarity is invertible") * h_norm * tp;
    let lambda = 0.5 * (h.column(0).norm() + h.column(1).norm());
    if lambda <= 0.0 {
        return Err(Error::DegenerateConfiguration(
            "homography has zero scale".into(),
        ));
    }
    h /= lambda;
    if h[(2, 2)] < 0.0 {
        h = -h;
    }
    let r1 = h.column(0).into_owned();
    let r2 = h.column(1).into_owned();
    let approx = Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]);
    let svd = SVD::new(approx, true, true);
    let mut u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    if (u * v_t).determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    let r_plane = u * v_t;
    let t_plane = h.column(2).into_owned();
    // camera = R_plane * B^T (X - c) + t_plane
    let r = r_plane * basis.transpose();
    let t = t_plane - r * centroid;
    Ok((r, t))
}

fn reprojection_cost(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
) -> Option<f64> {
    let mut cost = 0.0;
    for c in corr {
        let px = intr
            .project_camera_point(&(r * c.point.coords() + t))
            .ok()?;
        cost += (px.u - c.pixel.u).powi(2) + (px.v - c.pixel.v).powi(2);
    }
    Some(cost)
}

fn small_rotation(omega: &Vector3<f64>) -> Matrix3<f64> {
    let angle = omega.norm();
    if angle == 0.0 {
        return Matrix3::identity();
    }
    *RotationMatrix::from_axis_angle(*omega, angle)
        .expect("nonzero finite axis")
        .matrix()
}

/// Gauss-Newton on the left-perturbed pose `exp(w) * [R|t] + v`. Every
/// accepted step strictly decreases the cost; `costs` receives the starting
/// cost and the cost after each accepted step.
fn refine_pose(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
    mut r: Matrix3<f64>,
    mut t: Vector3<f64>,
    options: &PnpOptions,
    costs: &mut Vec<f64>,
) -> Result<PoseFit> {
    let mut cost = match reprojection_cost(intr, corr, &r, &t) {
        Some(c) => c,
        None => {
            let depth = corr
                .iter()
                .map(|c| (r * c.point.coords() + t).z)
                .fold(f64::INFINITY, f64::min);
            return Err(Error::BehindCamera { depth });
        }
    };
    costs.push(cost);
    for iteration in 1..=options.max_iterations {
        let mut jtj = Matrix6::zeros();
        let mut jtr = Vector6::zeros();
        for c in corr {
            let p = r * c.point.coords() + t;
            let (x, y, z) = (p.x, p.y, p.z);
            let iz = 1.0 / z;
            let du = Vector3::new(
                intr.fx * iz,
                intr.gamma * iz,
                -(intr.fx * x + intr.gamma * y) * iz * iz,
            );
            let dv = Vector3::new(0.0, intr.fy * iz, -intr.fy * y * iz * iz);
            let ru = (intr.fx * x + intr.gamma * y) * iz + intr.cx - c.pixel.u;
            let rv = intr.fy * y * iz + intr.cy - c.pixel.v;
            // d p / d w = -[p]x, d p / d v = I
            let ju = Vector6::new(
                du.z * y - du.y * z,
                du.x * z - du.z * x,
                du.y * x - du.x * y,
                du.x,
                du.y,
                du.z,
            );
            let jv = Vector6::new(
                dv.z * y - dv.y * z,
                dv.x * z - dv.z * x,
                dv.y * x - dv.x * y,
                dv.x,
                dv.y,
                dv.z,
            );
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * ru + jv * rv;
        }
        if jtr.norm() <= options.gradient_tol {
            return Ok(PoseFit {
                rotation: r,
                translation: t,
                iterations: iteration - 1,
            });
        }
        let step = jtj.cholesky().map(|ch| -ch.solve(&jtr)).ok_or_else(|| {
            Error::DegenerateConfiguration("normal equations are singular".into())
        })?;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let d = step * alpha;
            let dr = small_rotation(&Vector3::new(d[0], d[1], d[2]));
            let r_new = dr * r;
            let t_new = dr * t + Vector3::new(d[3], d[4], d[5]);
            if let Some(c_new) = reprojection_cost(intr, corr, &r_new, &t_new) {
                if c_new < cost {
                    r = r_new;
                    t = t_new;
                    cost = c_new;
                    costs.push(cost);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        // No decrease along a descent direction: at the floating-point floor.
        if !accepted || step.norm() <= 1e-15 * (1.0 + t.norm()) {
            return Ok(PoseFit {
                rotation: r,
                translation: t,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
    })
}

#[derive(Debug, Clone)]
pub struct PnpRansacParams {
    /// Points per hypothesis; 15 when at least 20 correspondences exist,
    /// otherwise the 6-point minimum.
    pub subset_size: Option<usize>,
    pub iterations: usize,
    pub inlier_threshold_px: f64,
    pub seed: u64,
}

impl Default for PnpRansacParams {
    fn default() -> Self {
        Self {
            subset_size: None,
            iterations: 10_000,
            inlier_threshold_px: 2.0,
            seed: 0,
        }
    }
}

/// PnP inside a RANSAC loop: fit random subsets, keep the hypothesis with
/// the most inliers (earliest wins ties), then refit on its inliers.
///
/// The residuals and rmse of the result are over the inliers only; the mask
/// is in `diagnostics.inliers`.
pub fn pnp_ransac(
    intr: &CameraIntrinsics,
    corr: &[Correspondence2D3D],
    params: &PnpRansacParams,
    options: &PnpOptions,
) -> Result<CalibrationResult> {
    let n = corr.len();
    let subset = params
        .subset_size
        .unwrap_or(if n >= 20 { 15 } else { PNP_MIN_POINTS })
        .max(PNP_MIN_POINTS);
    if n < subset {
        return Err(Error::InsufficientPoints {
            needed: subset,
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Vec<bool>> = None;
    let mut best_count = 0;
    let mut picked = Vec::with_capacity(subset);
    for _ in 0..params.iterations {
        let mut idx = sample(&mut rng, n, subset).into_vec();
        idx.sort_unstable();
        picked.clear();
        picked.extend(idx.iter().map(|&i| corr[i]));
        let Ok(fit) = solve_pose(intr, &picked, options) else {
            continue;
        };
        let mask: Vec<bool> = corr
            .iter()
            .map(|c| {
                intr.project_camera_point(&(fit.rotation * c.point.coords() + fit.translation))
                    .map(|px| px.distance(&c.pixel) <= params.inlier_threshold_px)
                    .unwrap_or(false)
            })
            .collect();
        let count = mask.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best = Some(mask);
            if count == n {
                break;
            }
        }
    }
    let mask = match best {
        Some(mask) if best_count >= subset => mask,
        _ => {
            return Err(Error::NoConsensus {
                best: best_count,
                required: subset,
            })
        }
    };
    let inliers: Vec<Correspondence2D3D> = corr
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| *c)
        .collect();
    let mut result = pnp_solve(intr, &inliers, options)?;
    result.method = Method::PnpRansac;
    result.diagnostics.inliers = Some(mask);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::Cutout;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn frame(name: &str) -> FrameId {
        FrameId::new(name).unwrap()
    }

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0.0).unwrap()
    }

    fn pose(r: RotationMatrix, t: [f64; 3]) -> RigidTransform {
        RigidTransform::new(r, t.into(), frame("lidar"), frame("camera")).unwrap()
    }

    fn synth(
        rng: &mut ChaCha8Rng,
        truth: &RigidTransform,
        n: usize,
        sigma: f64,
    ) -> Vec<Correspondence2D3D> {
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let inv = truth.inverse();
        (0..n)
            .map(|_| {
                // sample in front of the camera, map back into the source frame
                let cam = Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(2.0..5.0),
                );
                let point = inv.transform_point(&cam);
                let mut pixel = project(&intr(), truth, &point).unwrap();
                if sigma > 0.0 {
                    pixel.u += noise.sample(rng);
                    pixel.v += noise.sample(rng);
                }
                Correspondence2D3D { point, pixel }
            })
            .collect()
    }

    #[test]
    fn projection_examples() {
        let id = pose(RotationMatrix::identity(), [0.0; 3]);
        let px = project(&intr(), &id, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(px, Point2::new(320.0, 240.0));
        let px = project(&intr(), &id, &Point3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((px.u - 370.0).abs() < 1e-12 && (px.v - 240.0).abs() < 1e-12);
        assert!(matches!(
            project(&intr(), &id, &Point3::new(0.0, 0.0, -1.0)),
            Err(Error::BehindCamera { .. })
        ));
        let skewed = CameraIntrinsics::new(500.0, 400.0, 0.0, 0.0, 10.0).unwrap();
        let px = project(&skewed, &id, &Point3::new(0.1, 0.2, 2.0)).unwrap();
        assert!((px.u - (50.0 + 2.0) / 2.0).abs() < 1e-12);
        assert!((px.v - 40.0).abs() < 1e-12);
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn backprojection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = pose(RotationMatrix::about_y(0.2), [0.1, 0.0, 0.3]);
        let corr = synth(&mut rng, &truth, 10, 0.0);
        assert!(backprojection_rmse(&intr(), &truth, &corr).unwrap() <= 1e-9);
        let single = [Correspondence2D3D {
            point: corr[0].point,
            pixel: Point2::new(corr[0].pixel.u + 3.0, corr[0].pixel.v),
        }];
        assert!((backprojection_rmse(&intr(), &truth, &single).unwrap() - 3.0).abs() < 1e-9);
        assert!(backprojection_rmse(&intr(), &truth, &[]).is_err());

        let corr = synth(&mut rng, &truth, 20, 2.0);
        let e = backprojection_rmse(&intr(), &truth, &corr).unwrap();
        assert!((1.0..=4.0).contains(&e), "{e}");
    }

    #[test]
    fn pnp_noiseless_general_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth = pose(
            RotationMatrix::from_axis_angle(Vector3::new(0.1, 1.0, -0.3), 0.6).unwrap(),
            [0.2, -0.1, 0.4],
        );
        let corr = synth(&mut rng, &truth, 8, 0.0);
        let r = pnp_solve(&intr(), &corr, &PnpOptions::default()).unwrap();
        assert!(r.transform.rotation_error(&truth).to_degrees() <= 1e-6);
        assert!(r.transform.translation_error(&truth) <= 1e-8);
        assert!(r.rmse <= 1e-9);
    }

    #[test]
    fn pnp_noiseless_planar() {
        let truth = pose(
            RotationMatrix::about_x(0.4) * RotationMatrix::about_y(-0.3),
            [0.1, 0.2, 2.5],
        );
        let corr: Vec<Correspondence2D3D> = (0..9)
            .map(|i| {
                let point = Point3::new(
                    (i % 3) as f64 * 0.2 - 0.2,
                    (i / 3) as f64 * 0.15 - 0.15,
                    0.0,
                );
                Correspondence2D3D {
                    point,
                    pixel: project(&intr(), &truth, &point).unwrap(),
                }
            })
            .collect();
        let r = pnp_solve(&intr(), &corr, &PnpOptions::default()).unwrap();
        assert!(r.transform.rotation_error(&truth).to_degrees() <= 1e-6);
        assert!(r.transform.translation_error(&truth) <= 1e-8);
    }

    #[test]
    fn pnp_noisy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = pose(RotationMatrix::about_z(0.3), [0.0, 0.1, 0.2]);
        for _ in 0..10 {
            let corr = synth(&mut rng, &truth, 20, 1.0);
            let r = pnp_solve(&intr(), &corr, &PnpOptions::default()).unwrap();
            assert!(r.transform.rotation_error(&truth).to_degrees() <= 0.5);
            // 2% of the ~3.5 m working range
            assert!(r.transform.translation_error(&truth) <= 0.07);
        }
    }

    #[test]
    fn gauss_newton_cost_decreases_strictly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = pose(RotationMatrix::about_y(0.25), [0.1, -0.05, 0.2]);
        for sigma in [0.0, 1.0, 3.0] {
            let corr = synth(&mut rng, &truth, 12, sigma);
            // start well away from the optimum
            let r0 = *(RotationMatrix::about_x(0.1) * *truth.rotation()).matrix();
            let t0 = truth.translation().coords() + Vector3::new(0.05, -0.03, 0.1);
            let mut costs = Vec::new();
            refine_pose(&intr(), &corr, r0, t0, &PnpOptions::default(), &mut costs).unwrap();
            assert!(costs.len() >= 2);
            assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
        }
    }

    #[test]
    fn pnp_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = pose(RotationMatrix::identity(), [0.0; 3]);
        let corr = synth(&mut rng, &truth, 5, 0.0);
        assert!(matches!(
            pnp_solve(&intr(), &corr, &PnpOptions::default()),
            Err(Error::InsufficientPoints { needed: 6, got: 5 })
        ));
        let line: Vec<Correspondence2D3D> = (0..8)
            .map(|i| {
                let point = Point3::new(i as f64 * 0.1, 0.0, 3.0);
                Correspondence2D3D {
                    point,
                    pixel: project(&intr(), &truth, &point).unwrap(),
                }
            })
            .collect();
        assert!(matches!(
            pnp_solve(&intr(), &line, &PnpOptions::default()),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn ransac_without_outliers_matches_plain_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = pose(RotationMatrix::about_y(0.3), [0.3, 0.0, 0.1]);
        let corr = synth(&mut rng, &truth, 20, 0.5);
        let plain = pnp_solve(&intr(), &corr, &PnpOptions::default()).unwrap();
        let params = PnpRansacParams {
            inlier_threshold_px: f64::INFINITY,
            ..PnpRansacParams::default()
        };
        let robust = pnp_ransac(&intr(), &corr, &params, &PnpOptions::default()).unwrap();
        assert_eq!(robust.transform, plain.transform);
        assert_eq!(robust.rmse, plain.rmse);
        assert_eq!(robust.method, Method::PnpRansac);
    }

    #[test]
    fn ransac_rejects_gross_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth = pose(RotationMatrix::about_x(-0.2), [0.0, 0.2, 0.3]);
        let mut corr = synth(&mut rng, &truth, 20, 0.5);
        for c in corr.iter_mut().take(4) {
            c.pixel.u += 50.0;
        }
        let r = pnp_ransac(
            &intr(),
            &corr,
            &PnpRansacParams::default(),
            &PnpOptions::default(),
        )
        .unwrap();
        let mask = r.diagnostics.inliers.clone().unwrap();
        assert!(mask[..4].iter().all(|&m| !m));
        assert!(mask[4..].iter().all(|&m| m));
        let clean = pnp_solve(&intr(), &corr[4..], &PnpOptions::default()).unwrap();
        assert!(r.transform.rotation_error(&clean.transform) <= 1e-9);
        assert!(r.transform.translation_error(&clean.transform) <= 1e-9);
    }

    #[test]
    fn ransac_no_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = pose(RotationMatrix::identity(), [0.0; 3]);
        let corr = synth(&mut rng, &truth, 8, 30.0);
        let params = PnpRansacParams {
            iterations: 50,
            inlier_threshold_px: 0.01,
            ..PnpRansacParams::default()
        };
        assert!(matches!(
            pnp_ransac(&intr(), &corr, &params, &PnpOptions::default()),
            Err(Error::NoConsensus { .. })
        ));
    }

    #[test]
    fn board_corners_examples() {
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let id = TagPose {
            tag_id: 1,
            pose: RigidTransform::new(
                RotationMatrix::identity(),
                Point3::ORIGIN,
                frame("board"),
                frame("camera"),
            )
            .unwrap(),
        };
        let c = board_corners_camera_frame(&model, &id).unwrap();
        let mut got: Vec<[f64; 3]> = c.points().iter().map(|p| p.to_array()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            got,
            vec![
                [-0.25, -0.25, 0.0],
                [-0.25, 0.25, 0.0],
                [0.25, -0.25, 0.0],
                [0.25, 0.25, 0.0]
            ]
        );

        let shifted = TagPose {
            tag_id: 1,
            pose: RigidTransform::new(
                RotationMatrix::identity(),
                Point3::new(0.0, 0.0, 2.0),
                frame("board"),
                frame("camera"),
            )
            .unwrap(),
        };
        let c2 = board_corners_camera_frame(&model, &shifted).unwrap();
        assert!(c2
            .points()
            .iter()
            .all(|p| p.z == 2.0 && p.x.abs() == 0.25 && p.y.abs() == 0.25));

        let tilted = RigidTransform::new(
            RotationMatrix::about_y(std::f64::consts::FRAC_PI_4),
            Point3::new(0.0, 0.0, 2.0),
            frame("board"),
            frame("camera"),
        )
        .unwrap();
        let c3 = board_corners_camera_frame(
            &model,
            &TagPose {
                tag_id: 1,
                pose: tilted.clone(),
            },
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for p in c3.points() {
            // hand-applied Ry(45): x' = (x) cos45, z' = -x sin45 + 2
            let hits = model.outer_corners().iter().any(|q| {
                (p.x - q.x * s).abs() < 1e-12
                    && (p.y - q.y).abs() < 1e-12
                    && (p.z - (2.0 - q.x * s)).abs() < 1e-12
            });
            assert!(hits, "{p:?}");
        }
    }

    #[test]
    fn diamond_corners_are_ordered_top_left_bottom_right() {
        // Board rotated 45 degrees about the optical axis, 2 m ahead.
        let model = BoardModel::solid(0.5, 0.5).unwrap();
        let pose = RigidTransform::new(
            RotationMatrix::about_z(std::f64::consts::FRAC_PI_4),
            Point3::new(0.0, 0.0, 2.0),
            frame("board"),
            frame("camera"),
        )
        .unwrap();
        let c = board_corners_camera_frame(&model, &TagPose { tag_id: 0, pose }).unwrap();
        let p = c.points();
        // image up is -y, image left is -x
        assert!(p[0].y < -0.3);
        assert!(p[1].x < -0.3);
        assert!(p[2].y > 0.3);
        assert!(p[3].x > 0.3);
    }

    #[test]
    fn hollow_board_corner_distances() {
        let model = BoardModel::hollow(
            0.6,
            0.4,
            Cutout {
                width: 0.2,
                height: 0.1,
                offset: [0.05, 0.0],
            },
        )
        .unwrap();
        let pose = RigidTransform::new(
            RotationMatrix::from_axis_angle(Vector3::new(0.2, 0.3, 1.0), 0.9).unwrap(),
            Point3::new(0.1, -0.2, 2.0),
            frame("board"),
            frame("camera"),
        )
        .unwrap();
        let c = board_corners_camera_frame(&model, &TagPose { tag_id: 0, pose }).unwrap();
        assert_eq!(c.len(), 8);
        let mut flat: Vec<Point3> = model.outer_corners().to_vec();
        flat.extend(model.cutout_corners().unwrap());
        // pairwise distances are preserved as a multiset
        let dists = |pts: &[Point3]| {
            let mut d: Vec<f64> = Vec::new();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    d.push(pts[i].distance(&pts[j]));
                }
            }
            d.sort_by(f64::total_cmp);
            d
        };
        for (a, b) in dists(c.points()).iter().zip(dists(&flat)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
