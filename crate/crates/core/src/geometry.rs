//! Frame-tagged rigid-body geometry.
//!
//! Every cloud and transform carries the frame it lives in, and arithmetic
//! across frames is checked: applying a `lidar -> camera` transform to a cloud
//! tagged `camera` is an error rather than a silently wrong answer.
//!
//! Rotations are stored as matrices and quaternions use the `w >= 0`
//! hemisphere. Euler angles are fixed-axis XYZ, `R = Rz(yaw) * Ry(pitch) *
//! Rx(roll)`, reported in degrees.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Vector3, SVD};

use crate::error::{Error, Result};

/// Orthonormality residual accepted from external matrices before they are
/// re-projected onto SO(3).
const ROTATION_ACCEPT_TOL: f64 = 1e-6;
/// Residual below which an accepted matrix is kept bit-for-bit.
const ROTATION_EXACT_TOL: f64 = 1e-12;
/// Gimbal-lock band around |pitch| = 90 degrees.
const GIMBAL_TOL_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Validating constructor; rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Self::new(x, y, z);
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::NonFinite(format!("point ({x}, {y}, {z})")))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let d = *self - *other;
        d.dot(&d)
    }

    /// Arithmetic mean, `None` for an empty slice.
    pub fn centroid(points: &[Point3]) -> Option<Point3> {
        if points.is_empty() {
            return None;
        }
        let sum = points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords());
        Some((sum / points.len() as f64).into())
    }
}

impl From<Vector3<f64>> for Point3 {
    fn from(v: Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Name of a coordinate frame such as `lidar` or `cam_left_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameId(String);

impl FrameId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::EmptyFrameId);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered point set in a named frame, optionally carrying the LiDAR ring
/// (laser channel) each return came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    frame: FrameId,
    points: Vec<Point3>,
    rings: Option<Vec<u16>>,
    num_rings: u16,
}

impl PointCloud {
    pub fn new(frame: FrameId, points: Vec<Point3>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            frame,
            points,
            rings: None,
            num_rings: 0,
        })
    }

    pub fn with_rings(
        frame: FrameId,
        points: Vec<Point3>,
        rings: Vec<u16>,
        num_rings: u16,
    ) -> Result<Self> {
        check_finite(&points)?;
        if rings.len() != points.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: rings.len(),
            });
        }
        if let Some(bad) = rings.iter().find(|&&r| r >= num_rings) {
            return Err(Error::invalid(
                "ring index",
                format!("{bad} outside [0, {num_rings})"),
            ));
        }
        Ok(Self {
            frame,
            points,
            rings: Some(rings),
            num_rings,
        })
    }

    pub fn empty(frame: FrameId) -> Self {
        Self {
            frame,
            points: Vec::new(),
            rings: None,
            num_rings: 0,
        }
    }

    pub fn frame(&self) -> &FrameId {
        &self.frame
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn rings(&self) -> Option<&[u16]> {
        self.rings.as_deref()
    }

    pub fn num_rings(&self) -> u16 {
        self.num_rings
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        Point3::centroid(&self.points)
    }

    /// New cloud with the selected points (and rings) in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            frame: self.frame.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            rings: self
                .rings
                .as_ref()
                .map(|r| indices.iter().map(|&i| r[i]).collect()),
            num_rings: self.num_rings,
        }
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn with_frame(mut self, frame: FrameId) -> Self {
        self.frame = frame;
        self
    }
}

fn check_finite(points: &[Point3]) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("point {i}"))),
        None => Ok(()),
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates an arbitrary matrix. Residuals up to 1e-6 are accepted and
    /// projected back onto SO(3); reflections are rejected.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotARotation("non-finite entry".into()));
        }
        let residual = orthonormality_residual(&m);
        if residual > ROTATION_ACCEPT_TOL {
            return Err(Error::NotARotation(format!(
                "orthonormality residual {residual:.3e}"
            )));
        }
        let det = m.determinant();
        if det <= 0.0 {
            return Err(Error::NotARotation(format!("determinant {det:.6}")));
        }
        if residual <= ROTATION_EXACT_TOL {
            return Ok(Self(m));
        }
        let svd = SVD::new(m, true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        Ok(Self(u * v_t))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    /// Caller guarantees the matrix is in SO(3).
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn about_x(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues rotation about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, radians: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) || !radians.is_finite() {
            return Err(Error::invalid("axis-angle", "zero or non-finite axis"));
        }
        let k = axis / n;
        let kx = k.cross_matrix();
        let (s, c) = radians.sin_cos();
        Ok(Self(Matrix3::identity() + kx * s + kx * kx * (1.0 - c)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn rotate_point(&self, p: &Point3) -> Point3 {
        (self.0 * p.coords()).into()
    }

    /// Geodesic distance on SO(3), radians in [0, pi].
    pub fn angle_to(&self, other: &RotationMatrix) -> f64 {
        let relative = self.0 * other.0.transpose();
        let cos = ((relative.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        // acos loses precision near 0; fall back to the skew part there.
        if cos > 0.99 {
            let skew = Vector3::new(
                relative[(2, 1)] - relative[(1, 2)],
                relative[(0, 2)] - relative[(2, 0)],
                relative[(1, 0)] - relative[(0, 1)],
            );
            (0.5 * skew.norm()).asin()
        } else {
            cos.acos()
        }
    }

    pub fn to_quaternion(&self) -> UnitQuaternion {
        UnitQuaternion::from_rotation(self)
    }

    pub fn to_euler_xyz(&self) -> EulerAnglesXYZ {
        EulerAnglesXYZ::from_rotation(self)
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// Max-norm of `M^T M - I`.
pub fn orthonormality_residual(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Normalizes the given components. The sign is left as given; see
    /// [`UnitQuaternion::canonical`].
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::invalid(
                "quaternion",
                format!("norm {n} cannot be normalized"),
            ));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `[w, x, y, z]`
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn negated(&self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Representative with `w >= 0`; for `w == 0` the first nonzero vector
    /// component is made positive.
    pub fn canonical(&self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            self.negated()
        } else {
            *self
        }
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        RotationMatrix::from_matrix_unchecked(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    /// Branch-on-largest-diagonal extraction, stable for rotations near 180
    /// degrees. Result is canonical.
    pub fn from_rotation(r: &RotationMatrix) -> Self {
        let m = r.matrix();
        let trace = m.trace();
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        // A valid rotation never yields a zero quaternion.
        Self::new(w, x, y, z)
            .expect("rotation matrix produced a zero quaternion")
            .canonical()
    }

    /// Validating conversion from a raw matrix.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        Ok(Self::from_rotation(&RotationMatrix::from_matrix(m)?))
    }

    /// Rotates `v` by the Hamilton product `q v q*` without forming a matrix.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let uv = u.cross(v);
        v + uv * (2.0 * self.w) + u.cross(&uv) * 2.0
    }

    /// Rotation angle between the two, radians in [0, pi].
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        // vector part of conj(self) * other; atan2 keeps precision near 0
        let a = Vector3::new(self.x, self.y, self.z);
        let b = Vector3::new(other.x, other.y, other.z);
        let v = a * -other.w + b * self.w - a.cross(&b);
        2.0 * v.norm().atan2(self.dot(other).abs())
    }
}

/// Fixed-axis XYZ angles in degrees: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAnglesXYZ {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAnglesXYZ {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_rotation(r: &RotationMatrix) -> Self {
        let m = r.matrix();
        let cos_pitch = m[(0, 0)].hypot(m[(1, 0)]);
        let pitch = (-m[(2, 0)]).atan2(cos_pitch);
        let (roll, yaw) = if cos_pitch > 1e-12 {
            (m[(2, 1)].atan2(m[(2, 2)]), m[(1, 0)].atan2(m[(0, 0)]))
        } else {
            // roll and yaw share an axis; fold everything into yaw.
            (0.0, (-m[(0, 1)]).atan2(m[(1, 1)]))
        };
        Self {
            roll: roll.to_degrees(),
            pitch: pitch.to_degrees(),
            yaw: yaw.to_degrees(),
        }
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        RotationMatrix::about_z(self.yaw.to_radians())
            * RotationMatrix::about_y(self.pitch.to_radians())
            * RotationMatrix::about_x(self.roll.to_radians())
    }

    pub fn near_gimbal_lock(&self) -> bool {
        (90.0 - self.pitch.abs()).abs() <= GIMBAL_TOL_DEG
    }
}

/// Rigid-body transform mapping points from `from_frame` into `to_frame`:
/// `p -> R p + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: RotationMatrix,
    translation: Point3,
    from_frame: FrameId,
    to_frame: FrameId,
}

impl RigidTransform {
    pub fn new(
        rotation: RotationMatrix,
        translation: Point3,
        from_frame: FrameId,
        to_frame: FrameId,
    ) -> Result<Self> {
        if !translation.is_finite() {
            return Err(Error::NonFinite("translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
            from_frame,
            to_frame,
        })
    }

    pub fn identity(frame: FrameId) -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Point3::ORIGIN,
            from_frame: frame.clone(),
            to_frame: frame,
        }
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn translation(&self) -> Point3 {
        self.translation
    }

    pub fn from_frame(&self) -> &FrameId {
        &self.from_frame
    }

    pub fn to_frame(&self) -> &FrameId {
        &self.to_frame
    }

    /// Same rotation and translation, relabelled frames.
    pub fn with_frames(mut self, from_frame: FrameId, to_frame: FrameId) -> Self {
        self.from_frame = from_frame;
        self.to_frame = to_frame;
        self
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        (self.rotation.matrix() * p.coords() + self.translation.coords()).into()
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Result<RigidTransform> {
        if self.from_frame != other.to_frame {
            return Err(Error::frame_mismatch(&self.from_frame, &other.to_frame));
        }
        Ok(RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.transform_point(&other.translation),
            from_frame: other.from_frame.clone(),
            to_frame: self.to_frame.clone(),
        })
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -rt.rotate_point(&self.translation),
            from_frame: self.to_frame.clone(),
            to_frame: self.from_frame.clone(),
        }
    }

    /// Maps every point of a cloud tagged `from_frame`; ring channels are kept.
    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.frame != self.from_frame {
            return Err(Error::frame_mismatch(&self.from_frame, &cloud.frame));
        }
        Ok(PointCloud {
            frame: self.to_frame.clone(),
            points: cloud
                .points
                .iter()
                .map(|p| self.transform_point(p))
                .collect(),
            rings: cloud.rings.clone(),
            num_rings: cloud.num_rings,
        })
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&self.translation.coords());
        m
    }

    pub fn from_matrix4(m: &Matrix4<f64>, from_frame: FrameId, to_frame: FrameId) -> Result<Self> {
        let rotation = RotationMatrix::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        let t = m.fixed_view::<3, 1>(0, 3);
        Self::new(
            rotation,
            Point3::new(t[0], t[1], t[2]),
            from_frame,
            to_frame,
        )
    }

    /// Geodesic rotation error in radians.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_error(&self, other: &RigidTransform) -> f64 {
        self.translation.distance(&other.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn frame(name: &str) -> FrameId {
        FrameId::new(name).unwrap()
    }

    fn tf(rotation: RotationMatrix, t: [f64; 3], from: &str, to: &str) -> RigidTransform {
        RigidTransform::new(rotation, t.into(), frame(from), frame(to)).unwrap()
    }

    fn assert_mat_close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        assert!((a - b).amax() <= tol, "{a} != {b}");
    }

    #[test]
    fn empty_frame_rejected() {
        assert!(matches!(FrameId::new(""), Err(Error::EmptyFrameId)));
    }

    #[test]
    fn cloud_rejects_nonfinite_and_bad_rings() {
        let f = frame("lidar");
        assert!(PointCloud::new(f.clone(), vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::with_rings(f.clone(), vec![Point3::ORIGIN], vec![16], 16).is_err());
        assert!(PointCloud::with_rings(f, vec![Point3::ORIGIN], vec![], 16).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = tf(RotationMatrix::about_y(0.3), [1.0, -2.0, 0.5], "a", "b");
        let left = RigidTransform::identity(frame("b")).compose(&t).unwrap();
        assert_eq!(left, t);
        let round = t.compose(&t.inverse()).unwrap();
        assert_mat_close(round.rotation().matrix(), &Matrix3::identity(), 1e-12);
        assert!(round.translation().norm() <= 1e-12);
        assert_eq!(round.from_frame(), &frame("b"));
    }

    #[test]
    fn compose_hand_multiplied() {
        // [Rz90 | (1,0,0)] * [Rz90 | 0] = [Rz180 | (1,0,0)]
        let a = tf(
            RotationMatrix::about_z(FRAC_PI_2),
            [1.0, 0.0, 0.0],
            "b",
            "c",
        );
        let b = tf(
            RotationMatrix::about_z(FRAC_PI_2),
            [0.0, 0.0, 0.0],
            "a",
            "b",
        );
        let ab = a.compose(&b).unwrap();
        assert_mat_close(
            ab.rotation().matrix(),
            RotationMatrix::about_z(PI).matrix(),
            1e-12,
        );
        assert!(ab.translation().distance(&Point3::new(1.0, 0.0, 0.0)) <= 1e-12);
        assert_eq!(ab.from_frame(), &frame("a"));
        assert_eq!(ab.to_frame(), &frame("c"));
    }

    #[test]
    fn compose_rejects_unchained_frames() {
        let a = tf(RotationMatrix::identity(), [0.0; 3], "a", "b");
        assert!(matches!(a.compose(&a), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn invert_cases() {
        let id = RigidTransform::identity(frame("a"));
        assert_eq!(id.inverse(), id);

        let t = tf(RotationMatrix::identity(), [1.0, 2.0, 3.0], "a", "b");
        let inv = t.inverse();
        assert_eq!(inv.translation(), Point3::new(-1.0, -2.0, -3.0));
        assert_eq!(inv.from_frame(), &frame("b"));

        // -Rz(90)^T (1,0,0) = -(0,-1,0)
        let t = tf(
            RotationMatrix::about_z(FRAC_PI_2),
            [1.0, 0.0, 0.0],
            "a",
            "b",
        );
        let inv = t.inverse();
        assert_mat_close(
            inv.rotation().matrix(),
            RotationMatrix::about_z(-FRAC_PI_2).matrix(),
            1e-15,
        );
        assert!(inv.translation().distance(&Point3::new(0.0, 1.0, 0.0)) <= 1e-15);
    }

    #[test]
    fn apply_cases() {
        let cloud = PointCloud::with_rings(
            frame("a"),
            vec![Point3::new(1.0, 0.0, 0.0), Point3::ORIGIN],
            vec![3, 7],
            16,
        )
        .unwrap();
        let id = RigidTransform::identity(frame("a"));
        assert_eq!(id.apply(&cloud).unwrap(), cloud);

        let up = tf(RotationMatrix::identity(), [0.0, 0.0, 1.0], "a", "b");
        let moved = up.apply(&cloud).unwrap();
        assert_eq!(moved.points()[1], Point3::new(0.0, 0.0, 1.0));
        assert_eq!(moved.rings(), Some(&[3u16, 7][..]));
        assert_eq!(moved.frame(), &frame("b"));

        let rot = tf(RotationMatrix::about_z(FRAC_PI_2), [0.0; 3], "a", "b");
        let p = rot.apply(&cloud).unwrap().points()[0];
        assert!(p.distance(&Point3::new(0.0, 1.0, 0.0)) <= 1e-12);

        assert!(matches!(
            rot.apply(&moved),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn quaternion_examples() {
        let id = UnitQuaternion::identity().to_rotation();
        assert_eq!(*id.matrix(), Matrix3::identity());

        let q = UnitQuaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2).unwrap();
        assert_mat_close(
            q.to_rotation().matrix(),
            RotationMatrix::about_z(FRAC_PI_2).matrix(),
            1e-15,
        );

        // trace = -1: rotation by pi about x.
        let q = UnitQuaternion::from_rotation(&RotationMatrix::about_x(PI));
        let a = q.to_array();
        let expected = [0.0, 1.0, 0.0, 0.0];
        for (got, want) in a.iter().zip(expected) {
            assert!((got - want).abs() <= 1e-12, "{a:?}");
        }
        let axis_angle = RotationMatrix::from_axis_angle(Vector3::new(1.0, 0.0, 0.0), PI).unwrap();
        assert!(q.to_rotation().angle_to(&axis_angle) <= 1e-12);
    }

    #[test]
    fn matrix_to_quat_rejects_non_rotations() {
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            UnitQuaternion::from_matrix(reflection),
            Err(Error::NotARotation(_))
        ));
        let sheared = Matrix3::new(1.0, 1e-3, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RotationMatrix::from_matrix(sheared).is_err());
        // within the acceptance band: re-projected
        let nudged = Matrix3::new(1.0, 1e-8, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let r = RotationMatrix::from_matrix(nudged).unwrap();
        assert!(orthonormality_residual(r.matrix()) <= 1e-9);
        assert!((r.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn euler_examples() {
        let e = RotationMatrix::identity().to_euler_xyz();
        assert_eq!((e.roll, e.pitch, e.yaw), (0.0, 0.0, 0.0));

        let e = RotationMatrix::about_z(10f64.to_radians()).to_euler_xyz();
        assert!((e.yaw - 10.0).abs() <= 1e-9 && e.roll.abs() <= 1e-9 && e.pitch.abs() <= 1e-9);

        let built = EulerAnglesXYZ::new(1.6, 1.4, -1.1).to_rotation();
        let e = built.to_euler_xyz();
        assert!((e.roll - 1.6).abs() <= 1e-9);
        assert!((e.pitch - 1.4).abs() <= 1e-9);
        assert!((e.yaw + 1.1).abs() <= 1e-9);
        assert!(!e.near_gimbal_lock());
    }

    #[test]
    fn euler_gimbal_lock_flagged() {
        let r = EulerAnglesXYZ::new(0.0, 90.0, 25.0).to_rotation();
        let e = r.to_euler_xyz();
        assert!(e.near_gimbal_lock());
        assert!(e.to_rotation().angle_to(&r) <= 1e-9);
    }

    #[test]
    fn matrix4_round_trip() {
        let t = tf(RotationMatrix::about_x(0.2), [0.1, 0.2, 0.3], "a", "b");
        let back = RigidTransform::from_matrix4(&t.to_matrix4(), frame("a"), frame("b")).unwrap();
        assert_eq!(back, t);
    }
}
