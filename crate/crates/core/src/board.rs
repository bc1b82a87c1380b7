//! Calibration board geometry and the corner ordering shared by both sensors.
//!
//! A board is a rectangle, optionally with a rectangular cutout (a hollow
//! marker, 8 corners instead of 4). Its frame is centred on the fiducial tag:
//! x and y run along the rectangle edges, z is the board normal. Boards are
//! mounted rotated roughly 45 degrees in-plane so every edge crosses several
//! LiDAR rings; seen from a sensor they look like a diamond with a unique top
//! corner.
//!
//! Corners are ordered the same way in every frame: start at the corner
//! highest along the sensor's up vector, then go counter-clockwise as seen
//! from the sensor (top, left, bottom, right). Outer corners come first, then
//! cutout corners. The LiDAR and camera corner lists therefore pair by index.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Up direction of a LiDAR frame (x forward, y left, z up).
pub const LIDAR_UP: [f64; 3] = [0.0, 0.0, 1.0];
/// Up direction of a camera optical frame (x right, y down, z forward).
pub const CAMERA_UP: [f64; 3] = [0.0, -1.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutout {
    pub width: f64,
    pub height: f64,
    /// Cutout centre relative to the board centre, metres.
    pub offset: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardModel {
    pub outer_width: f64,
    pub outer_height: f64,
    pub cutout: Option<Cutout>,
    /// Tag centre relative to the board centre, metres.
    pub tag_center_offset: [f64; 2],
}

impl BoardModel {
    pub fn new(
        outer_width: f64,
        outer_height: f64,
        cutout: Option<Cutout>,
        tag_center_offset: [f64; 2],
    ) -> Result<Self> {
        let model = Self {
            outer_width,
            outer_height,
            cutout,
            tag_center_offset,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn solid(width: f64, height: f64) -> Result<Self> {
        Self::new(width, height, None, [0.0, 0.0])
    }

    pub fn hollow(width: f64, height: f64, cutout: Cutout) -> Result<Self> {
        Self::new(width, height, Some(cutout), [0.0, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.outer_width) || !positive(self.outer_height) {
            return Err(Error::invalid(
                "board model",
                "outer dimensions must be positive",
            ));
        }
        if !self.tag_center_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("board model", "tag offset must be finite"));
        }
        if let Some(c) = &self.cutout {
            if !positive(c.width) || !positive(c.height) || !c.offset.iter().all(|v| v.is_finite())
            {
                return Err(Error::invalid(
                    "board model",
                    "cutout dimensions must be positive",
                ));
            }
            let inside = c.offset[0].abs() + c.width / 2.0 < self.outer_width / 2.0
                && c.offset[1].abs() + c.height / 2.0 < self.outer_height / 2.0;
            if !inside {
                return Err(Error::invalid(
                    "board model",
                    "cutout must lie strictly inside the outer rectangle",
                ));
            }
        }
        Ok(())
    }

    pub fn is_hollow(&self) -> bool {
        self.cutout.is_some()
    }

    pub fn corner_count(&self) -> usize {
        if self.is_hollow() {
            8
        } else {
            4
        }
    }

    /// Board centre in the tag-centred board frame.
    pub fn center(&self) -> Point3 {
        Point3::new(-self.tag_center_offset[0], -self.tag_center_offset[1], 0.0)
    }

    /// Outer rectangle corners in the board frame, counter-clockwise about +z
    /// starting at (+x, +y).
    pub fn outer_corners(&self) -> [Point3; 4] {
        rectangle(self.center(), self.outer_width, self.outer_height)
    }

    pub fn cutout_corners(&self) -> Option<[Point3; 4]> {
        self.cutout.map(|c| {
            let centre = self.center() + Point3::new(c.offset[0], c.offset[1], 0.0);
            rectangle(centre, c.width, c.height)
        })
    }

    /// Whether a board-frame point (z ignored) lies on the board material.
    pub fn contains(&self, p: &Point3) -> bool {
        let c = self.center();
        let (x, y) = (p.x - c.x, p.y - c.y);
        if x.abs() > self.outer_width / 2.0 || y.abs() > self.outer_height / 2.0 {
            return false;
        }
        match &self.cutout {
            Some(cut) => {
                let (cx, cy) = (x - cut.offset[0], y - cut.offset[1]);
                !(cx.abs() < cut.width / 2.0 && cy.abs() < cut.height / 2.0)
            }
            None => true,
        }
    }
}

fn rectangle(centre: Point3, width: f64, height: f64) -> [Point3; 4] {
    let (hw, hh) = (width / 2.0, height / 2.0);
    [
        centre + Point3::new(hw, hh, 0.0),
        centre + Point3::new(-hw, hh, 0.0),
        centre + Point3::new(-hw, -hh, 0.0),
        centre + Point3::new(hw, -hh, 0.0),
    ]
}

/// Edge of a diamond-mounted rectangle, named as seen from the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeId {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl EdgeId {
    pub const ALL: [EdgeId; 4] = [
        EdgeId::TopLeft,
        EdgeId::TopRight,
        EdgeId::BottomLeft,
        EdgeId::BottomRight,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeId::TopLeft => "top-left",
            EdgeId::TopRight => "top-right",
            EdgeId::BottomLeft => "bottom-left",
            EdgeId::BottomRight => "bottom-right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EdgeId::ALL.into_iter().find(|e| e.as_str() == s)
    }

    /// Edge from its midpoint direction relative to the board centre.
    pub fn from_sides(above: bool, left: bool) -> Self {
        match (above, left) {
            (true, true) => EdgeId::TopLeft,
            (true, false) => EdgeId::TopRight,
            (false, true) => EdgeId::BottomLeft,
            (false, false) => EdgeId::BottomRight,
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which rectangle of a (possibly hollow) board an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Contour {
    Outer,
    Inner,
}

/// Edge of a specific contour, written `top-left` or `inner-top-left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeLabel {
    pub contour: Contour,
    pub edge: EdgeId,
}

impl EdgeLabel {
    pub fn new(contour: Contour, edge: EdgeId) -> Self {
        Self { contour, edge }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.strip_prefix("inner-") {
            Some(rest) => EdgeId::parse(rest).map(|e| Self::new(Contour::Inner, e)),
            None => EdgeId::parse(s).map(|e| Self::new(Contour::Outer, e)),
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.contour == Contour::Inner {
            f.write_str("inner-")?;
        }
        f.write_str(self.edge.as_str())
    }
}

/// Orthonormal in-plane basis of a board as seen from a sensor.
#[derive(Debug, Clone, Copy)]
pub struct ViewBasis {
    pub origin: Vector3<f64>,
    /// Board normal, pointing towards the viewpoint.
    pub normal: Vector3<f64>,
    /// Sensor up projected into the board plane.
    pub up: Vector3<f64>,
    /// `normal x up`: the viewer's left.
    pub left: Vector3<f64>,
}

impl ViewBasis {
    /// Best-fit plane through `points`, oriented towards `viewpoint`.
    pub fn fit(points: &[Point3], up: &Vector3<f64>, viewpoint: &Point3) -> Result<Self> {
        let origin = Point3::centroid(points)
            .ok_or(Error::EmptyInput("board points"))?
            .coords();
        let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
            let d = p.coords() - origin;
            acc + d * d.transpose()
        });
        let eig = SymmetricEigen::new(scatter);
        let smallest = eig.eigenvalues.imin();
        let normal = eig.eigenvectors.column(smallest).into_owned();
        Self::from_normal(origin, normal, up, viewpoint)
    }

    pub fn from_normal(
        origin: Vector3<f64>,
        normal: Vector3<f64>,
        up: &Vector3<f64>,
        viewpoint: &Point3,
    ) -> Result<Self> {
        let mut normal = normal.normalize();
        if normal.dot(&(viewpoint.coords() - origin)) < 0.0 {
            normal = -normal;
        }
        let up_in_plane = up - normal * up.dot(&normal);
        if up_in_plane.norm() < 1e-9 {
            return Err(Error::DegenerateGeometry(
                "board plane is perpendicular to the sensor up axis".into(),
            ));
        }
        let up = up_in_plane.normalize();
        let left = normal.cross(&up);
        Ok(Self {
            origin,
            normal,
            up,
            left,
        })
    }

    /// (left, up) coordinates of a point in the plane.
    pub fn project(&self, p: &Point3) -> (f64, f64) {
        let d = p.coords() - self.origin;
        (d.dot(&self.left), d.dot(&self.up))
    }
}

/// Permutation putting four (or any number of) coplanar corners into
/// canonical order: topmost along `up` first, then counter-clockwise as seen
/// from `viewpoint`.
pub fn canonical_order(
    corners: &[Point3],
    up: &Vector3<f64>,
    viewpoint: &Point3,
) -> Result<Vec<usize>> {
    let basis = ViewBasis::fit(corners, up, viewpoint)?;
    Ok(order_in_basis(corners, &basis))
}

pub(crate) fn order_in_basis(corners: &[Point3], basis: &ViewBasis) -> Vec<usize> {
    let coords: Vec<(f64, f64)> = corners.iter().map(|p| basis.project(p)).collect();
    let start = (0..coords.len())
        .max_by(|&a, &b| {
            coords[a]
                .1
                .total_cmp(&coords[b].1)
                .then(coords[a].0.total_cmp(&coords[b].0))
        })
        .unwrap_or(0);
    let angle = |i: usize| coords[i].0.atan2(coords[i].1);
    let a0 = angle(start);
    let tau = std::f64::consts::TAU;
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = (angle(a) - a0).rem_euclid(tau);
        let rb = (angle(b) - a0).rem_euclid(tau);
        let ra = if a == start { 0.0 } else { ra };
        let rb = if b == start { 0.0 } else { rb };
        ra.total_cmp(&rb)
    });
    order
}
