//! Synthetic calibration scenes with exact ground truth.
//!
//! A scene holds planar boards and two sensors, all posed as world-to-local
//! transforms. The LiDAR is a spinning multi-ring scanner: every (ring,
//! azimuth) ray is cast against the boards, the nearest hit on board
//! material is kept, and Gaussian range noise is added along the ray. The
//! camera side yields noisy tag poses and pixel observations of the corners.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::board::{BoardModel, Contour, EdgeId, EdgeLabel, ViewBasis, LIDAR_UP};
use crate::camera::{
    board_corners_camera_frame, pnp_solve, project, CameraIntrinsics, Correspondence2D3D,
    PnpOptions, Point2, TagPose,
};
use crate::error::{Error, Result};
use crate::extraction::{
    cluster_edges, extract_board, ClusterParams, ExtractParams, ExtractedBoard,
};
use crate::geometry::{FrameId, Point3, PointCloud, RigidTransform, RotationMatrix};
use crate::registration::{
    icp_solve, kabsch_solve, CalibrationResult, CorrespondenceSet, IcpParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LidarModel {
    /// Elevation of each ring, degrees, strictly increasing.
    pub vertical_angles: Vec<f64>,
    /// Degrees between consecutive firings of a ring.
    pub azimuth_step: f64,
    /// Standard deviation of the range noise, metres.
    pub range_noise_sigma: f64,
    /// Returns closer than this to a board boundary get an edge label, metres.
    pub edge_band: f64,
    /// Also emit the exact returns where each ring crosses a board boundary.
    pub boundary_returns: bool,
    pub seed: u64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            vertical_angles: (0..16).map(|i| -15.0 + 2.0 * i as f64).collect(),
            azimuth_step: 0.2,
            range_noise_sigma: 0.003,
            edge_band: 0.01,
            boundary_returns: false,
            seed: 0,
        }
    }
}

impl LidarModel {
    pub fn num_rings(&self) -> usize {
        self.vertical_angles.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertical_angles.is_empty() || self.vertical_angles.len() > u16::MAX as usize {
            return Err(Error::invalid("lidar model", "ring count out of range"));
        }
        if !self
            .vertical_angles
            .iter()
            .all(|a| a.is_finite() && a.abs() < 90.0)
        {
            return Err(Error::invalid(
                "lidar model",
                "ring elevations must lie in (-90, 90)",
            ));
        }
        if self.vertical_angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "lidar model",
                "ring elevations must be strictly increasing",
            ));
        }
        if !(self.azimuth_step.is_finite() && self.azimuth_step > 0.0 && self.azimuth_step <= 360.0)
        {
            return Err(Error::invalid(
                "lidar model",
                "azimuth step must be in (0, 360]",
            ));
        }
        if !(self.range_noise_sigma.is_finite() && self.range_noise_sigma >= 0.0) {
            return Err(Error::invalid(
                "lidar model",
                "range noise must be non-negative",
            ));
        }
        if !(self.edge_band.is_finite() && self.edge_band >= 0.0) {
            return Err(Error::invalid(
                "lidar model",
                "edge band must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedBoard {
    pub model: BoardModel,
    /// World to board frame.
    pub pose: RigidTransform,
    pub tag_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePlacement {
    boards: Vec<PlacedBoard>,
    lidar_pose: RigidTransform,
    camera_pose: RigidTransform,
}

impl ScenePlacement {
    /// All poses map from one shared world frame.
    pub fn new(
        boards: Vec<PlacedBoard>,
        lidar_pose: RigidTransform,
        camera_pose: RigidTransform,
    ) -> Result<Self> {
        let world = lidar_pose.from_frame();
        if camera_pose.from_frame() != world {
            return Err(Error::frame_mismatch(world, camera_pose.from_frame()));
        }
        if lidar_pose.to_frame() == camera_pose.to_frame() {
            return Err(Error::invalid("scene", "sensor frames must differ"));
        }
        for b in &boards {
            b.model.validate()?;
            if b.pose.from_frame() != world {
                return Err(Error::frame_mismatch(world, b.pose.from_frame()));
            }
        }
        Ok(Self {
            boards,
            lidar_pose,
            camera_pose,
        })
    }

    pub fn boards(&self) -> &[PlacedBoard] {
        &self.boards
    }

    pub fn lidar_pose(&self) -> &RigidTransform {
        &self.lidar_pose
    }

    pub fn camera_pose(&self) -> &RigidTransform {
        &self.camera_pose
    }

    pub fn lidar_frame(&self) -> &FrameId {
        self.lidar_pose.to_frame()
    }

    pub fn camera_frame(&self) -> &FrameId {
        self.camera_pose.to_frame()
    }

    /// Ground-truth LiDAR-to-camera extrinsics.
    pub fn truth(&self) -> RigidTransform {
        self.camera_pose
            .compose(&self.lidar_pose.inverse())
            .expect("poses share the world frame")
    }

    pub fn board_to_lidar(&self, k: usize) -> RigidTransform {
        self.lidar_pose
            .compose(&self.boards[k].pose.inverse())
            .expect("poses share the world frame")
    }

    pub fn board_to_camera(&self, k: usize) -> RigidTransform {
        self.camera_pose
            .compose(&self.boards[k].pose.inverse())
            .expect("poses share the world frame")
    }
}

/// Ground truth for one LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointLabel {
    pub board: usize,
    /// `None` for returns from the board interior.
    pub edge: Option<EdgeLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScan {
    pub cloud: PointCloud,
    pub labels: Vec<PointLabel>,
}

impl SimulatedScan {
    /// Returns of board `k`, rings kept.
    pub fn board_points(&self, k: usize) -> PointCloud {
        let idx: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.labels[i].board == k)
            .collect();
        self.cloud.select(&idx)
    }
}

/// Per-board ray-casting data in the LiDAR frame.
struct BoardCaster {
    model: BoardModel,
    to_board: RigidTransform,
    origin: Vector3<f64>,
    normal: Vector3<f64>,
    /// Contour, corners in board frame, edge names by rectangle side.
    contours: Vec<(Contour, [Point3; 4], [EdgeId; 4])>,
}

impl BoardCaster {
    fn new(model: &BoardModel, board_to_lidar: &RigidTransform) -> Result<Self> {
        let normal = board_to_lidar.rotation().rotate(&Vector3::z());
        let mut rects = vec![(Contour::Outer, model.outer_corners())];
        if let Some(c) = model.cutout_corners() {
            rects.push((Contour::Inner, c));
        }
        let mut contours = Vec::new();
        for (contour, rect) in rects {
            let lidar: Vec<Point3> = rect
                .iter()
                .map(|p| board_to_lidar.transform_point(p))
                .collect();
            let centre = Point3::centroid(&lidar).expect("four corners");
            let names = match ViewBasis::from_normal(
                centre.coords(),
                normal,
                &Vector3::from(LIDAR_UP),
                &Point3::ORIGIN,
            ) {
                Ok(basis) => std::array::from_fn(|k| {
                    let (l, u) = basis.project(&((lidar[k] + lidar[(k + 1) % 4]) * 0.5));
                    EdgeId::from_sides(u > 0.0, l > 0.0)
                }),
                // board seen exactly edge-on from above or below
                Err(_) => [
                    EdgeId::TopRight,
                    EdgeId::TopLeft,
                    EdgeId::BottomLeft,
                    EdgeId::BottomRight,
                ],
            };
            contours.push((contour, rect, names));
        }
        Ok(Self {
            model: *model,
            to_board: board_to_lidar.inverse(),
            origin: board_to_lidar.translation().coords(),
            normal,
            contours,
        })
    }

    /// Range along the unit ray `d` to the board material, if hit.
    fn hit(&self, d: &Vector3<f64>) -> Option<f64> {
        let den = self.normal.dot(d);
        if den.abs() < 1e-12 {
            return None;
        }
        let s = self.normal.dot(&self.origin) / den;
        if s <= 0.0 {
            return None;
        }
        let q = self.to_board.transform_point(&(d * s).into());
        self.model.contains(&q).then_some(s)
    }

    fn label(&self, p: &Point3, band: f64) -> Option<EdgeLabel> {
        let q = self.to_board.transform_point(p);
        let q = Point3::new(q.x, q.y, 0.0);
        let mut best: Option<(f64, EdgeLabel)> = None;
        for (contour, rect, names) in &self.contours {
            for k in 0..4 {
                let d = segment_distance(&q, &rect[k], &rect[(k + 1) % 4]);
                if d <= band && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, EdgeLabel::new(*contour, names[k])));
                }
            }
        }
        best.map(|(_, l)| l)
    }
}

fn segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b.coords() - a.coords();
    let t = ((p.coords() - a.coords()).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    p.distance(&(a.coords() + ab * t).into())
}

fn ray(elevation: f64, azimuth: f64) -> Vector3<f64> {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vector3::new(ce * ca, ce * sa, se)
}

fn nearest_hit(casters: &[BoardCaster], d: &Vector3<f64>) -> Option<(usize, f64)> {
    casters
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.hit(d).map(|s| (k, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// One multi-ring sweep of the scene. Points are ring-major, azimuth-minor,
/// starting behind the sensor; each sweep draws a random azimuth phase.
/// Labels are computed from the noiseless hit positions.
pub fn simulate_lidar_scan(scene: &ScenePlacement, model: &LidarModel) -> Result<SimulatedScan> {
    model.validate()?;
    let casters: Vec<BoardCaster> = (0..scene.boards.len())
        .map(|k| BoardCaster::new(&scene.boards[k].model, &scene.board_to_lidar(k)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let noise = Normal::new(0.0, model.range_noise_sigma).expect("validated sigma");
    let step = model.azimuth_step.to_radians();
    let samples = (360.0 / model.azimuth_step).round().max(1.0) as usize;
    let phase = rng.random_range(0.0..step);
    let start = -std::f64::consts::PI + phase;

    let mut points = Vec::new();
    let mut rings = Vec::new();
    let mut labels = Vec::new();
    for (ring, elevation) in model.vertical_angles.iter().enumerate() {
        let elevation = elevation.to_radians();
        let status = |az: f64| nearest_hit(&casters, &ray(elevation, az));
        let mut emit = |az: f64, board: usize, range: f64, rng: &mut ChaCha8Rng| {
            let d = ray(elevation, az);
            let exact: Point3 = (d * range).into();
            let noisy: Point3 = (d * (range + noise.sample(rng))).into();
            points.push(noisy);
            rings.push(ring as u16);
            labels.push(PointLabel {
                board,
                edge: casters[board].label(&exact, model.edge_band),
            });
        };
        let mut prev: Option<(f64, Option<(usize, f64)>)> = None;
        for i in 0..samples {
            let az = start + step * i as f64;
            let here = status(az);
            if model.boundary_returns {
                if let Some((prev_az, before)) = prev {
                    if before.map(|h| h.0) != here.map(|h| h.0) {
                        let which = before.map(|h| h.0);
                        let (mut lo, mut hi) = (prev_az, az);
                        for _ in 0..200 {
                            let mid = 0.5 * (lo + hi);
                            if mid <= lo || mid >= hi {
                                break;
                            }
                            if status(mid).map(|h| h.0) == which {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        if let Some((k, s)) = status(lo).filter(|h| Some(h.0) == which) {
                            emit(lo, k, s, &mut rng);
                        }
                        if let Some((k, s)) = status(hi).filter(|h| Some(h.0) != which) {
                            emit(hi, k, s, &mut rng);
                        }
                    }
                }
            }
            if let Some((k, s)) = here {
                emit(az, k, s, &mut rng);
            }
            prev = Some((az, here));
        }
    }
    let cloud = PointCloud::with_rings(
        scene.lidar_frame().clone(),
        points,
        rings,
        model.num_rings() as u16,
    )?;
    Ok(SimulatedScan { cloud, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagNoise {
    /// Per-axis rotation perturbation, degrees.
    pub pose_rot_sigma_deg: f64,
    /// Per-axis translation perturbation, metres.
    pub pose_trans_sigma_m: f64,
    pub pixel_sigma: f64,
    pub seed: u64,
}

impl TagNoise {
    pub fn none() -> Self {
        Self {
            pose_rot_sigma_deg: 0.0,
            pose_trans_sigma_m: 0.0,
            pixel_sigma: 0.0,
            seed: 0,
        }
    }
}

impl Default for TagNoise {
    fn default() -> Self {
        Self {
            pose_rot_sigma_deg: 0.2,
            pose_trans_sigma_m: 0.003,
            pixel_sigma: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagObservation {
    /// Perturbed board-to-camera poses, one per board.
    pub tags: Vec<TagPose>,
    /// Exact poses.
    pub exact: Vec<TagPose>,
    /// Noisy pixels of each board's corners, canonical order.
    pub pixels: Vec<Vec<Point2>>,
}

fn gaussian(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma"))
}

/// Tag poses and corner pixels as a fiducial detector would report them.
pub fn simulate_tag_observation(
    scene: &ScenePlacement,
    camera: &CameraIntrinsics,
    noise: &TagNoise,
) -> Result<TagObservation> {
    for (what, v) in [
        ("rotation noise", noise.pose_rot_sigma_deg),
        ("translation noise", noise.pose_trans_sigma_m),
        ("pixel noise", noise.pixel_sigma),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(
                "tag noise",
                format!("{what} must be non-negative"),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let rot = gaussian(noise.pose_rot_sigma_deg.to_radians());
    let trans = gaussian(noise.pose_trans_sigma_m);
    let pix = gaussian(noise.pixel_sigma);
    let draw3 = |dist: &Option<Normal<f64>>, rng: &mut ChaCha8Rng| match dist {
        Some(n) => Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng)),
        None => Vector3::zeros(),
    };
    let identity = RigidTransform::identity(scene.camera_frame().clone());

    let mut out = TagObservation {
        tags: Vec::new(),
        exact: Vec::new(),
        pixels: Vec::new(),
    };
    for (k, board) in scene.boards.iter().enumerate() {
        let exact = scene.board_to_camera(k);
        let centre = exact.transform_point(&board.model.center()).coords();
        if centre.z <= 0.0 {
            return Err(Error::BehindCamera { depth: centre.z });
        }
        let normal = exact.rotation().rotate(&Vector3::z());
        if normal.dot(&centre) >= 0.0 {
            return Err(Error::invalid(
                "scene",
                format!("board {k} does not face the camera"),
            ));
        }
        let exact_tag = TagPose {
            tag_id: board.tag_id,
            pose: exact.clone(),
        };
        let corners = board_corners_camera_frame(&board.model, &exact_tag)?;
        let mut pixels = Vec::with_capacity(corners.len());
        for c in corners.points() {
            let mut px = project(camera, &identity, c)?;
            if let Some(n) = &pix {
                px.u += n.sample(&mut rng);
                px.v += n.sample(&mut rng);
            }
            pixels.push(px);
        }
        let w = draw3(&rot, &mut rng);
        let dt = draw3(&trans, &mut rng);
        let dr = match w.norm() {
            a if a > 0.0 => RotationMatrix::from_axis_angle(w, a)?,
            _ => RotationMatrix::identity(),
        };
        let noisy = RigidTransform::new(
            dr * *exact.rotation(),
            (exact.translation().coords() + dt).into(),
            exact.from_frame().clone(),
            exact.to_frame().clone(),
        )?;
        out.tags.push(TagPose {
            tag_id: board.tag_id,
            pose: noisy,
        });
        out.exact.push(exact_tag);
        out.pixels.push(pixels);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineParams {
    pub cluster: ClusterParams,
    pub extract: ExtractParams,
    /// Run the ICP baseline on the unpaired corner sets.
    pub icp: Option<IcpParams>,
    /// Run PnP on LiDAR corners and observed pixels.
    pub pnp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub result: CalibrationResult,
    pub rotation_error_deg: f64,
    pub translation_error_m: f64,
}

impl Estimate {
    fn new(result: CalibrationResult, truth: &RigidTransform) -> Self {
        Self {
            rotation_error_deg: result.transform.rotation_error(truth).to_degrees(),
            translation_error_m: result.transform.translation_error(truth),
            result,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEndReport {
    pub truth: RigidTransform,
    pub kabsch: Estimate,
    pub icp: Option<Estimate>,
    pub pnp: Option<Estimate>,
    pub boards: Vec<ExtractedBoard>,
    /// Paired corners, LiDAR side then camera side.
    pub correspondences: CorrespondenceSet,
}

/// Scan, extract, pair and solve, then score against the scene's truth.
pub fn run_end_to_end(
    scene: &ScenePlacement,
    lidar: &LidarModel,
    camera: &CameraIntrinsics,
    noise: &TagNoise,
    params: &PipelineParams,
) -> Result<EndToEndReport> {
    let scan = simulate_lidar_scan(scene, lidar)?;
    let tags = simulate_tag_observation(scene, camera, noise)?;
    let mut boards = Vec::with_capacity(scene.boards.len());
    let mut lidar_corners = Vec::new();
    let mut camera_corners = Vec::new();
    let mut pixels = Vec::new();
    for (k, board) in scene.boards.iter().enumerate() {
        let pts = scan.board_points(k);
        let clusters = cluster_edges(&pts, &board.model, &params.cluster)?;
        let extracted = extract_board(&clusters, &board.model, &params.extract)?;
        lidar_corners.extend(&extracted.corners);
        camera_corners
            .extend(board_corners_camera_frame(&board.model, &tags.tags[k])?.into_points());
        pixels.extend(&tags.pixels[k]);
        boards.push(extracted);
    }
    let correspondences = CorrespondenceSet::new(
        PointCloud::new(scene.lidar_frame().clone(), lidar_corners)?,
        PointCloud::new(scene.camera_frame().clone(), camera_corners)?,
    )?;
    let truth = scene.truth();
    let kabsch = Estimate::new(kabsch_solve(&correspondences)?, &truth);
    let icp = match &params.icp {
        Some(p) => Some(Estimate::new(
            icp_solve(correspondences.source(), correspondences.target(), p)?,
            &truth,
        )),
        None => None,
    };
    let pnp = if params.pnp {
        let corr: Vec<Correspondence2D3D> = correspondences
            .source()
            .points()
            .iter()
            .zip(&pixels)
            .map(|(p, px)| Correspondence2D3D {
                point: *p,
                pixel: *px,
            })
            .collect();
        let options = PnpOptions {
            from_frame: scene.lidar_frame().clone(),
            to_frame: scene.camera_frame().clone(),
            ..PnpOptions::default()
        };
        Some(Estimate::new(pnp_solve(camera, &corr, &options)?, &truth))
    } else {
        None
    };
    Ok(EndToEndReport {
        truth,
        kabsch,
        icp,
        pnp,
        boards,
        correspondences,
    })
}

/// Generator for diamond-mounted boards spread in front of a LiDAR with a
/// nearby camera.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardScene {
    pub boards: Vec<BoardModel>,
    /// Distance from the LiDAR to each board centre, metres.
    pub distance: f64,
    /// Boards are spread over `[-spread, spread]` azimuth, degrees.
    pub spread_deg: f64,
    /// In-plane rotation of each board, degrees.
    pub tilt_deg: f64,
    /// Random pose perturbations are scaled by this factor; 0 gives a
    /// regular layout.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for StandardScene {
    fn default() -> Self {
        Self {
            boards: vec![BoardModel::solid(0.6, 0.6).expect("valid board"); 3],
            distance: 2.0,
            spread_deg: 25.0,
            tilt_deg: 45.0,
            jitter: 1.0,
            seed: 0,
        }
    }
}

/// Camera optical axes expressed in a LiDAR frame: x right, y down, z forward.
pub fn optical_from_lidar() -> RotationMatrix {
    RotationMatrix::from_rows([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        .expect("permutation with unit determinant")
}

impl StandardScene {
    pub fn build(&self) -> Result<ScenePlacement> {
        if self.boards.is_empty() {
            return Err(Error::EmptyInput("scene boards"));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(Error::invalid("scene", "distance must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let j = self.jitter;
        let mut uniform = |half: f64| {
            if half > 0.0 {
                rng.random_range(-half..half)
            } else {
                0.0
            }
        };
        let world = FrameId::new("world")?;
        let lidar = FrameId::new("lidar")?;
        let camera = FrameId::new("camera")?;

        // LiDAR 1 m above the world origin, arbitrary heading.
        let yaw = uniform(std::f64::consts::PI * j.min(1.0));
        let lidar_to_world = RigidTransform::new(
            RotationMatrix::about_z(yaw),
            Point3::new(0.0, 0.0, 1.0),
            lidar.clone(),
            world.clone(),
        )?;
        let lidar_pose = lidar_to_world.inverse();

        let small = RotationMatrix::about_x(uniform(5f64.to_radians() * j))
            * RotationMatrix::about_y(uniform(5f64.to_radians() * j))
            * RotationMatrix::about_z(uniform(5f64.to_radians() * j));
        let extrinsics = RigidTransform::new(
            small * optical_from_lidar(),
            Point3::new(uniform(0.3 * j), uniform(0.3 * j), uniform(0.3 * j)),
            lidar.clone(),
            camera.clone(),
        )?;
        let camera_pose = extrinsics.compose(&lidar_pose)?;

        let n = self.boards.len();
        let mut boards = Vec::with_capacity(n);
        for (k, model) in self.boards.iter().enumerate() {
            model.validate()?;
            let az = if n == 1 {
                0.0
            } else {
                -self.spread_deg + 2.0 * self.spread_deg * k as f64 / (n - 1) as f64
            };
            let az = (az + uniform(3.0 * j)).to_radians();
            let el = uniform(3.0 * j).to_radians();
            let range = self.distance + uniform(0.2 * j);
            let dir = ray(el, az);
            let centre = dir * range;

            // Face the sensor, then perturb the facing and the in-plane tilt.
            let face = RotationMatrix::about_z(uniform(15f64.to_radians() * j))
                * RotationMatrix::about_y(uniform(15f64.to_radians() * j));
            let z = face.rotate(&-dir);
            let up = Vector3::from(LIDAR_UP);
            let y0 = (up - z * up.dot(&z)).normalize();
            let x0 = y0.cross(&z);
            let tilt = (self.tilt_deg + uniform(5.0 * j)).to_radians();
            let upright =
                RotationMatrix::from_matrix(nalgebra::Matrix3::from_columns(&[x0, y0, z]))?;
            let r = upright * RotationMatrix::about_z(tilt);
            let offset = Vector3::new(model.tag_center_offset[0], model.tag_center_offset[1], 0.0);
            let origin = centre + r.rotate(&offset);
            let board_frame = FrameId::new(format!("board{k}"))?;
            let board_to_lidar =
                RigidTransform::new(r, origin.into(), board_frame.clone(), lidar.clone())?;
            let board_to_world = lidar_to_world.compose(&board_to_lidar)?;
            boards.push(PlacedBoard {
                model: *model,
                pose: board_to_world.inverse(),
                tag_id: k as u32,
            });
        }
        ScenePlacement::new(boards, lidar_pose, camera_pose)
    }
}

/// A 640x480 pinhole camera with a 500 px focal length.
pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0.0).expect("valid intrinsics")
}
