//! JSON run configurations, one document type per command.
//!
//! Every document carries `schema_version` and rejects unknown keys. Lengths
//! are metres and angles degrees. Relative paths resolve against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use calib_core::io::{parse_json, BoardDoc, SCHEMA_VERSION};
use calib_core::simulator::default_camera;
use calib_core::{
    BoardModel, CameraIntrinsics, Error, LidarModel, Point3, Result, RigidTransform, StandardScene,
    TagNoise, UnitQuaternion,
};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// Reads a configuration document, returning it with the directory that
/// relative paths resolve against.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc = parse_json(&text, &path.display().to_string())?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((doc, base))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn lidar_frame() -> String {
    "lidar".into()
}

fn camera_frame() -> String {
    "camera".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let c = default_camera();
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            gamma: c.gamma,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    /// Ring elevations; a 16-ring sensor spanning -15 to 15 degrees if absent.
    pub vertical_angles_deg: Option<Vec<f64>>,
    pub azimuth_step_deg: f64,
    pub range_noise_sigma_m: f64,
    pub edge_band_m: f64,
    pub boundary_returns: bool,
}

impl Default for LidarConfig {
    fn default() -> Self {
        let m = LidarModel::default();
        Self {
            vertical_angles_deg: None,
            azimuth_step_deg: m.azimuth_step,
            range_noise_sigma_m: m.range_noise_sigma,
            edge_band_m: m.edge_band,
            boundary_returns: m.boundary_returns,
        }
    }
}

impl LidarConfig {
    pub fn model(&self, seed: u64) -> Result<LidarModel> {
        let m = LidarModel {
            vertical_angles: self
                .vertical_angles_deg
                .clone()
                .unwrap_or_else(|| LidarModel::default().vertical_angles),
            azimuth_step: self.azimuth_step_deg,
            range_noise_sigma: self.range_noise_sigma_m,
            edge_band: self.edge_band_m,
            boundary_returns: self.boundary_returns,
            seed,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagNoiseConfig {
    pub rotation_sigma_deg: f64,
    pub translation_sigma_m: f64,
    pub pixel_sigma_px: f64,
}

impl Default for TagNoiseConfig {
    fn default() -> Self {
        let n = TagNoise::default();
        Self {
            rotation_sigma_deg: n.pose_rot_sigma_deg,
            translation_sigma_m: n.pose_trans_sigma_m,
            pixel_sigma_px: n.pixel_sigma,
        }
    }
}

impl TagNoiseConfig {
    pub fn noise(&self, seed: u64) -> TagNoise {
        TagNoise {
            pose_rot_sigma_deg: self.rotation_sigma_deg,
            pose_trans_sigma_m: self.translation_sigma_m,
            pixel_sigma: self.pixel_sigma_px,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub boards: Vec<BoardDoc>,
    pub distance_m: f64,
    pub spread_deg: f64,
    pub tilt_deg: f64,
    pub jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let s = StandardScene::default();
        Self {
            boards: s.boards.iter().map(BoardDoc::from_model).collect(),
            distance_m: s.distance,
            spread_deg: s.spread_deg,
            tilt_deg: s.tilt_deg,
            jitter: s.jitter,
        }
    }
}

impl SceneConfig {
    pub fn scene(&self, seed: u64) -> Result<StandardScene> {
        Ok(StandardScene {
            boards: self
                .boards
                .iter()
                .map(BoardDoc::to_model)
                .collect::<Result<Vec<BoardModel>>>()?,
            distance: self.distance_m,
            spread_deg: self.spread_deg,
            tilt_deg: self.tilt_deg,
            jitter: self.jitter,
            seed,
        })
    }
}

/// `simulate`: one board layout observed `scans` times with fresh noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scans")]
    pub scans: usize,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub lidar: LidarConfig,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub tag_noise: TagNoiseConfig,
}

fn default_scans() -> usize {
    10
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            scans: default_scans(),
            scene: SceneConfig::default(),
            lidar: LidarConfig::default(),
            camera: CameraConfig::default(),
            tag_noise: TagNoiseConfig::default(),
        }
    }
}

/// Membership test built from a region of interest.
pub type PointFilter = Box<dyn Fn(&Point3) -> bool>;

/// Region of interest selecting one board's returns, in the LiDAR frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Roi {
    Aabb(AabbRoi),
    Oriented(OrientedRoi),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AabbRoi {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Box with the given half extents along the axes of `rotation_wxyz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientedRoi {
    pub center: [f64; 3],
    pub rotation_wxyz: [f64; 4],
    pub half_extents: [f64; 3],
}

impl Roi {
    /// Returns a membership test for points.
    pub fn contains_fn(&self) -> Result<PointFilter> {
        match self.clone() {
            Roi::Aabb(b) => Ok(Box::new(move |p: &Point3| {
                let a = p.to_array();
                (0..3).all(|k| a[k] >= b.min[k] && a[k] <= b.max[k])
            })),
            Roi::Oriented(o) => {
                let [w, x, y, z] = o.rotation_wxyz;
                let r = UnitQuaternion::new(w, x, y, z)?.to_rotation().transpose();
                let c = Point3::from(o.center);
                Ok(Box::new(move |p: &Point3| {
                    let local = r.rotate_point(&(*p - c)).to_array();
                    (0..3).all(|k| local[k].abs() <= o.half_extents[k])
                }))
            }
        }
    }

    /// Board-aligned box around a board, padded by `pad` on every side.
    pub fn around_board(model: &BoardModel, board_to_lidar: &RigidTransform, pad: f64) -> Self {
        let q = board_to_lidar.rotation().to_quaternion();
        Roi::Oriented(OrientedRoi {
            center: board_to_lidar.transform_point(&model.center()).to_array(),
            rotation_wxyz: q.to_array(),
            half_extents: [
                0.5 * model.outer_width + pad,
                0.5 * model.outer_height + pad,
                pad,
            ],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardEntry {
    pub tag_id: u32,
    pub board: BoardDoc,
    /// Needed unless every scan has a label file or there is one board.
    #[serde(default)]
    pub roi: Option<Roi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanEntry {
    pub cloud: PathBuf,
    pub tags: PathBuf,
    /// Manual edge labels; replaces automatic clustering for this scan.
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub ransac_threshold_m: f64,
    pub ransac_iterations: usize,
    pub reject_threshold_m: f64,
    pub gap_factor: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            ransac_threshold_m: 0.01,
            ransac_iterations: 1000,
            reject_threshold_m: 0.05,
            gap_factor: 4.0,
        }
    }
}

/// `calibrate-3d3d`: corners from LiDAR scans paired with corners from tag
/// poses, solved per scan and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibrate3d3dConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "lidar_frame")]
    pub lidar_frame: String,
    #[serde(default = "camera_frame")]
    pub camera_frame: String,
    pub boards: Vec<BoardEntry>,
    pub scans: Vec<ScanEntry>,
    #[serde(default)]
    pub extraction: ExtractionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PnpMethod {
    Pnp,
    PnpRansac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    pub iterations: usize,
    pub inlier_threshold_px: f64,
    pub subset_size: Option<usize>,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            inlier_threshold_px: 2.0,
            subset_size: None,
        }
    }
}

/// `calibrate-2d3d`: PnP on LiDAR points and their pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibrate2d3dConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "lidar_frame")]
    pub lidar_frame: String,
    #[serde(default = "camera_frame")]
    pub camera_frame: String,
    pub camera: CameraConfig,
    pub correspondences: PathBuf,
    #[serde(default = "pnp_method")]
    pub method: PnpMethod,
    #[serde(default)]
    pub ransac: RansacConfig,
    /// Zero-based data rows to drop before solving.
    #[serde(default)]
    pub remove: Vec<usize>,
}

fn pnp_method() -> PnpMethod {
    PnpMethod::Pnp
}

/// `chain`: two LiDAR-to-camera results combined into camera 2 to camera 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub schema_version: u32,
    pub lidar_to_c1: PathBuf,
    pub lidar_to_c2: PathBuf,
}

/// `fuse`: cloud A moved into cloud B's frame and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseConfig {
    pub schema_version: u32,
    pub cloud_a: PathBuf,
    pub cloud_b: PathBuf,
    /// Result or transform document mapping A's frame to B's.
    pub transform: PathBuf,
    #[serde(default = "hallucination_radius")]
    pub hallucination_radius_m: f64,
    #[serde(default = "structure_radius")]
    pub structure_radius_m: f64,
    #[serde(default = "bins")]
    pub bins: usize,
}

fn hallucination_radius() -> f64 {
    0.05
}

fn structure_radius() -> f64 {
    0.5
}

fn bins() -> usize {
    10
}
