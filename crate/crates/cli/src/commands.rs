//! The five pipeline commands. Each reads its configuration, writes its
//! outputs under `out` and returns what it wrote.

use std::path::{Path, PathBuf};

use calib_core::io::{
    self, BoardDoc, GroundTruthDoc, LabelRow, PlacedBoardDoc, TagPosesDoc, TransformDoc,
    DEFAULT_PCD_FRAME, SCHEMA_VERSION,
};
use calib_core::{
    average_runs, board_corners_camera_frame, cluster_edges, clusters_from_labels, extract_board,
    fuse, kabsch_solve, pnp_ransac, pnp_solve, running_average, simulate_lidar_scan,
    simulate_tag_observation, CalibrationResult, ClusterParams, Correspondence2D3D,
    CorrespondenceSet, Diagnostics, EdgeCluster, Error, ExtractParams, FrameId, FusionParams,
    FusionReport, Method, PnpOptions, PnpRansacParams, PointCloud, RansacLineParams,
    RigidTransform,
};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    load, resolve, BoardEntry, Calibrate2d3dConfig, Calibrate3d3dConfig, ChainConfig,
    ExtractionConfig, FuseConfig, PnpMethod, Roi, ScanEntry, SimulateConfig,
};
use crate::CliError;

pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const RESULT: &str = "result.json";
pub const RUNNING_AVERAGE: &str = "running_average.csv";
pub const CHAIN: &str = "chain.json";
pub const MERGED: &str = "merged.pcd";
pub const FUSION_REPORT: &str = "fusion_report.json";
pub const CALIBRATE_3D3D_CONFIG: &str = "calibrate_3d3d.json";
pub const CALIBRATE_2D3D_CONFIG: &str = "calibrate_2d3d.json";

/// Padding of the region-of-interest boxes written by `simulate`, metres.
const ROI_PAD: f64 = 0.03;

pub fn scan_file(k: usize) -> String {
    format!("scan_{k:03}.pcd")
}

pub fn labels_file(k: usize) -> String {
    format!("labels_{k:03}.csv")
}

pub fn tags_file(k: usize) -> String {
    format!("tags_{k:03}.json")
}

pub fn pixels_file(k: usize) -> String {
    format!("pixels_{k:03}.csv")
}

pub fn corners_file(k: usize) -> String {
    format!("corners_{k:03}.csv")
}

/// Attaches a stage description to core errors.
trait Stage<T> {
    fn stage(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Stage<T> for calib_core::Result<T> {
    fn stage(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage {
            context: context(),
            source,
        })
    }
}

struct Writer {
    out: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        io::write_text(&path, contents)?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

fn frame(name: &str) -> Result<FrameId, CliError> {
    Ok(FrameId::new(name)?)
}

/// Adopts `expected` for clouds without a frame comment.
fn check_cloud_frame(cloud: PointCloud, expected: &FrameId) -> Result<PointCloud, CliError> {
    if cloud.frame().as_str() == DEFAULT_PCD_FRAME {
        Ok(cloud.with_frame(expected.clone()))
    } else if cloud.frame() != expected {
        Err(Error::FrameMismatch {
            expected: expected.to_string(),
            found: cloud.frame().to_string(),
        }
        .into())
    } else {
        Ok(cloud)
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub truth: RigidTransform,
    pub written: Vec<PathBuf>,
}

/// Writes a synthetic dataset: per scan a PCD, its edge labels, the tag
/// poses and exact-corner pixel correspondences; plus the ground truth and
/// ready-to-run calibration configurations.
pub fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<SimulateOutput, CliError> {
    let (cfg, _) = load::<SimulateConfig>(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    if cfg.scans == 0 {
        return Err(CliError::Config("scans must be at least 1".into()));
    }
    let scene = cfg.scene.scene(seed)?.build().stage(|| "scene".into())?;
    let camera = cfg.camera.intrinsics()?;
    cfg.lidar.model(0)?;
    let truth = scene.truth();
    let mut w = Writer::new(out);

    // Independent noise streams per scan.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..cfg.scans {
        let lidar_seed: u64 = rng.random();
        let tag_seed: u64 = rng.random();
        let scan = simulate_lidar_scan(&scene, &cfg.lidar.model(lidar_seed)?)
            .stage(|| format!("scan {k}: lidar simulation"))?;
        let tags = simulate_tag_observation(&scene, &camera, &cfg.tag_noise.noise(tag_seed))
            .stage(|| format!("scan {k}: tag simulation"))?;
        w.write(&scan_file(k), &io::write_pcd(&scan.cloud))?;
        let rows: Vec<LabelRow> = scan
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabelRow {
                point_index: i,
                board: l.board,
                edge: l.edge,
            })
            .collect();
        w.write(&labels_file(k), &io::write_edge_labels(&rows))?;
        w.write(
            &tags_file(k),
            &io::to_json(&TagPosesDoc::from_tags(scene.camera_frame(), &tags.tags)),
        )?;
        let to_lidar = truth.inverse();
        let mut corr = Vec::new();
        for (b, board) in scene.boards().iter().enumerate() {
            let corners = board_corners_camera_frame(&board.model, &tags.exact[b])?;
            for (p, px) in corners.points().iter().zip(&tags.pixels[b]) {
                corr.push(Correspondence2D3D {
                    point: to_lidar.transform_point(p),
                    pixel: *px,
                });
            }
        }
        w.write(&pixels_file(k), &io::write_correspondences_2d3d(&corr))?;
    }

    let truth_doc = GroundTruthDoc {
        schema_version: SCHEMA_VERSION,
        extrinsics: TransformDoc::from_transform(&truth),
        lidar_pose: TransformDoc::from_transform(scene.lidar_pose()),
        camera_pose: TransformDoc::from_transform(scene.camera_pose()),
        boards: scene
            .boards()
            .iter()
            .map(|b| PlacedBoardDoc {
                tag_id: b.tag_id,
                board: BoardDoc::from_model(&b.model),
                pose: TransformDoc::from_transform(&b.pose),
            })
            .collect(),
    };
    w.write(GROUND_TRUTH, &io::to_json(&truth_doc))?;

    let calibrate = Calibrate3d3dConfig {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        lidar_frame: scene.lidar_frame().to_string(),
        camera_frame: scene.camera_frame().to_string(),
        boards: scene
            .boards()
            .iter()
            .enumerate()
            .map(|(b, placed)| BoardEntry {
                tag_id: placed.tag_id,
                board: BoardDoc::from_model(&placed.model),
                roi: Some(Roi::around_board(
                    &placed.model,
                    &scene.board_to_lidar(b),
                    ROI_PAD,
                )),
            })
            .collect(),
        scans: (0..cfg.scans)
            .map(|k| ScanEntry {
                cloud: scan_file(k).into(),
                tags: tags_file(k).into(),
                labels: None,
            })
            .collect(),
        extraction: ExtractionConfig::default(),
    };
    w.write(CALIBRATE_3D3D_CONFIG, &io::to_json(&calibrate))?;
    let calibrate_2d3d = Calibrate2d3dConfig {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        lidar_frame: scene.lidar_frame().to_string(),
        camera_frame: scene.camera_frame().to_string(),
        camera: cfg.camera.clone(),
        correspondences: pixels_file(0).into(),
        method: PnpMethod::Pnp,
        ransac: Default::default(),
        remove: Vec::new(),
    };
    w.write(CALIBRATE_2D3D_CONFIG, &io::to_json(&calibrate_2d3d))?;
    Ok(SimulateOutput {
        truth,
        written: w.written,
    })
}

#[derive(Debug, Clone)]
pub struct CalibrateOutput {
    /// Final estimate: the single run, or the average over runs.
    pub result: CalibrationResult,
    pub runs: Vec<CalibrationResult>,
    pub written: Vec<PathBuf>,
}

fn extract_params(cfg: &ExtractionConfig, seed: u64) -> ExtractParams {
    ExtractParams {
        ransac: RansacLineParams {
            threshold: cfg.ransac_threshold_m,
            iterations: cfg.ransac_iterations,
            seed,
            ..RansacLineParams::default()
        },
        reject_threshold: cfg.reject_threshold_m,
        ..ExtractParams::default()
    }
}

/// Edge clusters of board `b` in `cloud`, from labels or automatic
/// clustering inside the board's region of interest.
fn board_clusters(
    cloud: &PointCloud,
    labels: Option<&[LabelRow]>,
    entry: &BoardEntry,
    b: usize,
    board_count: usize,
    cfg: &ExtractionConfig,
) -> calib_core::Result<Vec<EdgeCluster>> {
    let model = entry.board.to_model()?;
    if let Some(rows) = labels {
        let edges: Vec<_> = rows
            .iter()
            .filter(|r| r.board == b)
            .filter_map(|r| r.edge.map(|e| (r.point_index, e)))
            .collect();
        return clusters_from_labels(cloud, &edges);
    }
    let subset = match &entry.roi {
        Some(roi) => {
            let inside = roi.contains_fn()?;
            let idx: Vec<usize> = (0..cloud.len())
                .filter(|&i| inside(&cloud.points()[i]))
                .collect();
            cloud.select(&idx)
        }
        None if board_count == 1 => cloud.clone(),
        None => {
            return Err(Error::Invalid {
                what: "configuration",
                reason: format!("board {b} needs a roi or the scan needs labels"),
            })
        }
    };
    let params = ClusterParams {
        gap_factor: cfg.gap_factor,
        ..ClusterParams::default()
    };
    cluster_edges(&subset, &model, &params)
}

/// Extracts corners per scan, pairs them with tag-derived camera corners,
/// solves each scan and averages across scans.
pub fn calibrate_3d3d(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
) -> Result<CalibrateOutput, CliError> {
    let (cfg, base) = load::<Calibrate3d3dConfig>(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    if cfg.boards.is_empty() || cfg.scans.is_empty() {
        return Err(CliError::Config(
            "at least one board and one scan are required".into(),
        ));
    }
    let lidar = frame(&cfg.lidar_frame)?;
    let camera = frame(&cfg.camera_frame)?;
    let params = extract_params(&cfg.extraction, seed);
    let mut w = Writer::new(out);
    let mut runs = Vec::with_capacity(cfg.scans.len());
    let mut all_pairs = Vec::new();

    for (k, scan) in cfg.scans.iter().enumerate() {
        let cloud = io::read_pcd(&resolve(&base, &scan.cloud))?;
        let cloud = check_cloud_frame(cloud, &lidar)?;
        let tags_doc: TagPosesDoc = io::read_json(&resolve(&base, &scan.tags))?;
        if tags_doc.camera_frame != cfg.camera_frame {
            return Err(Error::FrameMismatch {
                expected: cfg.camera_frame.clone(),
                found: tags_doc.camera_frame,
            }
            .into());
        }
        let tags = tags_doc.to_tags()?;
        let labels = match &scan.labels {
            Some(p) => Some(io::read_edge_labels(&resolve(&base, p))?),
            None => None,
        };

        let mut lidar_corners = Vec::new();
        let mut camera_corners = Vec::new();
        for (b, entry) in cfg.boards.iter().enumerate() {
            let model = entry.board.to_model()?;
            let tag = tags
                .iter()
                .find(|t| t.tag_id == entry.tag_id)
                .ok_or_else(|| {
                    CliError::Config(format!("scan {k}: no pose for tag {}", entry.tag_id))
                })?;
            let clusters = board_clusters(
                &cloud,
                labels.as_deref(),
                entry,
                b,
                cfg.boards.len(),
                &cfg.extraction,
            )
            .stage(|| format!("scan {k}, board {b}: edge clustering"))?;
            let extracted = extract_board(&clusters, &model, &params)
                .stage(|| format!("scan {k}, board {b}: corner extraction"))?;
            if extracted.low_confidence {
                warn!("scan {k}, board {b}: an edge was fitted from fewer than 3 points");
            }
            lidar_corners.extend(extracted.corners);
            camera_corners.extend(board_corners_camera_frame(&model, tag)?.into_points());
        }
        let set = CorrespondenceSet::new(
            PointCloud::new(lidar.clone(), lidar_corners)?,
            PointCloud::new(camera.clone(), camera_corners)?,
        )?;
        w.write(&corners_file(k), &io::write_correspondences_3d3d(&set))?;
        let run = kabsch_solve(&set).stage(|| format!("scan {k}: kabsch"))?;
        info!("scan {k}: rmse {:.6} m", run.rmse);
        all_pairs.extend(set.pairs().map(|(p, q)| (*p, *q)));
        runs.push(run);
    }

    let result = if runs.len() == 1 {
        runs[0].clone()
    } else {
        let transform = average_runs(&runs)?.transform();
        let union = CorrespondenceSet::from_pairs(lidar.clone(), camera.clone(), all_pairs)?;
        let residuals: Vec<f64> = union
            .pairs()
            .map(|(p, q)| transform.transform_point(p).distance(q))
            .collect();
        let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
        CalibrationResult {
            transform,
            rmse,
            residuals,
            method: Method::Kabsch,
            diagnostics: Diagnostics {
                reflection_corrected: runs.iter().any(|r| r.diagnostics.reflection_corrected),
                near_degenerate: runs.iter().any(|r| r.diagnostics.near_degenerate),
                converged: true,
                ..Diagnostics::default()
            },
        }
    };
    w.write(RESULT, &io::write_result(&result, &runs))?;
    w.write(
        RUNNING_AVERAGE,
        &io::write_running_average(&running_average(&runs)?),
    )?;
    Ok(CalibrateOutput {
        result,
        runs,
        written: w.written,
    })
}

/// PnP on the configured correspondences after dropping the listed rows.
pub fn calibrate_2d3d(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
) -> Result<CalibrateOutput, CliError> {
    let (cfg, base) = load::<Calibrate2d3dConfig>(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let intr = cfg.camera.intrinsics()?;
    let corr = io::read_correspondences_2d3d(&resolve(&base, &cfg.correspondences))?;
    if let Some(bad) = cfg.remove.iter().find(|&&i| i >= corr.len()) {
        return Err(CliError::Config(format!(
            "remove index {bad} is outside the {} correspondences",
            corr.len()
        )));
    }
    let kept: Vec<Correspondence2D3D> = corr
        .iter()
        .enumerate()
        .filter(|(i, _)| !cfg.remove.contains(i))
        .map(|(_, c)| *c)
        .collect();
    info!(
        "{} correspondences, {} removed",
        corr.len(),
        corr.len() - kept.len()
    );
    let options = PnpOptions {
        from_frame: frame(&cfg.lidar_frame)?,
        to_frame: frame(&cfg.camera_frame)?,
        ..PnpOptions::default()
    };
    let result = match cfg.method {
        PnpMethod::Pnp => pnp_solve(&intr, &kept, &options).stage(|| "pnp".into())?,
        PnpMethod::PnpRansac => {
            let params = PnpRansacParams {
                subset_size: cfg.ransac.subset_size,
                iterations: cfg.ransac.iterations,
                inlier_threshold_px: cfg.ransac.inlier_threshold_px,
                seed,
            };
            pnp_ransac(&intr, &kept, &params, &options).stage(|| "pnp-ransac".into())?
        }
    };
    let mut w = Writer::new(out);
    w.write(RESULT, &io::write_result(&result, &[]))?;
    Ok(CalibrateOutput {
        runs: vec![result.clone()],
        result,
        written: w.written,
    })
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub transform: RigidTransform,
    pub written: Vec<PathBuf>,
}

/// Camera 2 to camera 1 through the shared LiDAR: `T_L->C1 * inv(T_L->C2)`.
pub fn chain_transforms(
    l_to_c1: &RigidTransform,
    l_to_c2: &RigidTransform,
) -> calib_core::Result<RigidTransform> {
    if l_to_c1.from_frame() != l_to_c2.from_frame() {
        return Err(Error::FrameMismatch {
            expected: l_to_c1.from_frame().to_string(),
            found: l_to_c2.from_frame().to_string(),
        });
    }
    l_to_c1.compose(&l_to_c2.inverse())
}

pub fn chain(config: &Path, _seed: Option<u64>, out: &Path) -> Result<ChainOutput, CliError> {
    let (cfg, base) = load::<ChainConfig>(config)?;
    let c1 = io::read_any_transform(&resolve(&base, &cfg.lidar_to_c1))?;
    let c2 = io::read_any_transform(&resolve(&base, &cfg.lidar_to_c2))?;
    let transform = chain_transforms(&c1, &c2)?;
    let mut w = Writer::new(out);
    w.write(CHAIN, &io::write_transform(&transform))?;
    Ok(ChainOutput {
        transform,
        written: w.written,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeBinDoc {
    pub lo_m: f64,
    pub hi_m: f64,
    pub count: usize,
    pub mean_distance_m: Option<f64>,
}

/// Fusion metrics as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionReportDoc {
    pub schema_version: u32,
    pub hallucination_radius_m: f64,
    pub structure_radius_m: f64,
    pub overlap_count: usize,
    pub mean_distance_m: f64,
    pub median_distance_m: f64,
    pub duplication_score: f64,
    pub range_bins: Vec<RangeBinDoc>,
}

impl FusionReportDoc {
    fn new(r: &FusionReport, p: &FusionParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            hallucination_radius_m: p.hallucination_radius,
            structure_radius_m: p.structure_radius,
            overlap_count: r.overlap_count,
            mean_distance_m: r.mean_distance,
            median_distance_m: r.median_distance,
            duplication_score: r.duplication_score,
            range_bins: r
                .range_bins
                .iter()
                .map(|b| RangeBinDoc {
                    lo_m: b.lo,
                    hi_m: b.hi,
                    count: b.count,
                    mean_distance_m: b.mean_distance,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuseOutput {
    pub report: FusionReport,
    pub merged_points: usize,
    pub written: Vec<PathBuf>,
}

pub fn fuse_clouds(config: &Path, _seed: Option<u64>, out: &Path) -> Result<FuseOutput, CliError> {
    let (cfg, base) = load::<FuseConfig>(config)?;
    let transform = io::read_any_transform(&resolve(&base, &cfg.transform))?;
    let a = check_cloud_frame(
        io::read_pcd(&resolve(&base, &cfg.cloud_a))?,
        transform.from_frame(),
    )?;
    let b = check_cloud_frame(
        io::read_pcd(&resolve(&base, &cfg.cloud_b))?,
        transform.to_frame(),
    )?;
    let params = FusionParams {
        hallucination_radius: cfg.hallucination_radius_m,
        structure_radius: cfg.structure_radius_m,
        bins: cfg.bins,
    };
    let (merged, report) = fuse(&a, &b, &transform, &params)?;
    let mut w = Writer::new(out);
    w.write(MERGED, &io::write_pcd(&merged))?;
    w.write(
        FUSION_REPORT,
        &io::to_json(&FusionReportDoc::new(&report, &params)),
    )?;
    Ok(FuseOutput {
        report,
        merged_points: merged.len(),
        written: w.written,
    })
}
