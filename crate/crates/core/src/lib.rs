//! LiDAR-camera extrinsic calibration from known point correspondences.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`geometry`]: frame-tagged points, rotations, quaternions and rigid transforms.
//! - [`registration`]: Kabsch alignment, the ICP baseline, multi-run averaging.
//! - [`extraction`]: board corners from sparse LiDAR rings (RANSAC lines and
//!   closest-approach intersections).
//! - [`camera`]: board corners from tag poses, pinhole projection, PnP.
//! - [`simulator`]: synthetic scenes with exact ground truth.
//! - [`fusion`]: numeric checks for fused clouds.
//! - [`io`]: PCD, CSV and JSON formats.

pub mod board;
pub mod camera;
pub mod error;
pub mod extraction;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod registration;
pub mod simulator;
pub mod spatial;

pub use board::{BoardModel, Contour, Cutout, EdgeId, EdgeLabel, ViewBasis, CAMERA_UP, LIDAR_UP};
pub use camera::{
    backprojection_rmse, board_corners_camera_frame, pnp_ransac, pnp_solve, project,
    CameraIntrinsics, Correspondence2D3D, PnpOptions, PnpRansacParams, Point2, TagPose,
};
pub use error::{Error, Result};
pub use extraction::{
    cluster_edges, clusters_from_labels, corner_from_edges, extract_board, ransac_fit_line,
    shortest_connecting_segment, ClusterParams, EdgeCluster, EdgeLine, ExtractParams,
    ExtractedBoard, Line3, LineFit, LineSegment3, RansacLineParams,
};
pub use fusion::{fuse, fusion_report, FusionParams, FusionReport, RangeBin};
pub use geometry::{
    EulerAnglesXYZ, FrameId, Point3, PointCloud, RigidTransform, RotationMatrix, UnitQuaternion,
};
pub use registration::{
    average_quaternions, average_runs, icp_solve, kabsch_solve, mean_offset, registration_rmse,
    running_average, AveragedExtrinsics, CalibrationResult, CorrespondenceSet, Diagnostics,
    IcpParams, Method,
};
pub use simulator::{
    run_end_to_end, simulate_lidar_scan, simulate_tag_observation, EndToEndReport, Estimate,
    LidarModel, PipelineParams, PlacedBoard, PointLabel, ScenePlacement, SimulatedScan,
    StandardScene, TagNoise, TagObservation,
};
