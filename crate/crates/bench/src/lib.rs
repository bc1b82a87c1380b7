//! Seeded inputs for the criterion benches.

use calib_core::simulator::default_camera;
use calib_core::{
    board_corners_camera_frame, simulate_lidar_scan, simulate_tag_observation, BoardModel,
    CameraIntrinsics, Correspondence2D3D, CorrespondenceSet, FrameId, LidarModel, Point3,
    PointCloud, RigidTransform, RotationMatrix, StandardScene, TagNoise,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame(name: &str) -> FrameId {
    FrameId::new(name).expect("nonempty")
}

fn truth() -> RigidTransform {
    RigidTransform::new(
        RotationMatrix::about_z(0.3) * RotationMatrix::about_x(-0.2),
        Point3::new(0.05, -0.1, 0.2),
        frame("lidar"),
        frame("camera"),
    )
    .expect("proper rotation")
}

/// `n` random pairs related by a fixed transform.
pub fn correspondences(n: usize, seed: u64) -> CorrespondenceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = truth();
    let pairs: Vec<(Point3, Point3)> = (0..n)
        .map(|_| {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(1.0..3.0),
            );
            (p, t.transform_point(&p))
        })
        .collect();
    CorrespondenceSet::from_pairs(frame("lidar"), frame("camera"), pairs).expect("nonempty")
}

/// Dense samples of three box faces and a slightly moved copy.
pub fn icp_clouds(n: usize, seed: u64) -> (PointCloud, PointCloud) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point3> = (0..n)
        .map(|i| {
            let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            match i % 3 {
                0 => Point3::new(a, b, 0.0),
                1 => Point3::new(a, 0.0, b),
                _ => Point3::new(0.0, a, b * 0.6),
            }
        })
        .collect();
    let moved = RigidTransform::new(
        RotationMatrix::about_z(0.05),
        Point3::new(0.02, -0.01, 0.03),
        frame("lidar"),
        frame("camera"),
    )
    .expect("proper rotation");
    let source = PointCloud::new(frame("lidar"), points).expect("finite");
    let target = moved.apply(&source).expect("matching frame");
    (source, target)
}

/// Noisy samples of a line with a share of uniform outliers.
pub fn line_points(n: usize, outlier_share: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.random_bool(outlier_share) {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            } else {
                let s = rng.random_range(-0.5..0.5);
                Point3::new(
                    s + rng.random_range(-0.002..0.002),
                    0.5 * s + rng.random_range(-0.002..0.002),
                    -0.2 * s,
                )
            }
        })
        .collect()
}

/// Pixel observations of the corners of three boards.
pub fn pnp_problem(seed: u64) -> (CameraIntrinsics, Vec<Correspondence2D3D>) {
    let scene = StandardScene {
        seed,
        ..StandardScene::default()
    }
    .build()
    .expect("valid scene");
    let camera = default_camera();
    let tags = simulate_tag_observation(
        &scene,
        &camera,
        &TagNoise {
            seed,
            ..TagNoise::default()
        },
    )
    .expect("boards in view");
    let to_lidar = scene.truth().inverse();
    let mut corr = Vec::new();
    for (b, placed) in scene.boards().iter().enumerate() {
        let corners =
            board_corners_camera_frame(&placed.model, &tags.exact[b]).expect("valid board");
        for (p, px) in corners.points().iter().zip(&tags.pixels[b]) {
            corr.push(Correspondence2D3D {
                point: to_lidar.transform_point(p),
                pixel: *px,
            });
        }
    }
    (camera, corr)
}

/// Returns of one board in a default scan.
pub fn board_scan(seed: u64) -> (BoardModel, PointCloud) {
    let model = BoardModel::solid(0.6, 0.6).expect("valid board");
    let scene = StandardScene {
        boards: vec![model],
        seed,
        ..StandardScene::default()
    }
    .build()
    .expect("valid scene");
    let scan = simulate_lidar_scan(
        &scene,
        &LidarModel {
            seed,
            ..LidarModel::default()
        },
    )
    .expect("valid lidar");
    (model, scan.board_points(0))
}
