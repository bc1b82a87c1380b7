use calib_core::camera::board_corners_in_frame;
use calib_core::*;
use nalgebra::{Matrix3, Matrix4, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame(name: &str) -> FrameId {
    FrameId::new(name).unwrap()
}

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn point() -> impl Strategy<Value = Point3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn quaternion() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(w, x, y, z)| {
            w * w + x * x + y * y + z * z > 0.01
        })
        .prop_map(|(w, x, y, z)| UnitQuaternion::new(w, x, y, z).unwrap())
}

fn transform(from: &'static str, to: &'static str) -> impl Strategy<Value = RigidTransform> {
    (quaternion(), point()).prop_map(move |(q, t)| {
        RigidTransform::new(q.to_rotation(), t, frame(from), frame(to)).unwrap()
    })
}

fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max()
}

/// Points that are not close to collinear.
fn spread_points(min: usize, max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(point(), min..=max).prop_filter("non-degenerate", |pts| {
        let c = Point3::centroid(pts).unwrap().coords();
        let s = pts.iter().fold(Matrix3::zeros(), |acc, p| {
            let d = p.coords() - c;
            acc + d * d.transpose()
        });
        let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1] > 1e-2 * ev[2]
    })
}

fn set_from(t: &RigidTransform, pts: &[Point3]) -> CorrespondenceSet {
    CorrespondenceSet::from_pairs(
        t.from_frame().clone(),
        t.to_frame().clone(),
        pts.iter()
            .map(|p| (*p, t.transform_point(p)))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

fn objective(c: &CorrespondenceSet, r: &Matrix3<f64>, t: &Vector3<f64>) -> f64 {
    c.pairs()
        .map(|(p, q)| (r * p.coords() + t - q.coords()).norm_squared())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inverse_undoes_transform(t in transform("a", "b"), pts in prop::collection::vec(point(), 1..20)) {
        let cloud = PointCloud::new(frame("a"), pts).unwrap();
        let back = t.inverse().apply(&t.apply(&cloud).unwrap()).unwrap();
        prop_assert_eq!(back.frame(), cloud.frame());
        for (p, q) in cloud.points().iter().zip(back.points()) {
            prop_assert!((p.coords() - q.coords()).abs().max() <= 1e-9);
        }
    }

    #[test]
    fn compose_is_associative(a in transform("c", "d"), b in transform("b", "c"), c in transform("a", "b")) {
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(left.from_frame(), right.from_frame());
        prop_assert!(max_abs_diff(&left.to_matrix4(), &right.to_matrix4()) <= 1e-9);
    }

    #[test]
    fn quaternion_and_matrix_rotate_alike(q in quaternion(), p in point()) {
        let by_matrix = q.to_rotation().rotate(&p.coords());
        let by_quaternion = q.rotate(&p.coords());
        prop_assert!((by_matrix - by_quaternion).abs().max() <= 1e-9);
        let back = UnitQuaternion::from_rotation(&q.to_rotation());
        prop_assert!(back.angle_to(&q) <= 1e-9);
    }

    #[test]
    fn constructors_reject_reflections(q in quaternion(), axis in 0usize..3) {
        let mut m = *q.to_rotation().matrix();
        m.row_mut(axis).neg_mut();
        prop_assert!(RotationMatrix::from_matrix(m).is_err());
        let rows = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        prop_assert!(RotationMatrix::from_rows(rows).is_err());
        prop_assert!(UnitQuaternion::from_matrix(m).is_err());
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&m);
        prop_assert!(RigidTransform::from_matrix4(&h, frame("a"), frame("b")).is_err());
    }

    #[test]
    fn kabsch_recovers_and_keeps_translation_identity(t in transform("lidar", "camera"), pts in spread_points(3, 50)) {
        let r = kabsch_solve(&set_from(&t, &pts)).unwrap();
        prop_assert!(r.transform.rotation_error(&t) <= 1e-9);
        prop_assert!(r.transform.translation_error(&t) <= 1e-9);
        prop_assert!((r.transform.rotation().determinant() - 1.0).abs() <= 1e-12);

        // t = Q̄ - R P̄
        let src = Point3::centroid(&pts).unwrap();
        let dst: Vec<Point3> = pts.iter().map(|p| t.transform_point(p)).collect();
        let dst = Point3::centroid(&dst).unwrap();
        let expected = dst.coords() - r.transform.rotation().rotate(&src.coords());
        prop_assert!((r.transform.translation().coords() - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
    }

    #[test]
    fn kabsch_output_is_proper_for_mirrored_targets(pts in spread_points(3, 30), axis in 0usize..3) {
        let mirrored: Vec<(Point3, Point3)> = pts
            .iter()
            .map(|p| {
                let mut a = p.to_array();
                a[axis] = -a[axis];
                (*p, a.into())
            })
            .collect();
        let set = CorrespondenceSet::from_pairs(frame("a"), frame("b"), mirrored).unwrap();
        let r = kabsch_solve(&set).unwrap();
        prop_assert!((r.transform.rotation().determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn kabsch_is_left_invariant(
        t in transform("lidar", "camera"),
        g in transform("x", "x"),
        pts in spread_points(4, 20),
        noise_seed in any::<u64>(),
    ) {
        // noisy targets so the fit is not exact
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let pairs: Vec<(Point3, Point3)> = pts
            .iter()
            .map(|p| {
                let q = t.transform_point(p);
                let n = Point3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
                (*p, q + n)
            })
            .collect();
        let base = CorrespondenceSet::from_pairs(frame("lidar"), frame("camera"), pairs.clone()).unwrap();
        let moved = CorrespondenceSet::from_pairs(
            frame("lidar"),
            frame("camera"),
            pairs.iter().map(|(p, q)| (g.transform_point(p), g.transform_point(q))).collect::<Vec<_>>(),
        )
        .unwrap();
        let a = kabsch_solve(&base).unwrap().transform.to_matrix4();
        let b = kabsch_solve(&moved).unwrap().transform.to_matrix4();
        let gm = g.to_matrix4();
        let expected = gm * a * g.inverse().to_matrix4();
        prop_assert!(max_abs_diff(&b, &expected) <= 1e-9, "{}", max_abs_diff(&b, &expected));
    }

    #[test]
    fn icp_from_kabsch_never_increases_rmse(t in transform("lidar", "camera"), pts in spread_points(4, 30), noise_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let pairs: Vec<(Point3, Point3)> = pts
            .iter()
            .map(|p| {
                let n = Point3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
                (*p, t.transform_point(p) + n)
            })
            .collect();
        let set = CorrespondenceSet::from_pairs(frame("lidar"), frame("camera"), pairs).unwrap();
        let k = kabsch_solve(&set).unwrap();
        let params = IcpParams { initial_guess: Some(k.transform.clone()), ..IcpParams::default() };
        let icp = icp_solve(set.source(), set.target(), &params).unwrap();
        prop_assert!(icp.rmse <= k.rmse + 1e-12, "icp {} kabsch {}", icp.rmse, k.rmse);
    }

    #[test]
    fn averaging_is_permutation_invariant(
        base in transform("lidar", "camera"),
        perturb in prop::collection::vec((quaternion(), point()), 2..12),
        shuffle_seed in any::<u64>(),
    ) {
        let runs: Vec<CalibrationResult> = perturb
            .iter()
            .map(|(q, p)| {
                // small perturbations around a common pose
                let small = UnitQuaternion::new(1.0, 0.05 * q.x(), 0.05 * q.y(), 0.05 * q.z()).unwrap();
                let transform = RigidTransform::new(
                    small.to_rotation() * *base.rotation(),
                    base.translation() + *p * 0.01,
                    frame("lidar"),
                    frame("camera"),
                )
                .unwrap();
                CalibrationResult {
                    transform,
                    rmse: 0.0,
                    residuals: vec![],
                    method: Method::Kabsch,
                    diagnostics: Diagnostics::default(),
                }
            })
            .collect();
        let mut shuffled = runs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = average_runs(&runs).unwrap().transform();
        let b = average_runs(&shuffled).unwrap().transform();
        prop_assert!(a.rotation_error(&b) <= 1e-12);
        prop_assert!(a.translation_error(&b) <= 1e-12);
    }

    #[test]
    fn corner_is_symmetric(p1 in point(), d1 in point(), p2 in point(), d2 in point()) {
        let (Ok(l1), Ok(l2)) = (Line3::new(p1, d1.coords()), Line3::new(p2, d2.coords())) else {
            return Ok(());
        };
        match (corner_from_edges(&l1, &l2), corner_from_edges(&l2, &l1)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "asymmetric outcome {:?}", other),
        }
    }

    #[test]
    fn corner_of_exact_lines_has_no_gap(corner in point(), d1 in point(), d2 in point()) {
        let u = d1.coords();
        let v = d2.coords();
        prop_assume!(u.norm() > 0.1 && v.norm() > 0.1);
        prop_assume!(u.normalize().dot(&v.normalize()).abs() < 0.99);
        let l1 = Line3::new(corner + d1 * 0.7, u).unwrap();
        let l2 = Line3::new(corner + d2 * -0.4, v).unwrap();
        let (c, gap) = corner_from_edges(&l1, &l2).unwrap();
        prop_assert!(gap < 1e-12, "{gap}");
        prop_assert!(c.distance(&corner) < 1e-11);
    }

    #[test]
    fn ransac_line_is_rigidly_invariant(
        anchor in point(),
        dir in point(),
        g in transform("x", "x"),
        seed in any::<u64>(),
        exhaustive in any::<bool>(),
    ) {
        prop_assume!(dir.norm() > 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = dir.coords().normalize();
        let mut pts = Vec::new();
        let count = if exhaustive { 20 } else { 60 };
        for k in 0..count {
            if k % 4 == 3 {
                // outliers well off the line
                let off = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let off = off - u * off.dot(&u);
                prop_assume!(off.norm() > 0.05);
                pts.push(Point3::from(anchor.coords() + u * rng.random_range(-1.0..1.0) + off.normalize() * rng.random_range(0.05..0.5)));
            } else {
                let jitter = Vector3::new(rng.random_range(-1e-4..1e-4), rng.random_range(-1e-4..1e-4), rng.random_range(-1e-4..1e-4));
                pts.push(Point3::from(anchor.coords() + u * (-1.0 + 2.0 * k as f64 / count as f64) + jitter));
            }
        }
        let params = RansacLineParams { seed, iterations: if exhaustive { 1000 } else { 200 }, ..RansacLineParams::default() };
        let a = ransac_fit_line(&pts, &params).unwrap();
        let moved: Vec<Point3> = pts.iter().map(|p| g.transform_point(p)).collect();
        let b = ransac_fit_line(&moved, &params).unwrap();
        prop_assert_eq!(&a.inliers, &b.inliers);
        let rotated = g.rotation().rotate(&a.line.direction());
        prop_assert!(rotated.dot(&b.line.direction()).abs() >= 1.0 - 1e-9);
        prop_assert!(b.line.distance(&g.transform_point(&a.line.point())) <= 1e-9);
    }

    #[test]
    fn board_corner_distances_are_preserved(
        pose in transform("board", "camera"),
        w in 0.3..2.0f64,
        h in 0.3..2.0f64,
        cut in 0.2..0.8f64,
    ) {
        let model = BoardModel::hollow(w, h, Cutout { width: w * cut, height: h * cut, offset: [0.0, 0.0] }).unwrap();
        let cloud = board_corners_in_frame(&model, &pose, &Vector3::from(CAMERA_UP));
        prop_assume!(cloud.is_ok());
        let cloud = cloud.unwrap();
        let mut reference: Vec<Point3> = model.outer_corners().to_vec();
        reference.extend(model.cutout_corners().unwrap());
        let got = cloud.points();
        let ref_d = |a: usize, b: usize| reference[a].distance(&reference[b]);
        // each returned corner maps to a distinct model corner of the same contour
        let mut lengths_got: Vec<f64> = Vec::new();
        let mut lengths_ref: Vec<f64> = Vec::new();
        for range in [0..4usize, 4..8] {
            for i in range.clone() {
                for j in range.clone() {
                    if i < j {
                        lengths_got.push(got[i].distance(&got[j]));
                        lengths_ref.push(ref_d(i, j));
                    }
                }
            }
        }
        lengths_got.sort_by(f64::total_cmp);
        lengths_ref.sort_by(f64::total_cmp);
        for (a, b) in lengths_got.iter().zip(&lengths_ref) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kabsch_beats_random_candidates(t in transform("a", "b"), pts in spread_points(3, 6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(Point3, Point3)> = pts
            .iter()
            .map(|p| {
                let n = Point3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                (*p, t.transform_point(p) + n)
            })
            .collect();
        let set = CorrespondenceSet::from_pairs(frame("a"), frame("b"), pairs).unwrap();
        let best = kabsch_solve(&set).unwrap().transform;
        let r0 = *best.rotation().matrix();
        let t0 = best.translation().coords();
        let f0 = objective(&set, &r0, &t0);
        for k in 0..10_000 {
            let scale = if k % 2 == 0 { 0.01 } else { 0.3 };
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let dr = RotationMatrix::from_axis_angle(axis, rng.random_range(-scale..scale)).unwrap();
            let dt = Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale));
            let f = objective(&set, &(dr.matrix() * r0), &(t0 + dt));
            prop_assert!(f >= f0 - 1e-12 * (1.0 + f0), "candidate {k}: {f} < {f0}");
        }
    }

    #[test]
    fn pnp_recovers_noiseless_pose(q in quaternion(), tx in -0.5..0.5f64, ty in -0.5..0.5f64, tz in -0.5..0.5f64, seed in any::<u64>()) {
        // camera-frame points in front of the camera, mapped back to the source frame
        let truth = RigidTransform::new(q.to_rotation(), Point3::new(tx, ty, tz), frame("lidar"), frame("camera")).unwrap();
        let intr = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = truth.inverse();
        let corr: Vec<Correspondence2D3D> = (0..10)
            .map(|_| {
                let cam = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.8..0.8), rng.random_range(2.0..5.0));
                let point = inv.transform_point(&cam);
                Correspondence2D3D { point, pixel: project(&intr, &truth, &point).unwrap() }
            })
            .collect();
        let r = pnp_solve(&intr, &corr, &PnpOptions::default()).unwrap();
        prop_assert!(r.transform.rotation_error(&truth).to_degrees() <= 1e-6);
        prop_assert!(r.transform.translation_error(&truth) <= 1e-8);

        let all_in = PnpRansacParams { inlier_threshold_px: f64::INFINITY, ..PnpRansacParams::default() };
        let robust = pnp_ransac(&intr, &corr, &all_in, &PnpOptions::default()).unwrap();
        prop_assert_eq!(robust.transform, r.transform);
        prop_assert_eq!(robust.residuals, r.residuals);
    }
}
