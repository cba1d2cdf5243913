//! Property tests across modules, each against an independent oracle.

use hapmap_core::classifier::{normalize_unit_sphere, PointSetModel};
use hapmap_core::depthio::{
    backproject, backproject_indexed, encode_pgm16, encode_raw, load_depth, DepthFrame, Intrinsics, Point3, PointCloud,
};
use hapmap_core::geomfeat::{convex_hull_2d, percentile_nearest_rank, polygon_area};
use hapmap_core::segment::{dbscan, voxel_downsample};
use hapmap_core::synthgrid::{emit, map_to_area, parse_grid, AreaGeometry, GridFormat, PinGrid, INACTIVE};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_frame() -> impl Strategy<Value = DepthFrame> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![Just(0u16), 1u16..=u16::MAX], w * h)
            .prop_map(move |data| DepthFrame::new(w, h, data).unwrap())
    })
}

fn points_2d(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1000.0f64..1000.0, -1000.0f64..1000.0), 0..max)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Brute-force hull membership: a point is a hull vertex iff some line
/// through it and another point has every input point on one side, and it
/// is an extreme (not interior) point of that supporting segment.
fn brute_force_extreme_points(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut uniq: Vec<(f64, f64)> = pts.to_vec();
    uniq.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    uniq.dedup();
    let mut out = Vec::new();
    for &p in &uniq {
        // p is extreme iff it is not inside or on any triangle or segment of
        // other points
        let others: Vec<(f64, f64)> = uniq.iter().copied().filter(|&q| q != p).collect();
        let mut covered = false;
        'outer: for i in 0..others.len() {
            for j in i + 1..others.len() {
                let (a, b) = (others[i], others[j]);
                // on segment ab
                if cross(a, b, p).abs() < 1e-9
                    && p.0 >= a.0.min(b.0) - 1e-9
                    && p.0 <= a.0.max(b.0) + 1e-9
                    && p.1 >= a.1.min(b.1) - 1e-9
                    && p.1 <= a.1.max(b.1) + 1e-9
                {
                    covered = true;
                    break 'outer;
                }
                for &c in &others[j + 1..] {
                    let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
                    let neg = d1 < -1e-9 || d2 < -1e-9 || d3 < -1e-9;
                    let pos = d1 > 1e-9 || d2 > 1e-9 || d3 > 1e-9;
                    if !(neg && pos) && cross(a, b, c).abs() > 1e-9 {
                        covered = true;
                        break 'outer;
                    }
                }
            }
        }
        if !covered {
            out.push(p);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn depth_formats_roundtrip(frame in small_frame()) {
        prop_assert_eq!(load_depth(&encode_pgm16(&frame)).unwrap(), frame.clone());
        prop_assert_eq!(load_depth(&encode_raw(&frame)).unwrap(), frame.clone());
    }

    #[test]
    fn backprojection_reprojects(frame in small_frame()) {
        let k = Intrinsics { width: frame.width(), height: frame.height(), cx: frame.width() as f64 / 2.0 - 0.5,
            cy: frame.height() as f64 / 2.0 - 0.5, ..Intrinsics::default() };
        let (cloud, index) = backproject_indexed(&frame, &k);
        prop_assert_eq!(cloud.len(), frame.valid_count());
        for (p, &idx) in cloud.iter().zip(&index) {
            let (u, v) = k.project(*p);
            prop_assert!((u - (idx % frame.width()) as f64).abs() < 1e-6);
            prop_assert!((v - (idx / frame.width()) as f64).abs() < 1e-6);
            prop_assert_eq!(p.z, frame.data()[idx] as f64);
        }
        prop_assert_eq!(backproject(&frame, &k), cloud);
    }

    #[test]
    fn hull_matches_brute_force(pts in points_2d(14)) {
        let hull = convex_hull_2d(&pts);
        if !hull.degenerate {
            let mut got = hull.vertices.clone();
            got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            prop_assert_eq!(got, brute_force_extreme_points(&pts));
            // counter-clockwise and strictly convex
            let n = hull.vertices.len();
            for i in 0..n {
                let (a, b, c) = (hull.vertices[i], hull.vertices[(i + 1) % n], hull.vertices[(i + 2) % n]);
                prop_assert!(cross(a, b, c) > 0.0);
            }
        }
    }

    #[test]
    fn area_is_rigid_motion_invariant(pts in points_2d(40), angle in 0.0f64..std::f64::consts::TAU,
                                      dx in -500.0f64..500.0, dz in -500.0f64..500.0) {
        let hull = convex_hull_2d(&pts);
        prop_assume!(!hull.degenerate);
        let (s, c) = angle.sin_cos();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, z)| (c * x - s * z + dx, s * x + c * z + dz)).collect();
        let a = polygon_area(&hull.vertices);
        let b = polygon_area(&convex_hull_2d(&moved).vertices);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn percentile_is_an_element_with_rank(values in prop::collection::vec(-1e4f64..1e4, 1..200)) {
        let p90 = percentile_nearest_rank(values.clone(), 0.9).unwrap();
        let below = values.iter().filter(|&&v| v <= p90).count();
        let strictly_below = values.iter().filter(|&&v| v < p90).count();
        let rank = (0.9 * values.len() as f64 - 1e-9).ceil().max(1.0) as usize;
        prop_assert!(values.contains(&p90));
        prop_assert!(below >= rank && strictly_below < rank);
    }

    #[test]
    fn voxel_downsample_bounds(pts in prop::collection::vec((0.0f64..400.0, 0.0f64..400.0, 0.0f64..400.0), 0..300),
                               leaf in 5.0f64..100.0) {
        let cloud: PointCloud = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let down = voxel_downsample(&cloud, leaf);
        let mut cells: Vec<(i64, i64, i64)> = cloud.iter()
            .map(|p| ((p.x / leaf).floor() as i64, (p.y / leaf).floor() as i64, (p.z / leaf).floor() as i64))
            .collect();
        cells.sort();
        cells.dedup();
        prop_assert_eq!(down.len(), cells.len());
        prop_assert!(down.len() <= cloud.len());
    }

    #[test]
    fn dbscan_labels_are_a_partition(pts in prop::collection::vec((0.0f64..600.0, 0.0f64..600.0, 0.0f64..600.0), 0..200),
                                     eps in 20.0f64..150.0, min_pts in 1usize..8) {
        let cloud: PointCloud = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let seg = dbscan(&cloud, eps, min_pts);
        prop_assert_eq!(seg.labels.len(), cloud.len());
        prop_assert!(seg.labels.iter().all(|&l| l == -1 || (0..seg.k as i32).contains(&l)));
        prop_assert!(seg.sizes().iter().all(|&s| s > 0));
        prop_assert_eq!(seg.sizes().iter().sum::<usize>() + seg.noise_count(), cloud.len());
        if min_pts == 1 {
            prop_assert_eq!(seg.noise_count(), 0);
        }
    }

    #[test]
    fn normalization_is_idempotent(pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 2..100)) {
        let cloud: PointCloud = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let once = normalize_unit_sphere(&cloud);
        let twice = normalize_unit_sphere(&once);
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!(a.dist2(b).sqrt() <= 1e-9);
        }
    }

    #[test]
    fn model_output_ignores_point_order(seed in any::<u64>(), pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = PointSetModel::new(pts.len(), &[3, 8, 16], &[16, 4], (0..4).map(|i| i.to_string()).collect(), &mut rng).unwrap();
        let points: Vec<Point3> = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let mut reversed = points.clone();
        reversed.reverse();
        let p = model.forward(&points).unwrap();
        prop_assert_eq!(&p, &model.forward(&reversed).unwrap());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mapping_is_a_similarity(x1 in -0.5f64..0.5, z1 in 900.0f64..3900.0, x2 in -0.5f64..0.5, z2 in 900.0f64..3900.0) {
        let g = AreaGeometry::default();
        let (a, b) = ((x1 * z1, z1), (x2 * z2, z2));
        let (pa, pb) = (g.map_continuous(a.0, a.1), g.map_continuous(b.0, b.1));
        let world = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let mapped = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
        prop_assert!((mapped - g.s() * world).abs() <= 1e-9 * world.max(1.0));
        // two pin pitches apart never collide after rounding
        if world >= 2.0 / g.s() {
            prop_assert_ne!(map_to_area(a.0, a.1, &g).unwrap(), map_to_area(b.0, b.1, &g).unwrap());
        }
    }

    #[test]
    fn grid_formats_roundtrip(levels in prop::collection::vec(-1i8..=4, 96 * 120)) {
        let g = AreaGeometry::default();
        let mut grid = PinGrid::ground(&g);
        for (cell, l) in grid.cells.iter_mut().zip(levels) {
            if *cell != INACTIVE {
                *cell = l.max(0);
            }
        }
        for f in [GridFormat::Json, GridFormat::Ascii, GridFormat::Pgm] {
            prop_assert_eq!(&parse_grid(&emit(&grid, f), f).unwrap(), &grid);
        }
    }
}
