//! Input canonicalization and augmentation for the point-set network.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::depthio::{Point3, PointCloud};

/// Centers the cloud on its centroid and scales it so that the farthest
/// point has norm 1. A cloud made of one repeated point maps to the origin.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> PointCloud {
    let Some(c) = cloud.centroid() else {
        return PointCloud::default();
    };
    let centered: Vec<Point3> = cloud.iter().map(|p| Point3::new(p.x - c.x, p.y - c.y, p.z - c.z)).collect();
    let max_norm = centered.iter().map(Point3::norm).fold(0.0, f64::max);
    if max_norm.is_nan() || max_norm <= 1e-12 {
        return centered.iter().map(|_| Point3::default()).collect();
    }
    centered.into_iter().map(|p| Point3::new(p.x / max_norm, p.y / max_norm, p.z / max_norm)).collect()
}

/// Rotation by `angle` about the up (y) axis.
pub fn rotate_yaw(cloud: &PointCloud, angle: f64) -> PointCloud {
    let (s, c) = angle.sin_cos();
    cloud.iter().map(|p| Point3::new(c * p.x + s * p.z, p.y, -s * p.x + c * p.z)).collect()
}

/// Adds per-coordinate Gaussian noise clamped to `[-clip, clip]`.
pub fn jitter(cloud: &PointCloud, sigma: f64, clip: f64, rng: &mut impl Rng) -> PointCloud {
    if sigma <= 0.0 {
        return cloud.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut noise = || normal.sample(rng).clamp(-clip, clip);
    cloud.iter().map(|p| Point3::new(p.x + noise(), p.y + noise(), p.z + noise())).collect()
}

/// Random yaw rotation in `[0, 2π)` followed by clipped jitter.
pub fn augment(cloud: &PointCloud, rng: &mut impl Rng, sigma: f64, clip: f64) -> PointCloud {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    augment_with_angle(cloud, angle, rng, sigma, clip)
}

pub fn augment_with_angle(cloud: &PointCloud, angle: f64, rng: &mut impl Rng, sigma: f64, clip: f64) -> PointCloud {
    jitter(&rotate_yaw(cloud, angle), sigma, clip, rng)
}

/// Resamples to exactly `n` points: without replacement when the cloud has
/// at least `n` points, with replacement otherwise.
pub fn resample(cloud: &PointCloud, n: usize, rng: &mut impl Rng) -> PointCloud {
    let len = cloud.len();
    if len == 0 || n == 0 {
        return PointCloud::default();
    }
    if len >= n {
        sample_indices(rng, len, n).into_iter().map(|i| cloud.points[i]).collect()
    } else {
        (0..n).map(|_| cloud.points[rng.random_range(0..len)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_cloud() -> PointCloud {
        PointCloud::new(vec![
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(-4.0, 0.5, 2.0),
            Point3::new(0.0, -1.0, 7.0),
            Point3::new(2.0, 2.0, 2.0),
        ])
    }

    #[test]
    fn scale_invariant() {
        let c = sample_cloud();
        let scaled: PointCloud = c.iter().map(|p| Point3::new(2.0 * p.x, 2.0 * p.y, 2.0 * p.z)).collect();
        let (a, b) = (normalize_unit_sphere(&c), normalize_unit_sphere(&scaled));
        for (p, q) in a.iter().zip(b.iter()) {
            assert!(p.dist2(q).sqrt() < 1e-12);
        }
        let max = a.iter().map(Point3::norm).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn already_normalized_is_unchanged() {
        let c = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)]);
        let n = normalize_unit_sphere(&c);
        for (p, q) in c.iter().zip(n.iter()) {
            assert!(p.dist2(q).sqrt() <= 1e-12);
        }
    }

    #[test]
    fn single_point_maps_to_origin() {
        let c = PointCloud::new(vec![Point3::new(5.0, 5.0, 5.0); 3]);
        assert!(normalize_unit_sphere(&c).iter().all(|p| *p == Point3::default()));
    }

    #[test]
    fn zero_angle_no_noise_is_identity() {
        let c = sample_cloud();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment_with_angle(&c, 0.0, &mut rng, 0.0, 0.05), c);
    }

    #[test]
    fn half_turn() {
        let c = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = augment_with_angle(&c, std::f64::consts::PI, &mut rng, 0.0, 0.05);
        assert!(r.points[0].dist2(&Point3::new(-1.0, 0.0, 0.0)).sqrt() < 1e-12);
    }

    #[test]
    fn augmentation_keeps_count_and_clips() {
        let c = sample_cloud();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = augment(&c, &mut rng, 1.0, 0.05);
        assert_eq!(r.len(), c.len());
        let rotated_back = rotate_yaw(&r, 0.0);
        assert_eq!(rotated_back.len(), 4);
        // jitter alone never moves a coordinate by more than clip
        let j = jitter(&c, 10.0, 0.05, &mut rng);
        for (p, q) in c.iter().zip(j.iter()) {
            let tol = 0.05 + 1e-12;
            assert!((p.x - q.x).abs() <= tol && (p.y - q.y).abs() <= tol && (p.z - q.z).abs() <= tol);
        }
    }

    #[test]
    fn resampling_sizes() {
        let c = sample_cloud();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let down = resample(&c, 3, &mut rng);
        assert_eq!(down.len(), 3);
        // without replacement: all distinct
        for i in 0..3 {
            for j in i + 1..3 {
                assert_ne!(down.points[i], down.points[j]);
            }
        }
        assert_eq!(resample(&c, 10, &mut rng).len(), 10);
        assert!(resample(&PointCloud::default(), 10, &mut rng).is_empty());
    }
}
