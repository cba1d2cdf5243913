//! Per-segment geometric features: ground-plane footprint (convex hull of the
//! (x, z) projection), occupied area, 90th-percentile height and the discrete
//! height/area classes.

use crate::depthio::{Point3, PointCloud};

/// Convex hull in the ground plane, counter-clockwise in (x, z).
#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub vertices: Vec<(f64, f64)>,
    /// Fewer than three non-collinear input points.
    pub degenerate: bool,
}

#[inline]
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Collinear and duplicate vertices are dropped.
/// The ring starts at the lowest-x (then lowest-z) point.
pub fn convex_hull_2d(points: &[(f64, f64)]) -> Hull {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return Hull { vertices: pts, degenerate: true };
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        // all collinear: keep the two extremes
        return Hull { vertices: vec![pts[0], pts[pts.len() - 1]], degenerate: true };
    }
    Hull { vertices: hull, degenerate: false }
}

/// Signed shoelace sum (twice the signed area) in input units.
fn shoelace(polygon: &[(f64, f64)]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

/// Area of a simple polygon given in millimeters, in square meters.
pub fn polygon_area(polygon: &[(f64, f64)]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    shoelace(polygon).abs() / 2.0 / 1.0e6
}

/// Area centroid of a simple polygon; `None` when the area vanishes.
pub fn polygon_centroid(polygon: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = polygon.len();
    if n < 3 {
        return None;
    }
    let a2 = shoelace(polygon);
    if a2.abs() < 1e-9 {
        return None;
    }
    let (mut cx, mut cz) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (polygon[i], polygon[(i + 1) % n]);
        let c = p.0 * q.1 - q.0 * p.1;
        cx += (p.0 + q.0) * c;
        cz += (p.1 + q.1) * c;
    }
    Some((cx / (3.0 * a2), cz / (3.0 * a2)))
}

/// Nearest-rank 90th percentile of the heights `y - ground_y`: the element at
/// 1-based index `ceil(0.9 n)` of the ascending sort.
pub fn height_p90(points: &PointCloud, ground_y: f64) -> Option<f64> {
    percentile_nearest_rank(points.iter().map(|p| p.y - ground_y).collect(), 0.9)
}

pub fn percentile_nearest_rank(mut values: Vec<f64>, p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    // 0.9 * n is not exact in binary for most n; shave the rounding noise off
    // before taking the ceiling so that n = 100 gives rank 90, not 91
    let rank = ((p * values.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(values[rank.min(values.len()) - 1])
}

/// Class boundaries: `height = [h12, h23]` in mm, `area = [a12, a23]` in m².
/// Lower bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryThresholds {
    pub height: [f64; 2],
    pub area: [f64; 2],
}

impl Default for GeometryThresholds {
    fn default() -> Self {
        Self { height: [400.0, 1000.0], area: [0.25, 1.0] }
    }
}

impl GeometryThresholds {
    pub fn is_valid(&self) -> bool {
        self.height[0] < self.height[1] && self.area[0] < self.area[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricClass {
    pub height_class: u8,
    pub area_class: u8,
    pub height_mm: f64,
    pub area_m2: f64,
}

fn bucket(value: f64, bounds: [f64; 2]) -> u8 {
    if value < bounds[0] {
        1
    } else if value < bounds[1] {
        2
    } else {
        3
    }
}

pub fn classify_geometry(height_mm: f64, area_m2: f64, thresholds: &GeometryThresholds) -> GeometricClass {
    GeometricClass {
        height_class: bucket(height_mm, thresholds.height),
        area_class: bucket(area_m2, thresholds.area),
        height_mm,
        area_m2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub hull: Hull,
    pub area_m2: f64,
    /// x and z: area centroid of the hull (the center of the encompassing
    /// footprint); y: mean height of the points. Falls back to the point
    /// centroid when the hull is degenerate.
    pub barycenter: Point3,
    pub point_centroid: Point3,
}

pub fn footprint(points: &PointCloud) -> Option<Footprint> {
    let centroid = points.centroid()?;
    let xz: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.z)).collect();
    let hull = convex_hull_2d(&xz);
    let area_m2 = if hull.degenerate { 0.0 } else { polygon_area(&hull.vertices) };
    let barycenter = match polygon_centroid(&hull.vertices) {
        Some((x, z)) if !hull.degenerate => Point3::new(x, centroid.y, z),
        _ => centroid,
    };
    Some(Footprint { hull, area_m2, barycenter, point_centroid: centroid })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub footprint: Footprint,
    pub geometry: GeometricClass,
}

pub fn describe_segment(
    points: &PointCloud,
    ground_y: f64,
    thresholds: &GeometryThresholds,
) -> Option<SegmentFeatures> {
    let footprint = footprint(points)?;
    let height = height_p90(points, ground_y)?;
    let geometry = classify_geometry(height, footprint.area_m2, thresholds);
    Some(SegmentFeatures { footprint, geometry })
}

/// Point-in-convex-polygon test (counter-clockwise ring, boundary included).
pub fn convex_contains(polygon: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(f64::MIN_POSITIVE);
        cross(a, b, p) / len >= -tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_points() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.2, 0.7), (0.5, 0.0)];
        let hull = convex_hull_2d(&pts);
        assert!(!hull.degenerate);
        assert_eq!(hull.vertices, vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn two_points_are_degenerate() {
        let hull = convex_hull_2d(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(hull.degenerate);
        assert_eq!(polygon_area(&hull.vertices), 0.0);
        let collinear = convex_hull_2d(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert!(collinear.degenerate);
        assert_eq!(collinear.vertices, vec![(0.0, 0.0), (3.0, 3.0)]);
    }

    #[test]
    fn areas() {
        let square = [(0.0, 0.0), (1000.0, 0.0), (1000.0, 1000.0), (0.0, 1000.0)];
        assert!((polygon_area(&square) - 1.0).abs() < 1e-12);
        let tri = [(0.0, 0.0), (1000.0, 0.0), (0.0, 1000.0)];
        assert!((polygon_area(&tri) - 0.5).abs() < 1e-12);
        assert_eq!(polygon_area(&[(0.0, 0.0), (1.0, 0.0)]), 0.0);
    }

    #[test]
    fn centroid_of_rectangle() {
        let rect = [(100.0, 2000.0), (600.0, 2000.0), (600.0, 2400.0), (100.0, 2400.0)];
        let (x, z) = polygon_centroid(&rect).unwrap();
        assert!((x - 350.0).abs() < 1e-9 && (z - 2200.0).abs() < 1e-9);
    }

    #[test]
    fn p90_nearest_rank() {
        let cloud: PointCloud = (0..100).map(|i| Point3::new(0.0, i as f64 * 10.0 - 1000.0, 2000.0)).collect();
        assert_eq!(height_p90(&cloud, -1000.0), Some(890.0));
        let one = PointCloud::new(vec![Point3::new(0.0, -500.0, 2000.0)]);
        assert_eq!(height_p90(&one, -1000.0), Some(500.0));
        let flat: PointCloud = (0..37).map(|_| Point3::new(0.0, 250.0, 1.0)).collect();
        assert_eq!(height_p90(&flat, 0.0), Some(250.0));
        assert_eq!(height_p90(&PointCloud::default(), 0.0), None);
    }

    #[test]
    fn nearest_rank_small_n() {
        // n = 10: ceil(9) = 9 -> 9th element
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(v, 0.9), Some(9.0));
        // n = 11: ceil(9.9) = 10
        let v: Vec<f64> = (1..=11).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(v, 0.9), Some(10.0));
    }

    #[test]
    fn geometry_classes() {
        let t = GeometryThresholds::default();
        let chair = classify_geometry(850.0, 0.16, &t);
        assert_eq!((chair.height_class, chair.area_class), (2, 1));
        let bed = classify_geometry(500.0, 3.0, &t);
        assert_eq!((bed.height_class, bed.area_class), (2, 3));
        assert_eq!(classify_geometry(400.0, 0.0, &t).height_class, 2);
        assert_eq!(classify_geometry(399.999, 0.0, &t).height_class, 1);
        assert_eq!(classify_geometry(1000.0, 1.0, &t).height_class, 3);
        assert_eq!(classify_geometry(0.0, 1.0, &t).area_class, 3);
    }

    #[test]
    fn footprint_of_box_top() {
        let cloud: PointCloud = (0..=10)
            .flat_map(|i| (0..=10).map(move |j| Point3::new(i as f64 * 50.0, -500.0, 2000.0 + j as f64 * 40.0)))
            .collect();
        let f = footprint(&cloud).unwrap();
        assert!((f.area_m2 - 0.5 * 0.4).abs() < 1e-12);
        assert!((f.barycenter.x - 250.0).abs() < 1e-9);
        assert!((f.barycenter.z - 2200.0).abs() < 1e-9);
        assert!(footprint(&PointCloud::default()).is_none());
    }
}
