//! Coarse segmentation of the occupied space: voxel-grid downsampling
//! followed by DBSCAN.

use std::collections::HashMap;

use crate::depthio::{Point3, PointCloud};

/// Cluster label of a point.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    /// Per point: `NOISE` or a cluster id in `0..k`.
    pub labels: Vec<i32>,
    pub k: usize,
}

impl Segmentation {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Cluster sizes indexed by id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub points: PointCloud,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub leaf: f64,
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { leaf: 20.0, eps: 80.0, min_pts: 10 }
    }
}

type Cell = (i64, i64, i64);

#[inline]
fn cell_of(p: &Point3, size: f64) -> Cell {
    ((p.x / size).floor() as i64, (p.y / size).floor() as i64, (p.z / size).floor() as i64)
}

/// Replaces the points of every occupied voxel (grid anchored at the origin)
/// by their centroid. Output order follows the first point of each voxel.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> PointCloud {
    assert!(leaf > 0.0, "leaf must be positive");
    let mut slot: HashMap<Cell, usize> = HashMap::with_capacity(cloud.len() / 4);
    let mut sums: Vec<(f64, f64, f64, usize)> = Vec::new();
    for p in cloud.iter() {
        let i = *slot.entry(cell_of(p, leaf)).or_insert_with(|| {
            sums.push((0.0, 0.0, 0.0, 0));
            sums.len() - 1
        });
        let s = &mut sums[i];
        s.0 += p.x;
        s.1 += p.y;
        s.2 += p.z;
        s.3 += 1;
    }
    sums.into_iter()
        .map(|(x, y, z, n)| {
            let n = n as f64;
            Point3::new(x / n, y / n, z / n)
        })
        .collect()
}

/// Uniform hash grid with cell size `eps` for radius queries.
struct NeighborGrid<'a> {
    points: &'a [Point3],
    eps: f64,
    cells: HashMap<Cell, Vec<u32>>,
}

impl<'a> NeighborGrid<'a> {
    fn new(points: &'a [Point3], eps: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, eps)).or_default().push(i as u32);
        }
        Self { points, eps, cells }
    }

    /// Indices within `eps` (inclusive) of point `i`, including `i` itself,
    /// in ascending index order.
    fn neighbors(&self, i: usize, out: &mut Vec<u32>) {
        out.clear();
        let p = &self.points[i];
        let (cx, cy, cz) = cell_of(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(bucket.iter().copied().filter(|&j| self.points[j as usize].dist2(p) <= eps2));
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// DBSCAN with Euclidean distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are the connected components of core points, with
/// ids assigned in the scan order of their first core point. A non-core point
/// joins the cluster of its nearest core neighbor (ties: lowest cluster id),
/// or is noise when it has none. This border rule makes the partition
/// independent of input order.
pub fn dbscan(cloud: &PointCloud, eps: f64, min_pts: usize) -> Segmentation {
    assert!(eps > 0.0 && min_pts >= 1, "invalid DBSCAN parameters");
    let n = cloud.len();
    if n == 0 {
        return Segmentation { labels: Vec::new(), k: 0 };
    }
    let pts = &cloud.points;
    let grid = NeighborGrid::new(pts, eps);
    let mut buf = Vec::new();
    let mut neighbor_lists: Vec<Vec<u32>> = Vec::with_capacity(n);
    for i in 0..n {
        grid.neighbors(i, &mut buf);
        neighbor_lists.push(buf.clone());
    }
    let core: Vec<bool> = neighbor_lists.iter().map(|l| l.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut k = 0i32;
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = k;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for &j in &neighbor_lists[i] {
                let j = j as usize;
                if core[j] && labels[j] == NOISE {
                    labels[j] = k;
                    stack.push(j);
                }
            }
        }
        k += 1;
    }

    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, i32)> = None;
        for &j in &neighbor_lists[i] {
            let j = j as usize;
            if !core[j] {
                continue;
            }
            let d = pts[i].dist2(&pts[j]);
            let cand = (d, labels[j]);
            if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                best = Some(cand);
            }
        }
        if let Some((_, id)) = best {
            labels[i] = id;
        }
    }
    Segmentation { labels, k: k as usize }
}

/// One segment per cluster id, in id order; noise is dropped.
pub fn extract_segments(cloud: &PointCloud, seg: &Segmentation) -> Vec<Segment> {
    assert_eq!(cloud.len(), seg.labels.len(), "labels must align with the cloud");
    let mut segments: Vec<Segment> =
        (0..seg.k).map(|id| Segment { id, points: PointCloud::default() }).collect();
    for (p, &l) in cloud.iter().zip(&seg.labels) {
        if l >= 0 {
            segments[l as usize].points.points.push(*p);
        }
    }
    segments
}

/// `x y z label` per line.
pub fn export_labeled(cloud: &PointCloud, seg: &Segmentation) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for (p, l) in cloud.iter().zip(&seg.labels) {
        out.push_str(&format!("{:.3} {:.3} {:.3} {}\n", p.x, p.y, p.z, l));
    }
    out
}

/// Downsample then cluster; returns the downsampled cloud with its labels.
pub fn segment_cloud(cloud: &PointCloud, params: &SegmentParams) -> (PointCloud, Segmentation) {
    let down = voxel_downsample(cloud, params.leaf);
    let seg = dbscan(&down, params.eps, params.min_pts);
    (down, seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(center: Point3, n: usize, spread: f64) -> Vec<Point3> {
        // deterministic lattice blob
        let side = (n as f64).cbrt().ceil() as usize;
        let step = spread / side as f64;
        let mut out = Vec::new();
        'outer: for i in 0..side {
            for j in 0..side {
                for k in 0..side {
                    if out.len() == n {
                        break 'outer;
                    }
                    out.push(Point3::new(
                        center.x + i as f64 * step,
                        center.y + j as f64 * step,
                        center.z + k as f64 * step,
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn voxel_centroid_of_two() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 1.0, 1.0), Point3::new(3.0, 5.0, 7.0)]);
        let down = voxel_downsample(&cloud, 20.0);
        assert_eq!(down.points, vec![Point3::new(2.0, 3.0, 4.0)]);
    }

    #[test]
    fn sparse_points_survive_downsampling() {
        let cloud: PointCloud = (0..10).map(|i| Point3::new(i as f64 * 50.0, 0.0, 1000.0)).collect();
        assert_eq!(voxel_downsample(&cloud, 20.0).len(), 10);
    }

    #[test]
    fn plane_count_bound() {
        // 100 x 100 grid over 1000mm x 1000mm at y = -1200
        let cloud: PointCloud = (0..100)
            .flat_map(|i| (0..100).map(move |j| Point3::new(i as f64 * 10.0 + 0.5, -1200.0, 1000.0 + j as f64 * 10.0 + 0.5)))
            .collect();
        let down = voxel_downsample(&cloud, 20.0);
        let bound = (1000.0f64 / 20.0).ceil() * (1000.0f64 / 20.0).ceil();
        assert!(down.len() as f64 <= bound, "{} > {bound}", down.len());
    }

    #[test]
    fn two_blobs() {
        let mut pts = blob(Point3::new(0.0, 0.0, 1000.0), 30, 60.0);
        pts.extend(blob(Point3::new(1000.0, 0.0, 1000.0), 30, 60.0));
        let seg = dbscan(&PointCloud::new(pts), 100.0, 4);
        assert_eq!(seg.k, 2);
        assert_eq!(seg.noise_count(), 0);
    }

    #[test]
    fn isolated_point_is_noise() {
        let seg = dbscan(&PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]), 100.0, 4);
        assert_eq!(seg.labels, vec![NOISE]);
        assert_eq!(seg.k, 0);
    }

    #[test]
    fn empty_cloud() {
        let seg = dbscan(&PointCloud::default(), 100.0, 4);
        assert_eq!(seg.k, 0);
        assert!(seg.labels.is_empty());
        assert!(extract_segments(&PointCloud::default(), &seg).is_empty());
    }

    #[test]
    fn min_pts_counts_the_point_itself() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0)]);
        assert_eq!(dbscan(&cloud, 10.0, 2).k, 1);
        assert_eq!(dbscan(&cloud, 9.99, 2).k, 0);
    }

    #[test]
    fn segments_partition_the_cloud() {
        let mut pts = blob(Point3::new(0.0, 0.0, 1000.0), 27, 60.0);
        pts.extend(blob(Point3::new(1000.0, 0.0, 1000.0), 27, 60.0));
        pts.push(Point3::new(5000.0, 0.0, 0.0));
        let cloud = PointCloud::new(pts);
        let seg = dbscan(&cloud, 100.0, 4);
        let segments = extract_segments(&cloud, &seg);
        assert_eq!(segments.len(), 2);
        assert_eq!(segments.iter().map(|s| s.points.len()).sum::<usize>() + seg.noise_count(), cloud.len());
        assert!(segments.iter().enumerate().all(|(i, s)| s.id == i));
    }

    #[test]
    fn all_noise_gives_no_segments() {
        let cloud: PointCloud = (0..5).map(|i| Point3::new(i as f64 * 1000.0, 0.0, 0.0)).collect();
        let seg = dbscan(&cloud, 10.0, 2);
        assert!(extract_segments(&cloud, &seg).is_empty());
    }
}
