//! Synthetic depth-camera simulator for floor-plus-boxes scenes.
//!
//! The camera sits at the origin looking along +z with a horizontal optical
//! axis; the floor is the plane `y = -camera_height`. Every pixel ray is cast
//! against the floor and the axis-aligned boxes, and the nearest hit is
//! recorded together with a per-pixel ground-truth label computed before
//! noise is applied.
//!
//! Scene file grammar (one statement per line, `#` comments):
//!
//! ```text
//! camera_height = 1200
//! floor_extent  = 6000
//! noise_sigma   = 10
//! seed          = 7
//! box  = <center_x> <center_z> <width> <depth> <height> [fine_class]
//! hole = <x_min> <z_min> <x_max> <z_max>
//! ```
//!
//! `box` and `hole` may repeat. The floor covers `|x| <= floor_extent` and
//! `0 < z <= floor_extent`.

mod shapes;

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::classifier::FineClass;
use crate::depthio::{DepthFrame, Intrinsics};

pub use shapes::{sample_box_cloud, sample_box_cloud_with_count, stairs_cloud, StairsKind};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("degenerate scene: {0}")]
    Degenerate(String),
    #[error("scene file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown class tag {0:?}")]
    UnknownClass(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBox {
    pub center_x: f64,
    pub center_z: f64,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub class: Option<FineClass>,
}

impl SceneBox {
    pub fn new(center_x: f64, center_z: f64, width: f64, depth: f64, height: f64) -> Self {
        Self { center_x, center_z, width, depth, height, class: None }
    }

    pub fn with_class(mut self, class: FineClass) -> Self {
        self.class = Some(class);
        self
    }

    /// Floor footprint as a counter-clockwise rectangle in (x, z).
    pub fn footprint(&self) -> Vec<(f64, f64)> {
        let (hw, hd) = (self.width / 2.0, self.depth / 2.0);
        let (x, z) = (self.center_x, self.center_z);
        vec![(x - hw, z - hd), (x + hw, z - hd), (x + hw, z + hd), (x - hw, z + hd)]
    }
}

/// Axis-aligned floor rectangle with no depth returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleRegion {
    pub x_min: f64,
    pub z_min: f64,
    pub x_max: f64,
    pub z_max: f64,
}

impl HoleRegion {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min && x <= self.x_max && z >= self.z_min && z <= self.z_max
    }

    pub fn footprint(&self) -> Vec<(f64, f64)> {
        vec![
            (self.x_min, self.z_min),
            (self.x_max, self.z_min),
            (self.x_max, self.z_max),
            (self.x_min, self.z_max),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub camera_height: f64,
    pub floor_extent: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub boxes: Vec<SceneBox>,
    pub holes: Vec<HoleRegion>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            camera_height: 1200.0,
            floor_extent: 6000.0,
            noise_sigma: 10.0,
            seed: 0,
            boxes: Vec::new(),
            holes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelTruth {
    /// No return (sky, beyond the floor, or beyond sensor range).
    Background,
    Ground,
    Hole,
    Object(u16),
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<PixelTruth>,
    /// Noise-free hit depth per pixel (0 where nothing was hit).
    pub true_depth: Vec<f64>,
    pub object_heights: Vec<f64>,
    pub object_footprints: Vec<Vec<(f64, f64)>>,
}

impl GroundTruth {
    pub fn ground_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == PixelTruth::Ground).collect()
    }

    pub fn object_mask(&self, index: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == PixelTruth::Object(index as u16)).collect()
    }

    pub fn hole_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == PixelTruth::Hole).collect()
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Degenerate(m));
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            return bad("camera must be above the floor".into());
        }
        if !(self.floor_extent > 0.0 && self.floor_extent.is_finite()) {
            return bad("no floor".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative".into());
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(b.width > 0.0 && b.depth > 0.0 && b.height > 0.0) {
                return bad(format!("box {i} has a non-positive dimension"));
            }
            let e = self.floor_extent;
            if (b.center_x.abs() + b.width / 2.0) > e
                || b.center_z - b.depth / 2.0 <= 0.0
                || b.center_z + b.depth / 2.0 > e
            {
                return bad(format!("box {i} leaves the floor extent"));
            }
        }
        for (i, h) in self.holes.iter().enumerate() {
            if !(h.x_min < h.x_max && h.z_min < h.z_max) {
                return bad(format!("hole {i} is empty"));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut spec = SceneSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SceneError::Parse { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let fields: Vec<&str> = value.split_whitespace().collect();
            let nums = |n: usize| -> Result<Vec<f64>, SceneError> {
                if fields.len() < n {
                    return Err(err(format!("expected {n} numbers")));
                }
                fields[..n]
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number {f:?}"))))
                    .collect()
            };
            match key.trim() {
                "camera_height" => spec.camera_height = nums(1)?[0],
                "floor_extent" => spec.floor_extent = nums(1)?[0],
                "noise_sigma" => spec.noise_sigma = nums(1)?[0],
                "seed" => {
                    spec.seed = fields
                        .first()
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| err("bad seed".into()))?
                }
                "box" => {
                    let v = nums(5)?;
                    let class = match fields.get(5) {
                        Some(tag) => Some(
                            tag.parse::<FineClass>()
                                .map_err(|_| SceneError::UnknownClass(tag.to_string()))?,
                        ),
                        None => None,
                    };
                    spec.boxes.push(SceneBox {
                        center_x: v[0],
                        center_z: v[1],
                        width: v[2],
                        depth: v[3],
                        height: v[4],
                        class,
                    });
                }
                "hole" => {
                    let v = nums(4)?;
                    spec.holes.push(HoleRegion { x_min: v[0], z_min: v[1], x_max: v[2], z_max: v[3] });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "camera_height = {}", self.camera_height);
        let _ = writeln!(out, "floor_extent = {}", self.floor_extent);
        let _ = writeln!(out, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(out, "seed = {}", self.seed);
        for b in &self.boxes {
            let _ = write!(out, "box = {} {} {} {} {}", b.center_x, b.center_z, b.width, b.depth, b.height);
            if let Some(c) = b.class {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
        for h in &self.holes {
            let _ = writeln!(out, "hole = {} {} {} {}", h.x_min, h.z_min, h.x_max, h.z_max);
        }
        out
    }

    /// Nearest depth at which the floor becomes visible at the bottom image row.
    pub fn nearest_visible_floor(&self, k: &Intrinsics) -> f64 {
        let below = (k.height as f64 - 1.0) - k.cy;
        self.camera_height * k.fy / below
    }
}

/// Ray/box slab test for a ray `t * (a, b, 1)`. Returns the entry depth.
fn ray_box(a: f64, b: f64, lo: [f64; 3], hi: [f64; 3]) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (dir, (l, h)) in [a, b, 1.0].into_iter().zip(lo.into_iter().zip(hi)) {
        if dir == 0.0 {
            if l > 0.0 || h < 0.0 {
                return None;
            }
        } else {
            let (mut ta, mut tb) = (l / dir, h / dir);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    (t1 >= t0 && t0 > 0.0).then_some(t0)
}

/// Renders the depth frame and its ground truth. Noise comes from a
/// generator seeded with `spec.seed`.
pub fn render_depth(spec: &SceneSpec, k: &Intrinsics) -> Result<(DepthFrame, GroundTruth), SceneError> {
    spec.validate()?;
    k.validate().map_err(|e| SceneError::Degenerate(e.to_string()))?;
    let (w, h) = (k.width, k.height);
    let floor_y = -spec.camera_height;
    let bounds: Vec<([f64; 3], [f64; 3])> = spec
        .boxes
        .iter()
        .map(|b| {
            (
                [b.center_x - b.width / 2.0, floor_y, b.center_z - b.depth / 2.0],
                [b.center_x + b.width / 2.0, floor_y + b.height, b.center_z + b.depth / 2.0],
            )
        })
        .collect();

    let mut frame = DepthFrame::zeros(w, h);
    let mut labels = vec![PixelTruth::Background; w * h];
    let mut true_depth = vec![0.0; w * h];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("finite sigma"));

    for v in 0..h {
        for u in 0..w {
            let [a, b, _] = k.ray(u as f64, v as f64);
            let mut best: Option<(f64, PixelTruth)> = None;
            if b < 0.0 {
                let t = floor_y / b;
                let x = a * t;
                if x.abs() <= spec.floor_extent && t <= spec.floor_extent {
                    let label = if spec.holes.iter().any(|hr| hr.contains(x, t)) {
                        PixelTruth::Hole
                    } else {
                        PixelTruth::Ground
                    };
                    best = Some((t, label));
                }
            }
            for (i, (lo, hi)) in bounds.iter().enumerate() {
                if let Some(t) = ray_box(a, b, *lo, *hi) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, PixelTruth::Object(i as u16)));
                    }
                }
            }
            let idx = v * w + u;
            let Some((t, label)) = best else { continue };
            if !(1.0..65536.0).contains(&t) {
                continue;
            }
            labels[idx] = label;
            true_depth[idx] = t;
            if label == PixelTruth::Hole {
                continue;
            }
            let noisy = match &normal {
                Some(n) => t + n.sample(&mut rng),
                None => t,
            };
            frame.data_mut()[idx] = noisy.round().clamp(0.0, 65535.0) as u16;
        }
    }

    let truth = GroundTruth {
        width: w,
        height: h,
        labels,
        true_depth,
        object_heights: spec.boxes.iter().map(|b| b.height).collect(),
        object_footprints: spec.boxes.iter().map(SceneBox::footprint).collect(),
    };
    Ok((frame, truth))
}

/// Options for [`random_scene`].
#[derive(Debug, Clone)]
pub struct RandomSceneOptions {
    pub min_boxes: usize,
    pub max_boxes: usize,
    pub noise_sigma: f64,
    pub camera_height: (f64, f64),
    pub far_limit: f64,
    pub with_holes: bool,
}

impl Default for RandomSceneOptions {
    fn default() -> Self {
        Self {
            min_boxes: 0,
            max_boxes: 2,
            noise_sigma: 10.0,
            camera_height: (700.0, 1000.0),
            far_limit: 3800.0,
            with_holes: false,
        }
    }
}

/// Random scene whose boxes are fully inside the visible floor region, do not
/// occlude each other and keep at least 400mm clearance.
pub fn random_scene(rng: &mut impl Rng, k: &Intrinsics, opts: &RandomSceneOptions) -> SceneSpec {
    let camera_height = rng.random_range(opts.camera_height.0..=opts.camera_height.1);
    let mut spec = SceneSpec {
        camera_height,
        noise_sigma: opts.noise_sigma,
        seed: rng.random(),
        ..SceneSpec::default()
    };
    let near = spec.nearest_visible_floor(k) + 150.0;
    let half_tan = (k.width as f64 / 2.0 - 8.0) / k.fx;
    let n_boxes = rng.random_range(opts.min_boxes..=opts.max_boxes);
    let mut attempts = 0;
    while spec.boxes.len() < n_boxes && attempts < 1000 {
        attempts += 1;
        let width = rng.random_range(300.0..800.0);
        let depth = rng.random_range(300.0..(opts.far_limit - near).clamp(301.0, 700.0));
        let height = rng.random_range(200.0..(camera_height - 150.0));
        let z_lo = near + depth / 2.0;
        let z_hi = opts.far_limit - depth / 2.0;
        if z_lo >= z_hi {
            continue;
        }
        let center_z = rng.random_range(z_lo..z_hi);
        let x_room = (center_z - depth / 2.0) * half_tan - width / 2.0;
        if x_room <= 0.0 {
            continue;
        }
        let center_x = rng.random_range(-x_room..x_room);
        let candidate = SceneBox::new(center_x, center_z, width, depth, height);
        // no overlap in x (so no occlusion) with 400mm clearance
        let clear = spec.boxes.iter().all(|b| {
            (b.center_x - candidate.center_x).abs() > (b.width + candidate.width) / 2.0 + 400.0
                && angular_gap(b, &candidate)
        });
        if clear {
            spec.boxes.push(candidate);
        }
    }
    if opts.with_holes {
        let z0 = rng.random_range(near..(near + 300.0).min(opts.far_limit - 400.0));
        let x0 = rng.random_range(-300.0..300.0);
        let hole = HoleRegion { x_min: x0 - 150.0, z_min: z0, x_max: x0 + 150.0, z_max: z0 + 300.0 };
        let clear = spec.boxes.iter().all(|b| {
            let f = b.footprint();
            f[1].0 + 200.0 < hole.x_min || f[0].0 - 200.0 > hole.x_max || f[0].1 - 200.0 > hole.z_max
        });
        if clear {
            spec.holes.push(hole);
        }
    }
    spec
}

// Boxes must not overlap in viewing angle either, otherwise a nearer box can
// hide part of a farther one.
fn angular_gap(a: &SceneBox, b: &SceneBox) -> bool {
    let span = |s: &SceneBox| {
        let f = s.footprint();
        let angles: Vec<f64> = f.iter().map(|&(x, z)| x / z).collect();
        let lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (alo, ahi) = span(a);
    let (blo, bhi) = span(b);
    ahi + 0.05 < blo || bhi + 0.05 < alo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor_only() -> SceneSpec {
        SceneSpec { noise_sigma: 0.0, ..SceneSpec::default() }
    }

    #[test]
    fn floor_only_scene_is_all_ground() {
        let k = Intrinsics::default();
        let (frame, truth) = render_depth(&floor_only(), &k).unwrap();
        for (d, l) in frame.data().iter().zip(&truth.labels) {
            if *d > 0 {
                assert_eq!(*l, PixelTruth::Ground);
            }
        }
        assert!(frame.valid_count() > 0);
    }

    #[test]
    fn floor_depth_matches_analytic_solution() {
        let k = Intrinsics::default();
        let spec = floor_only();
        let (frame, _) = render_depth(&spec, &k).unwrap();
        let mut checked = 0;
        for v in 0..k.height {
            for u in 0..k.width {
                let d = frame.get(u, v);
                if d == 0 {
                    continue;
                }
                let analytic = spec.camera_height * k.fy / (v as f64 - k.cy);
                assert!((d as f64 - analytic).abs() < 0.5 + 1e-9, "pixel ({u},{v})");
                checked += 1;
            }
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn single_box_has_mask_and_height() {
        let k = Intrinsics::default();
        let mut spec = floor_only();
        spec.boxes.push(SceneBox::new(0.0, 2000.0, 500.0, 500.0, 450.0));
        let (_, truth) = render_depth(&spec, &k).unwrap();
        assert!(truth.object_mask(0).iter().any(|&m| m));
        assert_eq!(truth.object_heights, vec![450.0]);
    }

    #[test]
    fn noiseless_render_is_deterministic() {
        let k = Intrinsics::default();
        let mut spec = floor_only();
        spec.boxes.push(SceneBox::new(200.0, 3000.0, 400.0, 400.0, 600.0));
        assert_eq!(render_depth(&spec, &k).unwrap().0, render_depth(&spec, &k).unwrap().0);
        spec.noise_sigma = 10.0;
        spec.seed = 3;
        assert_eq!(render_depth(&spec, &k).unwrap().0, render_depth(&spec, &k).unwrap().0);
    }

    #[test]
    fn holes_return_zero() {
        let k = Intrinsics::default();
        let mut spec = floor_only();
        spec.camera_height = 800.0;
        spec.holes.push(HoleRegion { x_min: -200.0, z_min: 2500.0, x_max: 200.0, z_max: 2900.0 });
        let (frame, truth) = render_depth(&spec, &k).unwrap();
        let holes: Vec<usize> =
            truth.labels.iter().enumerate().filter(|(_, l)| **l == PixelTruth::Hole).map(|(i, _)| i).collect();
        assert!(!holes.is_empty());
        assert!(holes.iter().all(|&i| frame.data()[i] == 0));
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let k = Intrinsics::default();
        let below = SceneSpec { camera_height: -5.0, ..SceneSpec::default() };
        assert!(matches!(render_depth(&below, &k), Err(SceneError::Degenerate(_))));
        let no_floor = SceneSpec { floor_extent: 0.0, ..SceneSpec::default() };
        assert!(render_depth(&no_floor, &k).is_err());
        let mut flat_box = SceneSpec::default();
        flat_box.boxes.push(SceneBox::new(0.0, 2000.0, 0.0, 100.0, 100.0));
        assert!(render_depth(&flat_box, &k).is_err());
    }

    #[test]
    fn scene_file_roundtrip() {
        let text = "camera_height = 900\nnoise_sigma=5 # mm\nseed = 11\nbox = 0 2500 400 400 450 table\nhole = -100 2000 100 2200\n";
        let spec = SceneSpec::parse(text).unwrap();
        assert_eq!(spec.camera_height, 900.0);
        assert_eq!(spec.boxes[0].class, Some(FineClass::Table));
        assert_eq!(spec.holes.len(), 1);
        assert_eq!(SceneSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(matches!(SceneSpec::parse("box = 0 2500 400 400 450 lamp"), Err(SceneError::UnknownClass(_))));
        assert!(matches!(SceneSpec::parse("box = 0 2500"), Err(SceneError::Parse { line: 1, .. })));
    }

    #[test]
    fn random_scenes_are_valid() {
        let k = Intrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let spec = random_scene(&mut rng, &k, &RandomSceneOptions { with_holes: true, ..Default::default() });
            spec.validate().unwrap();
        }
    }
}
