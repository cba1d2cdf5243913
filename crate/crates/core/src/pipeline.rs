//! End-to-end orchestration: depth frame in, pin grid and object report out.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::{gate, train::prepare, ClassifierError, PointSetModel};
use crate::dcgd::{detect_ground, ground_level, DcgdParams, GroundMask};
use crate::depthio::{backproject_indexed, load_depth_file, DepthFrame, Intrinsics, Point3, PointCloud};
use crate::geomfeat::{convex_hull_2d, describe_segment, GeometryThresholds};
use crate::labeling::{GlyphSheet, ObjectDescriptor};
use crate::segment::{extract_segments, segment_cloud, SegmentParams};
use crate::synthgrid::{
    emit, map_to_area_clamped, rasterize_raw, rasterize_scene, AreaGeometry, GridFormat, PinGrid, RAW_BAND_EDGES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Depthio,
    Dcgd,
    Segment,
    Geomfeat,
    Classifier,
    Labeling,
    Synthgrid,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Depthio => "depthio",
            Stage::Dcgd => "dcgd",
            Stage::Segment => "segment",
            Stage::Geomfeat => "geomfeat",
            Stage::Classifier => "classifier",
            Stage::Labeling => "labeling",
            Stage::Synthgrid => "synthgrid",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, err: impl fmt::Display) -> Self {
        Self { stage, message: err.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub intrinsics_path: Option<PathBuf>,
    pub intrinsics: Intrinsics,
    pub zmin: f64,
    pub zmax: f64,
    pub dcgd: DcgdParams,
    /// Points within this distance of the ground level are dropped before
    /// clustering.
    pub floor_clearance: f64,
    pub segment: SegmentParams,
    /// Clusters with fewer points are ignored.
    pub min_segment_points: usize,
    pub model_path: Option<PathBuf>,
    pub threshold: f64,
    pub geometry: GeometryThresholds,
    pub area_l: f64,
    pub area_big_l: f64,
    pub area_d_prime: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub glyphs_path: Option<PathBuf>,
    pub holes: bool,
    /// Connected invalid-pixel regions smaller than this are not holes.
    pub hole_min_pixels: usize,
    pub raw_band_edges: [f64; 3],
    pub format: GridFormat,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            intrinsics_path: None,
            intrinsics: Intrinsics::default(),
            zmin: 800.0,
            zmax: 4000.0,
            dcgd: DcgdParams::default(),
            floor_clearance: 40.0,
            segment: SegmentParams::default(),
            min_segment_points: 30,
            model_path: None,
            threshold: 0.85,
            geometry: GeometryThresholds::default(),
            area_l: 800.0,
            area_big_l: 4000.0,
            area_d_prime: 24.0,
            grid_rows: 96,
            grid_cols: 120,
            glyphs_path: None,
            holes: true,
            hole_min_pixels: 50,
            raw_band_edges: RAW_BAND_EDGES,
            format: GridFormat::Json,
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| PipelineError::new(Stage::Config, format!("line {line}: bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, PipelineError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(PipelineError::new(Stage::Config, format!("line {line}: bad boolean {value:?} for {key}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    /// Parses `section.key=value` lines on top of the defaults. `#` starts a
    /// comment. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| PipelineError::new(Stage::Config, format!("line {line}: expected key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = |v: &str| opt_path(v).map(|p| if p.is_absolute() { p } else { base.join(p) });
            match key {
                "intrinsics.path" => c.intrinsics_path = path(value),
                "intrinsics.fx" => c.intrinsics.fx = parse_num(key, value, line)?,
                "intrinsics.fy" => c.intrinsics.fy = parse_num(key, value, line)?,
                "intrinsics.cx" => c.intrinsics.cx = parse_num(key, value, line)?,
                "intrinsics.cy" => c.intrinsics.cy = parse_num(key, value, line)?,
                "intrinsics.depth_scale" => c.intrinsics.depth_scale = parse_num(key, value, line)?,
                "intrinsics.width" => c.intrinsics.width = parse_num(key, value, line)?,
                "intrinsics.height" => c.intrinsics.height = parse_num(key, value, line)?,
                "passthrough.zmin" => c.zmin = parse_num(key, value, line)?,
                "passthrough.zmax" => c.zmax = parse_num(key, value, line)?,
                "dcgd.z0" => c.dcgd.z0 = parse_num(key, value, line)?,
                "dcgd.zf" => c.dcgd.zf = parse_num(key, value, line)?,
                "dcgd.dz" => c.dcgd.dz = parse_num(key, value, line)?,
                "dcgd.baseline_tol" => c.dcgd.baseline_tol = parse_num(key, value, line)?,
                "dcgd.ground_band" => c.dcgd.ground_band = parse_num(key, value, line)?,
                "dcgd.floor_clearance" => c.floor_clearance = parse_num(key, value, line)?,
                "voxel.leaf" => c.segment.leaf = parse_num(key, value, line)?,
                "dbscan.eps" => c.segment.eps = parse_num(key, value, line)?,
                "dbscan.min_pts" => c.segment.min_pts = parse_num(key, value, line)?,
                "segment.min_points" => c.min_segment_points = parse_num(key, value, line)?,
                "classifier.model" => c.model_path = path(value),
                "classifier.threshold" => c.threshold = parse_num(key, value, line)?,
                "geometry.height_low" => c.geometry.height[0] = parse_num(key, value, line)?,
                "geometry.height_high" => c.geometry.height[1] = parse_num(key, value, line)?,
                "geometry.area_low" => c.geometry.area[0] = parse_num(key, value, line)?,
                "geometry.area_high" => c.geometry.area[1] = parse_num(key, value, line)?,
                "area.l" => c.area_l = parse_num(key, value, line)?,
                "area.L" => c.area_big_l = parse_num(key, value, line)?,
                "area.d_prime" => c.area_d_prime = parse_num(key, value, line)?,
                "area.rows" => c.grid_rows = parse_num(key, value, line)?,
                "area.cols" => c.grid_cols = parse_num(key, value, line)?,
                "labeling.glyphs" => c.glyphs_path = path(value),
                "holes.enabled" => c.holes = parse_bool(key, value, line)?,
                "holes.min_pixels" => c.hole_min_pixels = parse_num(key, value, line)?,
                "raw.band1" => c.raw_band_edges[0] = parse_num(key, value, line)?,
                "raw.band2" => c.raw_band_edges[1] = parse_num(key, value, line)?,
                "raw.band3" => c.raw_band_edges[2] = parse_num(key, value, line)?,
                "output.format" => c.format = value.parse().map_err(|e| PipelineError::new(Stage::Config, e))?,
                "run.seed" => c.seed = parse_num(key, value, line)?,
                other => return Err(PipelineError::new(Stage::Config, format!("line {line}: unknown key {other:?}"))),
            }
        }
        if let Some(p) = &c.intrinsics_path {
            c.intrinsics = Intrinsics::load(p).map_err(|e| PipelineError::new(Stage::Config, e))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every key with its current value, in the accepted syntax.
    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let k = &self.intrinsics;
        let lines = [
            format!("intrinsics.path={}", p(&self.intrinsics_path)),
            format!("intrinsics.fx={}", k.fx),
            format!("intrinsics.fy={}", k.fy),
            format!("intrinsics.cx={}", k.cx),
            format!("intrinsics.cy={}", k.cy),
            format!("intrinsics.depth_scale={}", k.depth_scale),
            format!("intrinsics.width={}", k.width),
            format!("intrinsics.height={}", k.height),
            format!("passthrough.zmin={}", self.zmin),
            format!("passthrough.zmax={}", self.zmax),
            format!("dcgd.z0={}", self.dcgd.z0),
            format!("dcgd.zf={}", self.dcgd.zf),
            format!("dcgd.dz={}", self.dcgd.dz),
            format!("dcgd.baseline_tol={}", self.dcgd.baseline_tol),
            format!("dcgd.ground_band={}", self.dcgd.ground_band),
            format!("dcgd.floor_clearance={}", self.floor_clearance),
            format!("voxel.leaf={}", self.segment.leaf),
            format!("dbscan.eps={}", self.segment.eps),
            format!("dbscan.min_pts={}", self.segment.min_pts),
            format!("segment.min_points={}", self.min_segment_points),
            format!("classifier.model={}", p(&self.model_path)),
            format!("classifier.threshold={}", self.threshold),
            format!("geometry.height_low={}", self.geometry.height[0]),
            format!("geometry.height_high={}", self.geometry.height[1]),
            format!("geometry.area_low={}", self.geometry.area[0]),
            format!("geometry.area_high={}", self.geometry.area[1]),
            format!("area.l={}", self.area_l),
            format!("area.L={}", self.area_big_l),
            format!("area.d_prime={}", self.area_d_prime),
            format!("area.rows={}", self.grid_rows),
            format!("area.cols={}", self.grid_cols),
            format!("labeling.glyphs={}", p(&self.glyphs_path)),
            format!("holes.enabled={}", self.holes),
            format!("holes.min_pixels={}", self.hole_min_pixels),
            format!("raw.band1={}", self.raw_band_edges[0]),
            format!("raw.band2={}", self.raw_band_edges[1]),
            format!("raw.band3={}", self.raw_band_edges[2]),
            format!("output.format={}", self.format),
            format!("run.seed={}", self.seed),
        ];
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::new(Stage::Config, m));
        self.intrinsics.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
        let positive = [
            ("passthrough.zmin", self.zmin),
            ("passthrough.zmax", self.zmax),
            ("dcgd.z0", self.dcgd.z0),
            ("dcgd.zf", self.dcgd.zf),
            ("dcgd.dz", self.dcgd.dz),
            ("dcgd.baseline_tol", self.dcgd.baseline_tol),
            ("dcgd.ground_band", self.dcgd.ground_band),
            ("dcgd.floor_clearance", self.floor_clearance),
            ("voxel.leaf", self.segment.leaf),
            ("dbscan.eps", self.segment.eps),
            ("area.l", self.area_l),
            ("area.L", self.area_big_l),
            ("area.d_prime", self.area_d_prime),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.segment.min_pts == 0 || self.min_segment_points == 0 || self.hole_min_pixels == 0 {
            return bad("dbscan.min_pts, segment.min_points and holes.min_pixels must be positive".into());
        }
        if self.zmin >= self.zmax || self.dcgd.z0 >= self.dcgd.zf {
            return bad("depth ranges must satisfy min < max".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("classifier.threshold must lie in (0, 1), got {}", self.threshold));
        }
        if !self.geometry.is_valid() {
            return bad("geometry thresholds must be increasing".into());
        }
        let e = self.raw_band_edges;
        if !(e[0] > 0.0 && e[0] < e[1] && e[1] < e[2]) {
            return bad("raw band edges must be positive and increasing".into());
        }
        self.area().validate().map_err(|e| PipelineError::new(Stage::Config, e))
    }

    pub fn area(&self) -> AreaGeometry {
        AreaGeometry::from_intrinsics(
            &self.intrinsics,
            self.area_l,
            self.area_big_l,
            self.area_d_prime,
            self.grid_rows,
            self.grid_cols,
        )
    }

    pub fn glyph_sheet(&self) -> Result<GlyphSheet, PipelineError> {
        match &self.glyphs_path {
            Some(p) => GlyphSheet::load(p).map_err(|e| PipelineError::new(Stage::Labeling, e)),
            None => Ok(GlyphSheet::builtin()),
        }
    }

    pub fn load_model(&self) -> Result<Option<PointSetModel>, PipelineError> {
        self.model_path
            .as_ref()
            .map(|p| {
                let bytes = std::fs::read(p).map_err(|e| PipelineError::new(Stage::Classifier, format!("{}: {e}", p.display())))?;
                PointSetModel::from_bytes(&bytes).map_err(|e| PipelineError::new(Stage::Classifier, e))
            })
            .transpose()
    }
}

/// Source of class probabilities for a segment.
pub trait SegmentClassifier {
    fn classes(&self) -> &[String];
    fn probabilities(&self, segment_id: usize, points: &PointCloud) -> Result<Vec<f64>, ClassifierError>;
}

/// Runs a trained model; resampling is seeded per segment so results do not
/// depend on evaluation order.
pub struct ModelClassifier<'a> {
    pub model: &'a PointSetModel,
    pub seed: u64,
}

impl SegmentClassifier for ModelClassifier<'_> {
    fn classes(&self) -> &[String] {
        &self.model.classes
    }

    fn probabilities(&self, segment_id: usize, points: &PointCloud) -> Result<Vec<f64>, ClassifierError> {
        if points.is_empty() {
            return Err(ClassifierError::EmptyCloud);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(segment_id as u64);
        self.model.forward(&prepare(points, self.model.n_points, &mut rng))
    }
}

/// A detected segment with its points, before classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSegment {
    pub id: usize,
    pub points: PointCloud,
}

/// Intermediate results shared by the scene and raw modes.
#[derive(Debug, Clone)]
pub struct Perception {
    pub ground: GroundMask,
    pub ground_y: f64,
    /// Points inside the pass-through band, camera frame.
    pub cloud: PointCloud,
    pub segments: Vec<SceneSegment>,
    /// Ground-plane polygons of detected holes.
    pub holes: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub grid: PinGrid,
    pub objects: Vec<ObjectDescriptor>,
    pub report: String,
    pub ground_y: f64,
    pub holes: Vec<Vec<(f64, f64)>>,
}

impl PipelineOutput {
    pub fn emit(&self, format: GridFormat) -> Vec<u8> {
        emit(&self.grid, format)
    }
}

/// Invalid pixels below the horizon form holes when their floor-plane
/// intersection falls inside the synthesis range. Each 4-connected region
/// becomes the convex hull of those intersections.
pub fn detect_holes(frame: &DepthFrame, k: &Intrinsics, ground_y: f64, config: &PipelineConfig) -> Vec<Vec<(f64, f64)>> {
    let (w, h) = (frame.width(), frame.height());
    let hit = |idx: usize| -> Option<(f64, f64)> {
        let [a, b, _] = k.ray((idx % w) as f64, (idx / w) as f64);
        if b >= 0.0 || ground_y >= 0.0 {
            return None;
        }
        let t = ground_y / b;
        (t >= config.area_l && t <= config.area_big_l).then_some((a * t, t))
    };
    let candidate: Vec<bool> = (0..w * h).map(|i| frame.data()[i] == 0 && hit(i).is_some()).collect();
    let mut seen = vec![false; w * h];
    let mut holes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !candidate[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut region = Vec::new();
        while let Some(i) = stack.pop() {
            region.push(i);
            let (u, v) = (i % w, i / w);
            let mut visit = |j: usize| {
                if candidate[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < w {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - w);
            }
            if v + 1 < h {
                visit(i + w);
            }
        }
        if region.len() < config.hole_min_pixels {
            continue;
        }
        let pts: Vec<(f64, f64)> = region.iter().filter_map(|&i| hit(i)).collect();
        let hull = convex_hull_2d(&pts);
        if !hull.degenerate {
            holes.push(hull.vertices);
        }
    }
    holes
}

/// Ground detection, occupied-space extraction, clustering and holes.
pub fn perceive(frame: &DepthFrame, config: &PipelineConfig) -> Result<Perception, PipelineError> {
    let k = &config.intrinsics;
    if frame.width() != k.width || frame.height() != k.height {
        return Err(PipelineError::new(
            Stage::Depthio,
            format!("frame is {}x{} but intrinsics expect {}x{}", frame.width(), frame.height(), k.width, k.height),
        ));
    }
    let ground = detect_ground(frame, k, &config.dcgd);
    let ground_y = ground_level(frame, k, &ground)
        .ok_or_else(|| PipelineError::new(Stage::Dcgd, "no ground pixels detected"))?;

    let (all, index) = backproject_indexed(frame, k);
    let mut cloud = Vec::with_capacity(all.len());
    let mut occupied = Vec::new();
    for (p, &idx) in all.iter().zip(&index) {
        if p.z < config.zmin || p.z > config.zmax {
            continue;
        }
        cloud.push(*p);
        if !ground.mask[idx] && (p.y - ground_y).abs() > config.floor_clearance {
            occupied.push(*p);
        }
    }
    let (down, seg) = segment_cloud(&PointCloud::new(occupied), &config.segment);
    let segments = extract_segments(&down, &seg)
        .into_iter()
        .filter(|s| s.points.len() >= config.min_segment_points)
        .map(|s| SceneSegment { id: s.id, points: s.points })
        .collect();
    let holes = if config.holes { detect_holes(frame, k, ground_y, config) } else { Vec::new() };
    Ok(Perception { ground, ground_y, cloud: PointCloud::new(cloud), segments, holes })
}

/// Full labeled-scene pipeline. Without a classifier every object keeps its
/// footprint and geometric classes only.
pub fn run_pipeline(
    config: &PipelineConfig,
    frame: &DepthFrame,
    classifier: Option<&dyn SegmentClassifier>,
) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let sheet = config.glyph_sheet()?;
    let area = config.area();
    let perception = perceive(frame, config)?;
    let ground_y = perception.ground_y;

    let mut objects = Vec::with_capacity(perception.segments.len());
    for seg in &perception.segments {
        let Some(features) = describe_segment(&seg.points, ground_y, &config.geometry) else {
            continue;
        };
        let (class, confidence) = match classifier {
            Some(c) => {
                let probs = c
                    .probabilities(seg.id, &seg.points)
                    .map_err(|e| PipelineError::new(Stage::Classifier, format!("segment {}: {e}", seg.id)))?;
                if probs.len() != c.classes().len() {
                    return Err(PipelineError::new(Stage::Classifier, "probability count does not match class list"));
                }
                let g = gate(c.classes(), probs, config.threshold);
                (g.class, Some(g.confidence))
            }
            None => (None, None),
        };
        objects.push(ObjectDescriptor::new(
            seg.id,
            class,
            confidence,
            features.geometry,
            features.footprint,
            &seg.points,
            ground_y,
        ));
    }
    let grid = rasterize_scene(&perception.holes, &objects, &sheet, &area)
        .map_err(|e| PipelineError::new(Stage::Synthgrid, e))?;
    let report = format_report(&objects, &area);
    Ok(PipelineOutput { grid, objects, report, ground_y, holes: perception.holes })
}

/// Direct mapping of the filtered cloud by height bands.
pub fn run_raw(config: &PipelineConfig, frame: &DepthFrame) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let perception = perceive(frame, config)?;
    let grid = rasterize_raw(&perception.cloud, perception.ground_y, &config.area(), &config.raw_band_edges);
    Ok(PipelineOutput {
        grid,
        objects: Vec::new(),
        report: REPORT_HEADER.to_string() + "\n",
        ground_y: perception.ground_y,
        holes: perception.holes,
    })
}

pub fn load_frame(path: &Path) -> Result<DepthFrame, PipelineError> {
    load_depth_file(path).map_err(|e| PipelineError::new(Stage::Depthio, format!("{}: {e}", path.display())))
}

pub const REPORT_HEADER: &str =
    "#segment\tclass\tconfidence\tstairs\theight_mm\tarea_m2\theight_class\tarea_class\tpin_u\tpin_v";

/// Tab-separated, one object per line in segment order.
pub fn format_report(objects: &[ObjectDescriptor], area: &AreaGeometry) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for o in objects {
        let class = match (o.class, o.confidence) {
            (Some(c), _) => c.name().to_string(),
            (None, Some(p)) => format!("rejected(p={p:.2})"),
            (None, None) => "none".to_string(),
        };
        let b: Point3 = o.footprint.barycenter;
        let (u, v) = map_to_area_clamped(b.x, b.z, area);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.1}\t{:.3}\t{}\t{}\t{}\t{}\n",
            o.segment_id,
            class,
            o.confidence.map_or("-".to_string(), |p| format!("{p:.4}")),
            o.stairs.map_or("-", |s| s.name()),
            o.geometry.height_mm,
            o.geometry.area_m2,
            o.geometry.height_class,
            o.geometry.area_class,
            u,
            v,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{render_depth, HoleRegion, SceneBox, SceneSpec};
    use crate::synthgrid::{LEVEL_FOOTPRINT, LEVEL_HOLE};

    fn scene(boxes: Vec<SceneBox>, holes: Vec<HoleRegion>) -> DepthFrame {
        let spec = SceneSpec { camera_height: 900.0, seed: 5, boxes, holes, ..SceneSpec::default() };
        render_depth(&spec, &Intrinsics::default()).unwrap().0
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.to_text(), Path::new(".")).unwrap(), c);
        let tuned = PipelineConfig::parse("# tuned\ndbscan.eps=60\nclassifier.threshold = 0.9\n", Path::new(".")).unwrap();
        assert_eq!(tuned.segment.eps, 60.0);
        assert_eq!(tuned.threshold, 0.9);
        for bad in ["classifier.threshold=1", "dbscan.eps=-1", "foo.bar=1", "dbscan.eps", "area.cols=50", "output.format=svg"] {
            let err = PipelineConfig::parse(bad, Path::new(".")).unwrap_err();
            assert_eq!(err.stage, Stage::Config, "{bad}");
        }
    }

    #[test]
    fn single_box_geometry_only() {
        let frame = scene(vec![SceneBox::new(0.0, 2400.0, 600.0, 600.0, 700.0)], vec![]);
        let out = run_pipeline(&PipelineConfig::default(), &frame, None).unwrap();
        assert_eq!(out.objects.len(), 1, "{}", out.report);
        assert!((out.ground_y + 900.0).abs() < 5.0);
        assert!(out.grid.count(LEVEL_FOOTPRINT) > 0);
        assert_eq!(out.grid.count(3) + out.grid.count(4), 0);
        assert_eq!(out.report.lines().count(), 2);
        assert!(out.report.lines().nth(1).unwrap().contains("\tnone\t"));
    }

    #[test]
    fn hole_detected() {
        let frame = scene(vec![], vec![HoleRegion { x_min: -300.0, z_min: 3000.0, x_max: 300.0, z_max: 3400.0 }]);
        let out = run_pipeline(&PipelineConfig::default(), &frame, None).unwrap();
        assert_eq!(out.holes.len(), 1);
        assert!(out.objects.is_empty(), "{}", out.report);
        let area = PipelineConfig::default().area();
        let (u, v) = map_to_area_clamped(0.0, 3200.0, &area);
        assert_eq!(out.grid.get(u, v), LEVEL_HOLE);
    }

    #[test]
    fn frame_shape_is_checked() {
        let err = run_pipeline(&PipelineConfig::default(), &DepthFrame::zeros(10, 10), None).unwrap_err();
        assert_eq!(err.stage, Stage::Depthio);
        let err = run_pipeline(&PipelineConfig::default(), &DepthFrame::zeros(640, 480), None).unwrap_err();
        assert_eq!(err.stage, Stage::Dcgd);
    }
}
