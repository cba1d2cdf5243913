//! The synthesis area: a trapezoid of pins that is a uniformly scaled top
//! view of the camera's ground-plane view field.
//!
//! Pin coordinates are `(u, v)` with `u` across the view (column) and `v`
//! the distance from the near edge. Emitted grids put the far edge on the
//! first row, so grid row `r` holds `v = rows - 1 - r`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depthio::{Intrinsics, PointCloud};
use crate::labeling::{label_level, GlyphSheet, LabelingError, ObjectDescriptor, GLYPH_SIZE};

pub const INACTIVE: i8 = -1;
pub const LEVEL_HOLE: i8 = 0;
pub const LEVEL_GROUND: i8 = 1;
pub const LEVEL_FOOTPRINT: i8 = 2;
pub const MAX_LEVEL: i8 = 4;

/// Height band edges (mm above ground) for raw-cloud synthesis.
pub const RAW_BAND_EDGES: [f64; 3] = [50.0, 400.0, 1000.0];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("point (x={x:.1}, z={z:.1}) is outside view field")]
    OutsideViewField { x: f64, z: f64 },
    #[error("invalid area geometry: {0}")]
    InvalidGeometry(String),
    #[error("unknown format {0:?} (expected json, ascii or pgm)")]
    UnknownFormat(String),
    #[error("malformed grid: {0}")]
    Parse(String),
    #[error(transparent)]
    Labeling(#[from] LabelingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaGeometry {
    /// Near range (mm).
    pub l: f64,
    /// Far range (mm).
    pub big_l: f64,
    /// Horizontal field of view (radians).
    pub hfov: f64,
    /// Pins across the near edge of the trapezoid.
    pub d_prime: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for AreaGeometry {
    fn default() -> Self {
        Self::from_intrinsics(&Intrinsics::default(), 800.0, 4000.0, 24.0, 96, 120)
    }
}

impl AreaGeometry {
    pub fn from_intrinsics(k: &Intrinsics, l: f64, big_l: f64, d_prime: f64, rows: usize, cols: usize) -> Self {
        Self { l, big_l, hfov: k.hfov(), d_prime, rows, cols }
    }

    /// View-field width at the near range (mm).
    pub fn d(&self) -> f64 {
        2.0 * self.l * (self.hfov / 2.0).tan()
    }

    /// Pins per millimetre.
    pub fn s(&self) -> f64 {
        self.d_prime / self.d()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidGeometry(m));
        if !(self.l > 0.0 && self.big_l > self.l && self.big_l.is_finite()) {
            return bad(format!("need 0 < l < L, got l={} L={}", self.l, self.big_l));
        }
        if !(self.hfov > 0.0 && self.hfov < std::f64::consts::PI) {
            return bad(format!("hfov {} outside (0, pi)", self.hfov));
        }
        if !(self.d_prime > 0.0 && self.d_prime.is_finite()) || self.rows == 0 || self.cols == 0 {
            return bad("d_prime, rows and cols must be positive".into());
        }
        let far_width = self.d_prime * self.big_l / self.l;
        if far_width > self.cols as f64 + 1e-9 {
            return bad(format!("far basis needs {far_width:.2} pins but the grid has {} columns", self.cols));
        }
        if self.max_v() >= self.rows {
            return bad(format!("depth extent needs {} rows but the grid has {}", self.max_v() + 1, self.rows));
        }
        Ok(())
    }

    /// Last pin row (`v`) of the trapezoid.
    pub fn max_v(&self) -> usize {
        (self.s() * (self.big_l - self.l)).round() as usize
    }

    /// Unrounded pin coordinates, no frustum check.
    pub fn map_continuous(&self, x: f64, z: f64) -> (f64, f64) {
        let s = self.s();
        (s * x + self.cols as f64 / 2.0, s * (z - self.l))
    }

    pub fn in_view(&self, x: f64, z: f64) -> bool {
        let eps = 1e-9 * self.big_l;
        z >= self.l - eps && z <= self.big_l + eps && x.abs() <= z * (self.hfov / 2.0).tan() + eps
    }

    /// Width in pins of the mapped view field at depth `z`, before rounding.
    pub fn mapped_width(&self, z: f64) -> f64 {
        let half = z * (self.hfov / 2.0).tan();
        self.map_continuous(half, z).0 - self.map_continuous(-half, z).0
    }

    /// Whether pin `(u, v)` belongs to the trapezoid.
    pub fn active(&self, u: usize, v: usize) -> bool {
        if u >= self.cols || v > self.max_v() {
            return false;
        }
        // half-width of the view field at the far side of the pin row, plus
        // half a pin so that every rounded in-view point lands on an active pin
        let z = self.l + (v as f64 + 0.5) / self.s();
        let half = self.d_prime * z / (2.0 * self.l) + 0.5;
        (u as f64 - self.cols as f64 / 2.0).abs() <= half
    }

    fn round_pin(&self, (u, v): (f64, f64)) -> (usize, usize) {
        let u = u.round().clamp(0.0, (self.cols - 1) as f64) as usize;
        let v = v.round().clamp(0.0, self.max_v() as f64) as usize;
        (u, v)
    }
}

/// Maps a ground-plane point to its pin.
pub fn map_to_area(x: f64, z: f64, g: &AreaGeometry) -> Result<(usize, usize), SynthError> {
    if !g.in_view(x, z) {
        return Err(SynthError::OutsideViewField { x, z });
    }
    Ok(g.round_pin(g.map_continuous(x, z)))
}

/// Like [`map_to_area`] but clamps out-of-view points onto the grid edge.
pub fn map_to_area_clamped(x: f64, z: f64, g: &AreaGeometry) -> (usize, usize) {
    g.round_pin(g.map_continuous(x, z))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, far edge first; [`INACTIVE`] outside the trapezoid.
    pub cells: Vec<i8>,
}

impl PinGrid {
    /// Trapezoid pins at ground level, everything else inactive.
    pub fn ground(g: &AreaGeometry) -> Self {
        let mut grid = Self { rows: g.rows, cols: g.cols, cells: vec![INACTIVE; g.rows * g.cols] };
        for v in 0..g.rows {
            for u in 0..g.cols {
                if g.active(u, v) {
                    grid.set(u, v, LEVEL_GROUND);
                }
            }
        }
        grid
    }

    fn index(&self, u: usize, v: usize) -> usize {
        (self.rows - 1 - v) * self.cols + u
    }

    pub fn get(&self, u: usize, v: usize) -> i8 {
        self.cells[self.index(u, v)]
    }

    pub fn set(&mut self, u: usize, v: usize, level: i8) {
        let i = self.index(u, v);
        self.cells[i] = level;
    }

    /// Raises an active pin to `level` if it is lower; inactive pins stay.
    pub fn raise(&mut self, u: usize, v: usize, level: i8) {
        let i = self.index(u, v);
        if self.cells[i] != INACTIVE && self.cells[i] < level {
            self.cells[i] = level;
        }
    }

    pub fn count(&self, level: i8) -> usize {
        self.cells.iter().filter(|&&c| c == level).count()
    }

    /// `(u, v)` of every pin at `level`.
    pub fn pins_at(&self, level: i8) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.rows {
            for u in 0..self.cols {
                if self.get(u, v) == level {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn levels_valid(&self) -> bool {
        self.cells.iter().all(|&c| c == INACTIVE || (0..=MAX_LEVEL).contains(&c))
    }
}

/// Horizontal extent of a convex polygon within the strip `a <= y <= b`.
fn x_range_in_strip(poly: &[(f64, f64)], a: f64, b: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |x: f64| {
        lo = lo.min(x);
        hi = hi.max(x);
    };
    for (i, &(x0, y0)) in poly.iter().enumerate() {
        if (a..=b).contains(&y0) {
            take(x0);
        }
        let (x1, y1) = poly[(i + 1) % poly.len()];
        for y in [a, b] {
            if (y0 - y) * (y1 - y) < 0.0 {
                take(x0 + (y - y0) / (y1 - y0) * (x1 - x0));
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Every pin whose cell (unit square around the pin center) meets the
/// mapped convex polygon, clipped to the grid.
fn fill_convex(grid: &mut PinGrid, g: &AreaGeometry, poly: &[(f64, f64)], mut paint: impl FnMut(&mut PinGrid, usize, usize)) {
    if poly.is_empty() {
        return;
    }
    let (ymin, ymax) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let v_lo = (ymin - 0.5).ceil().max(0.0) as i64;
    let v_hi = ((ymax + 0.5).floor() as i64).min(g.rows as i64 - 1);
    for v in v_lo..=v_hi {
        let a = (v as f64 - 0.5).max(ymin);
        let b = (v as f64 + 0.5).min(ymax);
        let Some((x0, x1)) = x_range_in_strip(poly, a, b) else { continue };
        let u_lo = (x0 - 0.5).ceil().max(0.0) as i64;
        let u_hi = ((x1 + 0.5).floor() as i64).min(g.cols as i64 - 1);
        for u in u_lo..=u_hi {
            paint(grid, u as usize, v as usize);
        }
    }
}

/// Builds the labeled scene grid: ground everywhere, holes at level 0,
/// footprints at level 2 and accepted classes stamped with their glyph at
/// the footprint barycenter.
pub fn rasterize_scene(
    holes: &[Vec<(f64, f64)>],
    objects: &[ObjectDescriptor],
    sheet: &GlyphSheet,
    g: &AreaGeometry,
) -> Result<PinGrid, SynthError> {
    let mut grid = PinGrid::ground(g);
    for hole in holes {
        let mapped: Vec<(f64, f64)> = hole.iter().map(|&(x, z)| g.map_continuous(x, z)).collect();
        fill_convex(&mut grid, g, &mapped, |grid, u, v| {
            if grid.get(u, v) != INACTIVE {
                grid.set(u, v, LEVEL_HOLE);
            }
        });
    }
    for obj in objects {
        let hull = &obj.footprint.hull.vertices;
        let mapped: Vec<(f64, f64)> = hull.iter().map(|&(x, z)| g.map_continuous(x, z)).collect();
        fill_convex(&mut grid, g, &mapped, |grid, u, v| grid.raise(u, v, LEVEL_FOOTPRINT));
        if let Some(glyph) = obj.glyph(sheet)? {
            let level = label_level(obj.geometry.height_class)? as i8;
            let b = obj.footprint.barycenter;
            let (ub, vb) = map_to_area_clamped(b.x, b.z, g);
            stamp(&mut grid, g, glyph.raised(), ub, vb, level);
        }
    }
    Ok(grid)
}

/// Glyph row 0 lands on the far side (`v = vb + 2`), column 0 on the left.
fn stamp(grid: &mut PinGrid, g: &AreaGeometry, dots: impl Iterator<Item = (usize, usize)>, ub: usize, vb: usize, level: i8) {
    let half = (GLYPH_SIZE / 2) as i64;
    for (r, c) in dots {
        let u = ub as i64 - half + c as i64;
        let v = vb as i64 + half - r as i64;
        if u >= 0 && v >= 0 && (u as usize) < g.cols && (v as usize) < g.rows {
            grid.raise(u as usize, v as usize, level);
        }
    }
}

/// Pin level of a point `height` mm above the ground.
pub fn raw_level(height: f64, edges: &[f64; 3]) -> i8 {
    LEVEL_GROUND + edges.iter().filter(|&&e| height >= e).count() as i8
}

/// Maps every in-view point directly, keeping the highest level per pin.
pub fn rasterize_raw(cloud: &PointCloud, ground_y: f64, g: &AreaGeometry, edges: &[f64; 3]) -> PinGrid {
    let mut grid = PinGrid::ground(g);
    for p in cloud.iter() {
        if let Ok((u, v)) = map_to_area(p.x, p.z, g) {
            grid.raise(u, v, raw_level(p.y - ground_y, edges));
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Json,
    Ascii,
    Pgm,
}

impl FromStr for GridFormat {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(GridFormat::Json),
            "ascii" | "txt" => Ok(GridFormat::Ascii),
            "pgm" => Ok(GridFormat::Pgm),
            _ => Err(SynthError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for GridFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridFormat::Json => "json",
            GridFormat::Ascii => "ascii",
            GridFormat::Pgm => "pgm",
        })
    }
}

const ASCII_INACTIVE: char = '·';

pub fn pgm_gray(level: i8) -> u8 {
    if level == INACTIVE {
        0
    } else {
        40 + 50 * level as u8
    }
}

pub fn emit(grid: &PinGrid, format: GridFormat) -> Vec<u8> {
    match format {
        GridFormat::Json => {
            let mut out = serde_json::to_vec(grid).expect("grid serializes");
            out.push(b'\n');
            out
        }
        GridFormat::Ascii => {
            let mut out = String::with_capacity(grid.rows * (grid.cols * 2 + 1));
            for row in grid.cells.chunks(grid.cols) {
                out.extend(row.iter().map(|&c| if c == INACTIVE { ASCII_INACTIVE } else { (b'0' + c as u8) as char }));
                out.push('\n');
            }
            out.into_bytes()
        }
        GridFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", grid.cols, grid.rows).into_bytes();
            out.extend(grid.cells.iter().map(|&c| pgm_gray(c)));
            out
        }
    }
}

pub fn parse_grid(bytes: &[u8], format: GridFormat) -> Result<PinGrid, SynthError> {
    let bad = |m: &str| SynthError::Parse(m.to_string());
    let grid = match format {
        GridFormat::Json => serde_json::from_slice::<PinGrid>(bytes).map_err(|e| SynthError::Parse(e.to_string()))?,
        GridFormat::Ascii => {
            let text = std::str::from_utf8(bytes).map_err(|_| bad("not UTF-8"))?;
            let lines: Vec<&str> = text.lines().collect();
            let cols = lines.first().map_or(0, |l| l.chars().count());
            let mut cells = Vec::with_capacity(lines.len() * cols);
            for line in &lines {
                if line.chars().count() != cols {
                    return Err(bad("ragged rows"));
                }
                for ch in line.chars() {
                    cells.push(match ch {
                        ASCII_INACTIVE => INACTIVE,
                        '0'..='4' => ch as i8 - b'0' as i8,
                        _ => return Err(SynthError::Parse(format!("bad pin character {ch:?}"))),
                    });
                }
            }
            PinGrid { rows: lines.len(), cols, cells }
        }
        GridFormat::Pgm => {
            let mut fields = Vec::new();
            let mut pos = 0;
            while fields.len() < 4 {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if start == pos {
                    return Err(bad("truncated PGM header"));
                }
                fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad PGM header"))?);
            }
            if fields[0] != "P5" || fields[3] != "255" {
                return Err(bad("expected an 8-bit P5 image"));
            }
            let cols: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
            let rows: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
            let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing pixel data"))?;
            if data.len() != rows * cols {
                return Err(bad("pixel count does not match header"));
            }
            let cells = data
                .iter()
                .map(|&b| match b {
                    0 => Ok(INACTIVE),
                    b if b >= 40 && (b - 40) % 50 == 0 && (b - 40) / 50 <= MAX_LEVEL as u8 => Ok(((b - 40) / 50) as i8),
                    b => Err(SynthError::Parse(format!("gray value {b} is not a pin level"))),
                })
                .collect::<Result<_, _>>()?;
            PinGrid { rows, cols, cells }
        }
    };
    if grid.cells.len() != grid.rows * grid.cols || !grid.levels_valid() {
        return Err(bad("cells do not form a valid grid"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::CoarseClass;
    use crate::depthio::Point3;
    use crate::geomfeat::{classify_geometry, footprint, GeometryThresholds};

    fn rect(x0: f64, z0: f64, x1: f64, z1: f64) -> Vec<(f64, f64)> {
        vec![(x0, z0), (x1, z0), (x1, z1), (x0, z1)]
    }

    fn box_object(class: Option<CoarseClass>, height: f64) -> ObjectDescriptor {
        let cloud: PointCloud = [(-300.0, 2000.0), (300.0, 2000.0), (300.0, 2600.0), (-300.0, 2600.0)]
            .iter()
            .map(|&(x, z)| Point3::new(x, height, z))
            .collect();
        let geometry = classify_geometry(height, 0.36, &GeometryThresholds::default());
        ObjectDescriptor::new(0, class, None, geometry, footprint(&cloud).unwrap(), &cloud, 0.0)
    }

    #[test]
    fn default_constants() {
        let g = AreaGeometry::default();
        g.validate().unwrap();
        assert!((g.hfov - 1.014_49).abs() < 1e-4);
        assert!((g.d() - 889.20).abs() < 0.01);
        assert_eq!(map_to_area(0.0, 800.0, &g).unwrap(), (60, 0));
        assert_eq!(map_to_area(0.0, 4000.0, &g).unwrap(), (60, 86));
        assert!((g.mapped_width(4000.0) / g.mapped_width(800.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn outside_view_field() {
        let g = AreaGeometry::default();
        assert!(matches!(map_to_area(0.0, 700.0, &g), Err(SynthError::OutsideViewField { .. })));
        assert!(map_to_area(0.0, 4100.0, &g).is_err());
        assert!(map_to_area(1000.0, 1000.0, &g).is_err());
        let edge = 4000.0 * (g.hfov / 2.0).tan();
        assert_eq!(map_to_area(edge, 4000.0, &g).unwrap().0, 119);
        assert_eq!(map_to_area(-edge, 4000.0, &g).unwrap().0, 0);
    }

    #[test]
    fn geometry_validation() {
        let g = AreaGeometry { cols: 100, ..AreaGeometry::default() };
        assert!(g.validate().is_err());
        let g = AreaGeometry { rows: 80, ..AreaGeometry::default() };
        assert!(g.validate().is_err());
        assert!(AreaGeometry { l: 0.0, ..AreaGeometry::default() }.validate().is_err());
    }

    #[test]
    fn empty_scene_is_ground() {
        let g = AreaGeometry::default();
        let grid = rasterize_scene(&[], &[], &GlyphSheet::builtin(), &g).unwrap();
        assert!(grid.levels_valid());
        assert!(grid.cells.iter().all(|&c| c == INACTIVE || c == LEVEL_GROUND));
        assert_eq!(grid.pins_at(LEVEL_GROUND).iter().filter(|p| p.1 == 0).count(), 25);
        let pgm = emit(&grid, GridFormat::Pgm);
        let header = format!("P5\n{} {}\n255\n", g.cols, g.rows).len();
        for (i, &b) in pgm[header..].iter().enumerate() {
            assert_eq!(b, if grid.cells[i] == INACTIVE { 0 } else { 90 });
        }
    }

    #[test]
    fn table_footprint_and_glyph() {
        let g = AreaGeometry::default();
        let sheet = GlyphSheet::builtin();
        let obj = box_object(Some(CoarseClass::PutOn), 700.0);
        assert_eq!(obj.geometry.height_class, 2);
        let grid = rasterize_scene(&[], std::slice::from_ref(&obj), &sheet, &g).unwrap();
        let glyph_pins = grid.pins_at(3);
        assert_eq!(glyph_pins.len(), sheet.get("put_on").unwrap().dots());
        assert!(grid.count(LEVEL_FOOTPRINT) > 0);
        // every glyph pin sits inside the footprint here
        let (u0, v0) = map_to_area(-300.0, 2000.0, &g).unwrap();
        let (u1, v1) = map_to_area(300.0, 2600.0, &g).unwrap();
        for (u, v) in glyph_pins {
            assert!(u >= u0 && u <= u1 && v >= v0 && v <= v1);
        }
        let rejected = ObjectDescriptor { class: None, ..obj };
        let grid = rasterize_scene(&[], &[rejected], &sheet, &g).unwrap();
        assert_eq!(grid.count(3), 0);
        assert!(grid.count(LEVEL_FOOTPRINT) > 0);
    }

    #[test]
    fn holes_and_order_independence() {
        let g = AreaGeometry::default();
        let sheet = GlyphSheet::builtin();
        let hole = rect(-200.0, 1200.0, 200.0, 1500.0);
        let a = box_object(Some(CoarseClass::SitOn), 450.0);
        let mut b = box_object(None, 1200.0);
        for p in &mut b.footprint.hull.vertices {
            p.0 += 400.0;
        }
        let ab = rasterize_scene(std::slice::from_ref(&hole), &[a.clone(), b.clone()], &sheet, &g).unwrap();
        let ba = rasterize_scene(&[hole], &[b, a], &sheet, &g).unwrap();
        assert_eq!(ab, ba);
        let (u, v) = map_to_area(0.0, 1350.0, &g).unwrap();
        assert_eq!(ab.get(u, v), LEVEL_HOLE);
    }

    #[test]
    fn raw_levels() {
        let edges = RAW_BAND_EDGES;
        assert_eq!(raw_level(0.0, &edges), 1);
        assert_eq!(raw_level(-300.0, &edges), 1);
        assert_eq!(raw_level(50.0, &edges), 2);
        assert_eq!(raw_level(500.0, &edges), 3);
        assert_eq!(raw_level(1500.0, &edges), 4);
        let g = AreaGeometry::default();
        let empty = rasterize_raw(&PointCloud::default(), -1000.0, &g, &edges);
        assert_eq!(empty, PinGrid::ground(&g));
        let one = rasterize_raw(&PointCloud::new(vec![Point3::new(0.0, -1000.0, 2000.0)]), -1000.0, &g, &edges);
        assert_eq!(one, PinGrid::ground(&g));
    }

    #[test]
    fn format_roundtrips() {
        let g = AreaGeometry::default();
        let grid = rasterize_scene(
            &[rect(-200.0, 1200.0, 200.0, 1500.0)],
            &[box_object(Some(CoarseClass::Stairs), 1200.0)],
            &GlyphSheet::builtin(),
            &g,
        )
        .unwrap();
        for f in [GridFormat::Json, GridFormat::Ascii, GridFormat::Pgm] {
            assert_eq!(parse_grid(&emit(&grid, f), f).unwrap(), grid, "{f}");
        }
        let ascii = String::from_utf8(emit(&grid, GridFormat::Ascii)).unwrap();
        assert_eq!(ascii.lines().count(), g.rows);
        assert!("svg".parse::<GridFormat>().is_err());
    }

    #[test]
    fn in_view_points_land_on_active_pins() {
        let g = AreaGeometry::default();
        let t = (g.hfov / 2.0).tan();
        for i in 0..=40 {
            let z = 800.0 + 80.0 * i as f64;
            for j in -20..=20 {
                let x = z * t * j as f64 / 20.0;
                let (u, v) = map_to_area(x, z, &g).unwrap();
                assert!(g.active(u, v), "({x}, {z}) -> ({u}, {v})");
            }
        }
    }
}
