//! Depth frame I/O, the pinhole camera model and the range pass-through filter.
//!
//! Camera frame convention: x right, y up, z forward (optical axis), all in
//! millimeters. Image row `v` grows downwards, so back-projection uses
//! `cy - v` for the y component.

use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthIoError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("maxval {0} exceeds 65535")]
    MaxvalTooLarge(u32),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("frame data length {len} does not match {width}x{height}")]
    ShapeMismatch { width: usize, height: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Magic prefix of the flat binary depth format.
pub const RAW_MAGIC: &[u8; 4] = b"HDPT";

/// A 16-bit depth raster, row-major, millimeters. Zero marks "no return".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self, DepthIoError> {
        if data.len() != width * height {
            return Err(DepthIoError::ShapeMismatch { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: u16) {
        self.data[row * self.width + col] = value;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0).count()
    }
}

/// Pinhole intrinsics. `depth_scale` converts raw depth units to millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
    /// Sensor resolution the intrinsics were calibrated for.
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    /// Kinect V1 style 640x480 sensor.
    fn default() -> Self {
        Self {
            fx: 575.8,
            fy: 575.8,
            cx: 319.5,
            cy: 239.5,
            depth_scale: 1.0,
            width: 640,
            height: 480,
        }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), DepthIoError> {
        let bad = |m: &str| Err(DepthIoError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fx.is_finite()) || !(self.fy > 0.0 && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return bad("depth_scale must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be nonzero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx outside [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy outside [0, height)");
        }
        Ok(())
    }

    /// Horizontal field of view in radians.
    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    /// Ray direction through pixel `(u, v)` scaled so that its z component is 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        [(u - self.cx) / self.fx, (self.cy - v) / self.fy, 1.0]
    }

    /// Pixel coordinates of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: Point3) -> (f64, f64) {
        (self.cx + self.fx * p.x / p.z, self.cy - self.fy * p.y / p.z)
    }

    /// Parses `key=value` lines (`fx`, `fy`, `cx`, `cy`, `depth_scale`,
    /// `width`, `height`). Unspecified keys keep their defaults; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, DepthIoError> {
        let mut k = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DepthIoError::InvalidIntrinsics(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let num = || {
                value.parse::<f64>().map_err(|_| {
                    DepthIoError::InvalidIntrinsics(format!("line {}: bad number {value:?}", lineno + 1))
                })
            };
            match key {
                "fx" => k.fx = num()?,
                "fy" => k.fy = num()?,
                "cx" => k.cx = num()?,
                "cy" => k.cy = num()?,
                "depth_scale" => k.depth_scale = num()?,
                "width" => k.width = num()? as usize,
                "height" => k.height = num()? as usize,
                other => {
                    return Err(DepthIoError::InvalidIntrinsics(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        k.validate()?;
        Ok(k)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DepthIoError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "fx={}\nfy={}\ncx={}\ncy={}\ndepth_scale={}\nwidth={}\nheight={}\n",
            self.fx, self.fy, self.cx, self.cy, self.depth_scale, self.width, self.height
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dist2(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.x, self.y, self.z)
    }
}

/// Points in millimeters in the camera frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let (sx, sy, sz) = self
            .points
            .iter()
            .fold((0.0, 0.0, 0.0), |(a, b, c), p| (a + p.x, b + p.y, c + p.z));
        Some(Point3::new(sx / n, sy / n, sz / n))
    }

    /// One `x y z` triple per line.
    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 24);
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        out
    }

    pub fn parse_xyz(text: &str) -> Result<Self, DepthIoError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .take(3)
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| DepthIoError::MalformedHeader(format!("xyz line {}", lineno + 1)))?;
            if vals.len() != 3 {
                return Err(DepthIoError::MalformedHeader(format!("xyz line {}", lineno + 1)));
            }
            points.push(Point3::new(vals[0], vals[1], vals[2]));
        }
        Ok(Self { points })
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<T: IntoIterator<Item = Point3>>(iter: T) -> Self {
        Self { points: iter.into_iter().collect() }
    }
}

/// Decodes a depth frame from either binary PGM (P5) or the flat `HDPT`
/// format (magic, u32 LE width, u32 LE height, u16 LE payload).
pub fn load_depth(bytes: &[u8]) -> Result<DepthFrame, DepthIoError> {
    if bytes.starts_with(RAW_MAGIC) {
        load_depth_raw(bytes)
    } else {
        load_depth_pgm(bytes)
    }
}

pub fn load_depth_file(path: impl AsRef<Path>) -> Result<DepthFrame, DepthIoError> {
    load_depth(&std::fs::read(path)?)
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], DepthIoError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(DepthIoError::MalformedHeader("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, DepthIoError> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DepthIoError::MalformedHeader(format!("bad {what}")))
}

/// Binary PGM reader. 16-bit samples (maxval > 255) are big-endian.
pub fn load_depth_pgm(bytes: &[u8]) -> Result<DepthFrame, DepthIoError> {
    let mut pos = 0;
    let magic = pgm_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(DepthIoError::MalformedHeader("expected P5 magic".into()));
    }
    let width = pgm_number(bytes, &mut pos, "width")? as usize;
    let height = pgm_number(bytes, &mut pos, "height")? as usize;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 {
        return Err(DepthIoError::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 65535 {
        return Err(DepthIoError::MaxvalTooLarge(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() {
        return Err(DepthIoError::Truncated { expected: 1, actual: 0 });
    }
    pos += 1;
    let bpp = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bpp;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(DepthIoError::Truncated { expected, actual: payload.len() });
    }
    let data = if bpp == 2 {
        payload[..expected].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        payload[..expected].iter().map(|&b| b as u16).collect()
    };
    DepthFrame::new(width, height, data)
}

pub fn load_depth_raw(bytes: &[u8]) -> Result<DepthFrame, DepthIoError> {
    if bytes.len() < 12 || &bytes[..4] != RAW_MAGIC {
        return Err(DepthIoError::MalformedHeader("expected HDPT header".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = width * height * 2;
    let payload = &bytes[12..];
    if payload.len() < expected {
        return Err(DepthIoError::Truncated { expected, actual: payload.len() });
    }
    let data = payload[..expected].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    DepthFrame::new(width, height, data)
}

/// 16-bit binary PGM with maxval 65535.
pub fn encode_pgm16(frame: &DepthFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", frame.width, frame.height).into_bytes();
    out.reserve(frame.data.len() * 2);
    for &d in &frame.data {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

pub fn encode_raw(frame: &DepthFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + frame.data.len() * 2);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    for &d in &frame.data {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

/// 8-bit binary PGM of a boolean mask (0 / 255).
pub fn encode_mask_pgm(width: usize, height: usize, mask: &[bool]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    out
}

/// Back-projects every valid pixel; also returns the row-major pixel index
/// each point came from.
pub fn backproject_indexed(frame: &DepthFrame, k: &Intrinsics) -> (PointCloud, Vec<usize>) {
    let mut points = Vec::with_capacity(frame.valid_count());
    let mut index = Vec::with_capacity(points.capacity());
    for v in 0..frame.height {
        let row = &frame.data[v * frame.width..(v + 1) * frame.width];
        for (u, &raw) in row.iter().enumerate() {
            if raw == 0 {
                continue;
            }
            let z = raw as f64 * k.depth_scale;
            points.push(Point3::new((u as f64 - k.cx) * z / k.fx, (k.cy - v as f64) * z / k.fy, z));
            index.push(v * frame.width + u);
        }
    }
    (PointCloud { points }, index)
}

/// Pinhole inversion of every pixel with nonzero depth, in row-major order.
pub fn backproject(frame: &DepthFrame, k: &Intrinsics) -> PointCloud {
    backproject_indexed(frame, k).0
}

/// Keeps points with `zmin <= z <= zmax`, preserving order.
pub fn passthrough_filter(cloud: &PointCloud, zmin: f64, zmax: f64) -> PointCloud {
    cloud.points.iter().copied().filter(|p| p.z >= zmin && p.z <= zmax).collect()
}
