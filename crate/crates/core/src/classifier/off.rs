//! ASCII OFF mesh reader and area-weighted surface sampling.

use rand::Rng;

use super::ClassifierError;
use crate::depthio::{Point3, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

fn malformed(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::MalformedOff(msg.into())
}

/// Parses an OFF file. Polygonal faces are fan-triangulated. Accepts the
/// common variant where the counts follow `OFF` on the same line.
pub fn parse_off(bytes: &[u8]) -> Result<TriMesh, ClassifierError> {
    let text = std::str::from_utf8(bytes).map_err(|_| malformed("not UTF-8"))?;
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    let rest = header.strip_prefix("OFF").ok_or_else(|| malformed("missing OFF header"))?.trim();
    let counts_line = if rest.is_empty() { lines.next().ok_or_else(|| malformed("missing counts line"))? } else { rest };
    let counts: Vec<usize> = counts_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| malformed(format!("bad count {t:?}"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(malformed("counts line needs vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| malformed(format!("expected {nv} vertices, found {i}")))?;
        let c: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(|t| t.parse().map_err(|_| malformed(format!("bad vertex coordinate {t:?}"))))
            .collect::<Result<_, _>>()?;
        if c.len() != 3 {
            return Err(malformed(format!("vertex {i} needs 3 coordinates")));
        }
        vertices.push(Point3::new(c[0], c[1], c[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for i in 0..nf {
        let line = lines.next().ok_or_else(|| malformed(format!("expected {nf} faces, found {i}")))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| malformed(format!("bad face index {t:?}"))))
            .collect::<Result<_, _>>()?;
        let (&k, rest) = idx.split_first().ok_or_else(|| malformed(format!("empty face {i}")))?;
        if k < 3 || rest.len() < k {
            return Err(malformed(format!("face {i} declares {k} vertices")));
        }
        let poly = &rest[..k];
        if let Some(&bad) = poly.iter().find(|&&v| v >= nv) {
            return Err(malformed(format!("face {i} references vertex {bad}")));
        }
        for j in 1..k - 1 {
            triangles.push([poly[0], poly[j], poly[j + 1]]);
        }
    }
    if lines.next().is_some() {
        return Err(malformed("trailing data after the declared faces"));
    }
    Ok(TriMesh { vertices, triangles })
}

fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    let (ux, uy, uz) = (b.x - a.x, b.y - a.y, b.z - a.z);
    let (vx, vy, vz) = (c.x - a.x, c.y - a.y, c.z - a.z);
    let (cx, cy, cz) = (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx);
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Samples `n` points, choosing faces with probability proportional to their
/// area and positions uniformly inside each face.
pub fn sample_mesh(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> Result<PointCloud, ClassifierError> {
    let areas: Vec<f64> = mesh
        .triangles
        .iter()
        .map(|t| triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]))
        .collect();
    let total: f64 = areas.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(ClassifierError::ZeroArea);
    }
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }
    Ok((0..n)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= r).min(areas.len() - 1);
            let [a, b, c] = mesh.triangles[i].map(|v| mesh.vertices[v]);
            let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            Point3::new(
                a.x + s * (b.x - a.x) + t * (c.x - a.x),
                a.y + s * (b.y - a.y) + t * (c.y - a.y),
                a.z + s * (b.z - a.z) + t * (c.z - a.z),
            )
        })
        .collect())
}

pub fn sample_mesh_off(off: &[u8], n: usize, rng: &mut impl Rng) -> Result<PointCloud, ClassifierError> {
    sample_mesh(&parse_off(off)?, n, rng)
}
