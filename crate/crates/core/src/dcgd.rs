//! Depth-cut ground detection.
//!
//! The depth range `[z0, zf]` is sliced into cuts `z_i = z0 + i*dz`. In each
//! cut every image column keeps the pixel with the lowest back-projected y
//! (the intersection of the cutting plane with the scene). The per-column
//! profile is split into runs that rise above the floor baseline (convex,
//! objects) and runs that do not (concave, ground candidates). Cuts are
//! processed from near to far; the ground mask collects the floor-level
//! pixels of concave runs.

use crate::depthio::{DepthFrame, Intrinsics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcgdParams {
    pub z0: f64,
    pub zf: f64,
    pub dz: f64,
    /// Height above the baseline at which a column counts as convex.
    pub baseline_tol: f64,
    /// Half-width of the band around the floor level that a concave column's
    /// pixels must fall in to be marked as ground.
    pub ground_band: f64,
}

impl Default for DcgdParams {
    fn default() -> Self {
        Self { z0: 800.0, zf: 4000.0, dz: 50.0, baseline_tol: 50.0, ground_band: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutEntry {
    pub row: usize,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthCut {
    pub index: usize,
    pub z: f64,
    /// One optional entry per image column.
    pub entries: Vec<Option<CutEntry>>,
}

impl DepthCut {
    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(Option::is_none)
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, CutEntry)> + '_ {
        self.entries.iter().enumerate().filter_map(|(c, e)| e.map(|e| (c, e)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubCutKind {
    Concave,
    Convex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubCut {
    pub c_start: usize,
    pub c_end: usize,
    pub kind: SubCutKind,
    /// Occupied columns of the run with their y values.
    pub columns: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl GroundMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.mask[row * self.width + col]
    }
}

/// Number of cut intervals: `zf = z0 + n*dz`.
pub fn cut_count(z0: f64, zf: f64, dz: f64) -> usize {
    ((zf - z0) / dz + 1e-9).floor() as usize
}

/// Cut index of a depth, if it lies in `[z0, zf]`. A pixel belongs to the cut
/// whose center is nearest; exact midpoints go to the farther cut.
#[inline]
fn cut_of(z: f64, z0: f64, zf: f64, dz: f64, n: usize) -> Option<usize> {
    if !(z >= z0 && z <= zf) {
        return None;
    }
    let i = ((z - z0) / dz + 0.5).floor() as usize;
    Some(i.min(n))
}

struct Binned {
    /// Per pixel: cut index or `u32::MAX`.
    cut: Vec<u32>,
    y: Vec<f64>,
}

fn bin_pixels(frame: &DepthFrame, k: &Intrinsics, z0: f64, zf: f64, dz: f64, n: usize) -> Binned {
    let (w, h) = (frame.width(), frame.height());
    let mut cut = vec![u32::MAX; w * h];
    let mut y = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let idx = v * w + u;
            let raw = frame.data()[idx];
            if raw == 0 {
                continue;
            }
            let z = raw as f64 * k.depth_scale;
            if let Some(i) = cut_of(z, z0, zf, dz, n) {
                cut[idx] = i as u32;
                y[idx] = (k.cy - v as f64) * z / k.fy;
            }
        }
    }
    Binned { cut, y }
}

fn cuts_from_bins(binned: &Binned, width: usize, z0: f64, dz: f64, n: usize) -> Vec<DepthCut> {
    let mut cuts: Vec<DepthCut> = (0..=n)
        .map(|i| DepthCut { index: i, z: z0 + i as f64 * dz, entries: vec![None; width] })
        .collect();
    for (idx, &c) in binned.cut.iter().enumerate() {
        if c == u32::MAX {
            continue;
        }
        let (row, col) = (idx / width, idx % width);
        let y = binned.y[idx];
        let slot = &mut cuts[c as usize].entries[col];
        if slot.is_none_or(|e| y < e.y) {
            *slot = Some(CutEntry { row, y });
        }
    }
    cuts
}

/// Computes the `n + 1` depth cuts of `frame`.
pub fn compute_depth_cuts(frame: &DepthFrame, k: &Intrinsics, z0: f64, zf: f64, dz: f64) -> Vec<DepthCut> {
    assert!(z0 < zf && dz > 0.0, "invalid cut range");
    let n = cut_count(z0, zf, dz);
    let binned = bin_pixels(frame, k, z0, zf, dz, n);
    cuts_from_bins(&binned, frame.width(), z0, dz, n)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// Run decomposition of `cut` against `baseline`: occupied columns with
/// `y > baseline + tol` are convex, the rest concave. Runs are maximal over
/// the ordered sequence of occupied columns.
pub fn split_with_baseline(cut: &DepthCut, baseline: f64, tol: f64) -> Vec<SubCut> {
    let mut out: Vec<SubCut> = Vec::new();
    for (col, e) in cut.occupied() {
        let kind = if e.y > baseline + tol { SubCutKind::Convex } else { SubCutKind::Concave };
        match out.last_mut() {
            Some(run) if run.kind == kind => {
                run.c_end = col;
                run.columns.push((col, e.y));
            }
            _ => out.push(SubCut { c_start: col, c_end: col, kind, columns: vec![(col, e.y)] }),
        }
    }
    out
}

/// Splits a cut using the median of all its entries as the baseline.
pub fn split_subcuts(cut: &DepthCut, baseline_tol: f64) -> Vec<SubCut> {
    let mut ys: Vec<f64> = cut.occupied().map(|(_, e)| e.y).collect();
    match median(&mut ys) {
        Some(b) => split_with_baseline(cut, b, baseline_tol),
        None => Vec::new(),
    }
}

/// Detects the ground pixels of `frame`.
///
/// For each cut the baseline is the median y of the entries whose columns
/// were not convex in the previous nonempty cut (falling back to all entries,
/// then to the previous baseline). Pixels of a concave column that lie in the
/// cut and within `ground_band` of the floor level are ground, unless the
/// pixel sits directly below a part of the column rising more than
/// `baseline_tol` above the floor in the same cut (the foot of a vertical
/// face). Convex columns contribute nothing.
pub fn detect_ground(frame: &DepthFrame, k: &Intrinsics, params: &DcgdParams) -> GroundMask {
    let (w, h) = (frame.width(), frame.height());
    let mut mask = GroundMask { width: w, height: h, mask: vec![false; w * h] };
    if !(params.z0 < params.zf && params.dz > 0.0) {
        return mask;
    }
    let n = cut_count(params.z0, params.zf, params.dz);
    let binned = bin_pixels(frame, k, params.z0, params.zf, params.dz, n);
    let cuts = cuts_from_bins(&binned, w, params.z0, params.dz, n);

    // pixel lists per (cut, column), so ground pixels can be collected per run
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); (n + 1) * w];
    for (idx, &c) in binned.cut.iter().enumerate() {
        if c != u32::MAX {
            members[c as usize * w + idx % w].push(idx as u32);
        }
    }

    let mut claimed = vec![false; w];
    let mut prev_baseline: Option<f64> = None;
    for cut in &cuts {
        if cut.is_empty() {
            continue;
        }
        let mut free: Vec<f64> = cut.occupied().filter(|(c, _)| !claimed[*c]).map(|(_, e)| e.y).collect();
        let mut baseline = median(&mut free)
            .or(prev_baseline)
            .or_else(|| median(&mut cut.occupied().map(|(_, e)| e.y).collect::<Vec<_>>()))
            .expect("nonempty cut");
        // an object wider than half the view would otherwise become the floor
        if let Some(prev) = prev_baseline {
            if baseline > prev + params.baseline_tol {
                baseline = prev;
            }
        }
        let runs = split_with_baseline(cut, baseline, params.baseline_tol);

        // floor level: median of concave-column pixels near the baseline
        let mut floor_ys: Vec<f64> = Vec::new();
        for run in runs.iter().filter(|r| r.kind == SubCutKind::Concave) {
            for &(col, _) in &run.columns {
                for &idx in &members[cut.index * w + col] {
                    let y = binned.y[idx as usize];
                    if y <= baseline + params.baseline_tol {
                        floor_ys.push(y);
                    }
                }
            }
        }
        let floor = median(&mut floor_ys).unwrap_or(baseline);

        let mut next_claimed = vec![false; w];
        for run in &runs {
            match run.kind {
                SubCutKind::Convex => {
                    for &(col, _) in &run.columns {
                        next_claimed[col] = true;
                    }
                }
                SubCutKind::Concave => {
                    for &(col, _) in &run.columns {
                        let pixels = &members[cut.index * w + col];
                        // a face rising from the floor in this column and bin:
                        // the rows just below its lowest pixel above the
                        // tolerance are its foot, inside the band as well
                        let foot_end = pixels
                            .iter()
                            .filter(|&&i| binned.y[i as usize] > floor + params.baseline_tol)
                            .map(|&i| i as usize / w)
                            .max()
                            .map(|row| row + (params.baseline_tol * k.fy / cut.z).ceil() as usize + 1);
                        for &idx in pixels {
                            if foot_end.is_some_and(|end| idx as usize / w <= end) {
                                continue;
                            }
                            if (binned.y[idx as usize] - floor).abs() <= params.ground_band {
                                mask.mask[idx as usize] = true;
                            }
                        }
                    }
                }
            }
        }
        claimed = next_claimed;
        prev_baseline = Some(floor);
    }
    mask
}

/// Median y of the ground pixels, the ground elevation in camera frame.
pub fn ground_level(frame: &DepthFrame, k: &Intrinsics, mask: &GroundMask) -> Option<f64> {
    let mut ys: Vec<f64> = Vec::new();
    for (idx, &m) in mask.mask.iter().enumerate() {
        if !m {
            continue;
        }
        let raw = frame.data()[idx];
        let v = (idx / frame.width()) as f64;
        let z = raw as f64 * k.depth_scale;
        ys.push((k.cy - v) * z / k.fy);
    }
    median(&mut ys)
}

/// One line per occupied entry: `cut z col row y`.
pub fn dump_cuts(cuts: &[DepthCut]) -> String {
    let mut out = String::new();
    for cut in cuts {
        for (col, e) in cut.occupied() {
            out.push_str(&format!("{} {} {} {} {:.3}\n", cut.index, cut.z, col, e.row, e.y));
        }
    }
    out
}
