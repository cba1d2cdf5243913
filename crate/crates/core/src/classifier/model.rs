//! Permutation-invariant point-set network: a shared per-point MLP, a
//! channel-wise max over points, and a dense classification head.
//!
//! All parameters live in one flat vector so the optimizer, the gradient
//! check and serialization can treat them uniformly. Dense weights are stored
//! input-major (`w[i * outputs + o]`).
//!
//! Serialized layout (all integers u32 little-endian unless noted):
//!
//! ```text
//! magic "HPSM" | version = 1 | n_points
//! n_point_widths | point widths...      (first width is 3)
//! n_head_widths  | head widths...       (first width equals last point width)
//! n_classes | per class: byte length, UTF-8 name
//! seed (u64) | epochs
//! n_params | params as f32 little-endian
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ClassifierError;
use crate::depthio::Point3;

pub const MODEL_MAGIC: &[u8; 4] = b"HPSM";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w_off: usize,
    pub b_off: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSetModel {
    pub n_points: usize,
    point_widths: Vec<usize>,
    head_widths: Vec<usize>,
    point_layers: Vec<Layer>,
    head_layers: Vec<Layer>,
    pub params: Vec<f64>,
    pub classes: Vec<String>,
    pub meta: TrainingMeta,
}

fn layout(widths: &[usize], offset: &mut usize) -> Vec<Layer> {
    widths
        .windows(2)
        .map(|w| {
            let layer = Layer { inputs: w[0], outputs: w[1], w_off: *offset, b_off: *offset + w[0] * w[1] };
            *offset += w[0] * w[1] + w[1];
            layer
        })
        .collect()
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `point_acts[0]` is the input (n x 3); `point_acts[l + 1]` the ReLU
    /// output of point layer `l` (n x width).
    point_acts: Vec<Vec<f64>>,
    argmax: Vec<u32>,
    /// `head_acts[0]` is the pooled feature; then hidden ReLU outputs; the
    /// last entry holds the logits.
    head_acts: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl PointSetModel {
    /// Builds a model with He-initialized weights and zero biases.
    /// `point_widths` must start at 3 and `head_widths[0]` must equal the last
    /// point width; the last head width is the number of classes.
    pub fn new(
        n_points: usize,
        point_widths: &[usize],
        head_widths: &[usize],
        classes: Vec<String>,
        rng: &mut impl Rng,
    ) -> Result<Self, ClassifierError> {
        let mut model = Self::zeros(n_points, point_widths, head_widths, classes)?;
        for layer in model.point_layers.clone().iter().chain(model.head_layers.clone().iter()) {
            let std = (2.0 / layer.inputs as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            for w in &mut model.params[layer.w_off..layer.b_off] {
                *w = normal.sample(rng);
            }
        }
        Ok(model)
    }

    pub fn zeros(
        n_points: usize,
        point_widths: &[usize],
        head_widths: &[usize],
        classes: Vec<String>,
    ) -> Result<Self, ClassifierError> {
        let mismatch = |m: String| Err(ClassifierError::WidthMismatch(m));
        if point_widths.len() < 2 || point_widths[0] != 3 {
            return mismatch("point MLP must start at width 3 and have at least one layer".into());
        }
        if head_widths.len() < 2 || head_widths[0] != *point_widths.last().unwrap() {
            return mismatch("head input width must equal the last point width".into());
        }
        if *head_widths.last().unwrap() != classes.len() {
            return mismatch(format!(
                "head output width {} != {} classes",
                head_widths.last().unwrap(),
                classes.len()
            ));
        }
        if point_widths.iter().chain(head_widths).any(|&w| w == 0) || n_points == 0 {
            return mismatch("widths and n_points must be positive".into());
        }
        let mut offset = 0;
        let point_layers = layout(point_widths, &mut offset);
        let head_layers = layout(head_widths, &mut offset);
        Ok(Self {
            n_points,
            point_widths: point_widths.to_vec(),
            head_widths: head_widths.to_vec(),
            point_layers,
            head_layers,
            params: vec![0.0; offset],
            classes,
            meta: TrainingMeta::default(),
        })
    }

    pub fn point_widths(&self) -> &[usize] {
        &self.point_widths
    }

    pub fn head_widths(&self) -> &[usize] {
        &self.head_widths
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn head_layers(&self) -> &[Layer] {
        &self.head_layers
    }

    /// `out[p, :] = act(b + in[p, :] * W)` for every row.
    fn dense_rows(params: &[f64], layer: &Layer, input: &[f64], rows: usize, relu: bool) -> Vec<f64> {
        let (ni, no) = (layer.inputs, layer.outputs);
        let w = &params[layer.w_off..layer.b_off];
        let b = &params[layer.b_off..layer.b_off + no];
        let mut out = vec![0.0; rows * no];
        for r in 0..rows {
            let o = &mut out[r * no..(r + 1) * no];
            o.copy_from_slice(b);
            let x = &input[r * ni..(r + 1) * ni];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wr = &w[i * no..(i + 1) * no];
                for (oo, &wv) in o.iter_mut().zip(wr) {
                    *oo += xi * wv;
                }
            }
            if relu {
                for v in o.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        out
    }

    pub fn trace(&self, points: &[Point3]) -> Result<ForwardTrace, ClassifierError> {
        self.trace_with(&self.params, points)
    }

    /// Forward pass with an explicit parameter vector (same layout).
    pub fn trace_with(&self, params: &[f64], points: &[Point3]) -> Result<ForwardTrace, ClassifierError> {
        if points.is_empty() {
            return Err(ClassifierError::EmptyCloud);
        }
        if params.len() != self.params.len() {
            return Err(ClassifierError::WidthMismatch("parameter vector length".into()));
        }
        let n = points.len();
        let input: Vec<f64> = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let mut point_acts = vec![input];
        for layer in &self.point_layers {
            let next = Self::dense_rows(params, layer, point_acts.last().unwrap(), n, true);
            point_acts.push(next);
        }
        let width = *self.point_widths.last().unwrap();
        let last = point_acts.last().unwrap();
        let mut pooled = last[..width].to_vec();
        let mut argmax = vec![0u32; width];
        for p in 1..n {
            let row = &last[p * width..(p + 1) * width];
            for c in 0..width {
                if row[c] > pooled[c] {
                    pooled[c] = row[c];
                    argmax[c] = p as u32;
                }
            }
        }
        let mut head_acts = vec![pooled];
        let n_head = self.head_layers.len();
        for (l, layer) in self.head_layers.iter().enumerate() {
            let next = Self::dense_rows(params, layer, head_acts.last().unwrap(), 1, l + 1 < n_head);
            head_acts.push(next);
        }
        let probabilities = softmax(head_acts.last().unwrap());
        Ok(ForwardTrace { point_acts, argmax, head_acts, probabilities })
    }

    /// Class probabilities for a cloud (already canonicalized).
    pub fn forward(&self, points: &[Point3]) -> Result<Vec<f64>, ClassifierError> {
        Ok(self.trace(points)?.probabilities)
    }

    /// Cross-entropy of `label` under the traced prediction.
    pub fn loss(trace: &ForwardTrace, label: usize) -> f64 {
        -trace.probabilities[label].max(f64::MIN_POSITIVE).ln()
    }

    /// Accumulates `scale * dLoss/dθ` into `grad` for one sample.
    pub fn backward(&self, trace: &ForwardTrace, label: usize, scale: f64, grad: &mut [f64]) {
        self.backward_with(&self.params, trace, label, scale, grad)
    }

    pub fn backward_with(&self, params: &[f64], trace: &ForwardTrace, label: usize, scale: f64, grad: &mut [f64]) {
        // dL/dlogits = p - onehot
        let mut delta: Vec<f64> = trace.probabilities.iter().map(|p| p * scale).collect();
        delta[label] -= scale;

        for l in (0..self.head_layers.len()).rev() {
            let layer = &self.head_layers[l];
            let input = &trace.head_acts[l];
            let (ni, no) = (layer.inputs, layer.outputs);
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let g = &mut grad[layer.w_off + i * no..layer.w_off + (i + 1) * no];
                for (gv, &d) in g.iter_mut().zip(&delta) {
                    *gv += xi * d;
                }
            }
            for (gv, &d) in grad[layer.b_off..layer.b_off + no].iter_mut().zip(&delta) {
                *gv += d;
            }
            let w = &params[layer.w_off..layer.b_off];
            let mut prev = vec![0.0; ni];
            for (i, pv) in prev.iter_mut().enumerate() {
                // ReLU gate of the layer input (the pooled feature is itself a
                // max of ReLU outputs, so the same gate applies)
                if input[i] <= 0.0 {
                    continue;
                }
                let wr = &w[i * no..(i + 1) * no];
                *pv = wr.iter().zip(&delta).map(|(a, b)| a * b).sum();
            }
            delta = prev;
        }

        // scatter the pooled gradient to the winning points
        let width = *self.point_widths.last().unwrap();
        let mut rows: Vec<u32> = trace.argmax.clone();
        rows.sort_unstable();
        rows.dedup();
        let slot = |p: u32| rows.binary_search(&p).expect("argmax row");
        let mut d_out = vec![0.0; rows.len() * width];
        for c in 0..width {
            d_out[slot(trace.argmax[c]) * width + c] += delta[c];
        }

        for l in (0..self.point_layers.len()).rev() {
            let layer = &self.point_layers[l];
            let (ni, no) = (layer.inputs, layer.outputs);
            let out_act = &trace.point_acts[l + 1];
            let in_act = &trace.point_acts[l];
            // gate by the ReLU of this layer's output
            for (r, &p) in rows.iter().enumerate() {
                let act = &out_act[p as usize * no..(p as usize + 1) * no];
                for (d, &a) in d_out[r * no..(r + 1) * no].iter_mut().zip(act) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            for (r, &p) in rows.iter().enumerate() {
                let d = &d_out[r * no..(r + 1) * no];
                let x = &in_act[p as usize * ni..(p as usize + 1) * ni];
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let g = &mut grad[layer.w_off + i * no..layer.w_off + (i + 1) * no];
                    for (gv, &dv) in g.iter_mut().zip(d) {
                        *gv += xi * dv;
                    }
                }
                for (gv, &dv) in grad[layer.b_off..layer.b_off + no].iter_mut().zip(d) {
                    *gv += dv;
                }
            }
            if l == 0 {
                break;
            }
            let w = &params[layer.w_off..layer.b_off];
            let mut d_in = vec![0.0; rows.len() * ni];
            for r in 0..rows.len() {
                let d = &d_out[r * no..(r + 1) * no];
                for i in 0..ni {
                    let wr = &w[i * no..(i + 1) * no];
                    d_in[r * ni + i] = wr.iter().zip(d).map(|(a, b)| a * b).sum();
                }
            }
            d_out = d_in;
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.params.len() * 4);
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        out.extend_from_slice(MODEL_MAGIC);
        put(&mut out, MODEL_VERSION);
        put(&mut out, self.n_points as u32);
        put(&mut out, self.point_widths.len() as u32);
        for &w in &self.point_widths {
            put(&mut out, w as u32);
        }
        put(&mut out, self.head_widths.len() as u32);
        for &w in &self.head_widths {
            put(&mut out, w as u32);
        }
        put(&mut out, self.classes.len() as u32);
        for c in &self.classes {
            put(&mut out, c.len() as u32);
            out.extend_from_slice(c.as_bytes());
        }
        out.extend_from_slice(&self.meta.seed.to_le_bytes());
        put(&mut out, self.meta.epochs);
        put(&mut out, self.params.len() as u32);
        for &p in &self.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(ClassifierError::MalformedModel("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(ClassifierError::MalformedModel(format!("unsupported version {version}")));
        }
        let n_points = r.u32()? as usize;
        let np = r.u32()? as usize;
        let point_widths: Vec<usize> = (0..np).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_, _>>()?;
        let nh = r.u32()? as usize;
        let head_widths: Vec<usize> = (0..nh).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_, _>>()?;
        let nc = r.u32()? as usize;
        let mut classes = Vec::with_capacity(nc);
        for _ in 0..nc {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| ClassifierError::MalformedModel("class name is not UTF-8".into()))?;
            classes.push(name.to_string());
        }
        let seed = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let epochs = r.u32()?;
        let mut model = Self::zeros(n_points, &point_widths, &head_widths, classes)?;
        let n_params = r.u32()? as usize;
        if n_params != model.params.len() {
            return Err(ClassifierError::WidthMismatch(format!(
                "{} parameters stored, layout needs {}",
                n_params,
                model.params.len()
            )));
        }
        for p in model.params.iter_mut() {
            *p = f32::from_le_bytes(r.take(4)?.try_into().unwrap()) as f64;
        }
        if r.pos != bytes.len() {
            return Err(ClassifierError::MalformedModel("trailing bytes".into()));
        }
        model.meta = TrainingMeta { seed, epochs };
        Ok(model)
    }

    /// Rounds every parameter to f32, matching what serialization keeps.
    pub fn quantize_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        if self.pos + n > self.bytes.len() {
            return Err(ClassifierError::MalformedModel("truncated model file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> PointSetModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSetModel::new(16, &[3, 8, 16], &[16, 8, 3], vec!["a".into(), "b".into(), "c".into()], &mut rng).unwrap()
    }

    fn cloud(seed: u64, n: usize) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn probabilities_sum_to_one() {
        for seed in 0..20 {
            let p = tiny(seed).forward(&cloud(seed, 20)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicated_point_changes_nothing() {
        let m = tiny(1);
        let mut c = cloud(2, 12);
        let before = m.forward(&c).unwrap();
        c.push(c[5]);
        assert_eq!(m.forward(&c).unwrap(), before);
    }

    #[test]
    fn width_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(PointSetModel::new(8, &[2, 4], &[4, 2], vec!["a".into(), "b".into()], &mut rng).is_err());
        assert!(PointSetModel::new(8, &[3, 4], &[5, 2], vec!["a".into(), "b".into()], &mut rng).is_err());
        assert!(PointSetModel::new(8, &[3, 4], &[4, 3], vec!["a".into(), "b".into()], &mut rng).is_err());
        assert!(matches!(tiny(0).forward(&[]), Err(ClassifierError::EmptyCloud)));
    }

    #[test]
    fn serialization_roundtrip() {
        let mut m = tiny(5);
        m.meta = TrainingMeta { seed: 42, epochs: 7 };
        m.quantize_f32();
        let bytes = m.to_bytes();
        let back = PointSetModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert!(PointSetModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PointSetModel::from_bytes(&bad).is_err());
    }
}
