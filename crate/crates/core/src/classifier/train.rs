//! Mini-batch SGD with momentum, evaluation helpers and the finite-difference
//! gradient check.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::canon::{augment, normalize_unit_sphere, resample};
use super::dataset::Dataset;
use super::model::PointSetModel;
use super::taxonomy::FineClass;
use super::ClassifierError;
use crate::depthio::{Point3, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub decay_every: usize,
    pub lr_decay: f64,
    pub seed: u64,
    pub n_points: usize,
    pub point_widths: Vec<usize>,
    /// Hidden head widths; the input (last point width) and the output
    /// (class count) are added automatically.
    pub head_hidden: Vec<usize>,
    pub augment: bool,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch: 16,
            lr: 0.01,
            momentum: 0.9,
            decay_every: 20,
            lr_decay: 0.5,
            seed: 0,
            n_points: 256,
            point_widths: vec![3, 64, 128, 256],
            head_hidden: vec![128],
            augment: true,
            jitter_sigma: 0.01,
            jitter_clip: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn head_widths(&self, n_classes: usize) -> Vec<usize> {
        let mut w = vec![*self.point_widths.last().unwrap_or(&3)];
        w.extend_from_slice(&self.head_hidden);
        w.push(n_classes);
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

pub type History = Vec<EpochStats>;

/// Canonical network input: unit-sphere normalization then resampling to the
/// model's point count.
pub fn prepare(cloud: &PointCloud, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    resample(&normalize_unit_sphere(cloud), n, rng).points
}

/// Seeded generator for evaluating sample `index` so evaluation does not
/// depend on iteration order.
fn eval_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

pub fn evaluate(model: &PointSetModel, data: &Dataset, seed: u64) -> Result<Evaluation, ClassifierError> {
    let k = model.n_classes();
    let mut confusion = vec![vec![0; k]; k];
    let mut predictions = Vec::with_capacity(data.len());
    let mut loss = 0.0;
    let mut correct = 0;
    for (i, s) in data.samples.iter().enumerate() {
        let pts = prepare(&s.cloud, model.n_points, &mut eval_rng(seed, i));
        let trace = model.trace(&pts)?;
        loss += PointSetModel::loss(&trace, s.label);
        let pred = argmax(&trace.probabilities);
        confusion[s.label][pred] += 1;
        correct += (pred == s.label) as usize;
        predictions.push(pred);
    }
    let n = data.len().max(1) as f64;
    Ok(Evaluation { loss: loss / n, accuracy: correct as f64 / n, confusion, predictions })
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trains a fresh model on `train`, reporting `test` metrics every epoch.
pub fn train(train: &Dataset, test: &Dataset, config: &TrainConfig) -> Result<(PointSetModel, History), ClassifierError> {
    let k = train.classes.len();
    if k < 2 {
        return Err(ClassifierError::Training("need at least two classes".into()));
    }
    if test.classes != train.classes {
        return Err(ClassifierError::Training("train and test class lists differ".into()));
    }
    if let Some(empty) = train.class_counts().iter().position(|&c| c == 0) {
        return Err(ClassifierError::EmptyClass(train.classes[empty].clone()));
    }
    if config.batch == 0 || config.epochs == 0 {
        return Err(ClassifierError::Training("epochs and batch must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = PointSetModel::new(
        config.n_points,
        &config.point_widths,
        &config.head_widths(k),
        train.classes.clone(),
        &mut rng,
    )?;
    let normalized: Vec<PointCloud> = train.samples.iter().map(|s| normalize_unit_sphere(&s.cloud)).collect();
    let mut velocity = vec![0.0; model.n_params()];
    let mut grad = vec![0.0; model.n_params()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::new();

    for epoch in 0..config.epochs {
        let lr = config.lr * config.lr_decay.powi((epoch / config.decay_every.max(1)) as i32);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(config.batch).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut pts = resample(&normalized[i], config.n_points, &mut rng);
                if config.augment {
                    pts = augment(&pts, &mut rng, config.jitter_sigma, config.jitter_clip);
                }
                let trace = model.trace(&pts.points)?;
                let label = train.samples[i].label;
                let loss = PointSetModel::loss(&trace, label);
                if !loss.is_finite() {
                    return Err(ClassifierError::NonFiniteLoss { epoch, batch: b, sample: i });
                }
                loss_sum += loss;
                correct += (argmax(&trace.probabilities) == label) as usize;
                model.backward(&trace, label, scale, &mut grad);
            }
            for ((p, v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = config.momentum * *v - lr * g;
                *p += *v;
            }
        }
        let n = train.len() as f64;
        let eval = if test.is_empty() { None } else { Some(evaluate(&model, test, config.seed)?) };
        history.push(EpochStats {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            test_loss: eval.as_ref().map_or(f64::NAN, |e| e.loss),
            test_accuracy: eval.as_ref().map_or(f64::NAN, |e| e.accuracy),
        });
    }
    model.meta.seed = config.seed;
    model.meta.epochs = config.epochs as u32;
    Ok((model, history))
}

/// Mean cross-entropy of a batch of canonical clouds.
pub fn batch_loss(model: &PointSetModel, params: &[f64], batch: &[(Vec<Point3>, usize)]) -> Result<f64, ClassifierError> {
    let mut total = 0.0;
    for (pts, label) in batch {
        total += PointSetModel::loss(&model.trace_with(params, pts)?, *label);
    }
    Ok(total / batch.len() as f64)
}

pub fn batch_gradient(model: &PointSetModel, batch: &[(Vec<Point3>, usize)]) -> Result<Vec<f64>, ClassifierError> {
    let mut grad = vec![0.0; model.n_params()];
    let scale = 1.0 / batch.len() as f64;
    for (pts, label) in batch {
        let trace = model.trace(pts)?;
        model.backward(&trace, *label, scale, &mut grad);
    }
    Ok(grad)
}

/// Step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-4;

/// Compares the analytic gradient with central finite differences for every
/// parameter and returns the largest relative error
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(model: &PointSetModel, batch: &[(Vec<Point3>, usize)]) -> Result<f64, ClassifierError> {
    let analytic = batch_gradient(model, batch)?;
    let mut params = model.params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + GRAD_CHECK_STEP;
        let plus = batch_loss(model, &params, batch)?;
        params[i] = orig - GRAD_CHECK_STEP;
        let minus = batch_loss(model, &params, batch)?;
        params[i] = orig;
        let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Accuracy of a fine-class model measured on fine labels, and of the same
/// predictions after merging both prediction and truth into the training
/// taxonomy.
pub fn fine_and_merged_accuracy(
    model: &PointSetModel,
    data: &Dataset,
    seed: u64,
) -> Result<(f64, f64), ClassifierError> {
    let eval = evaluate(model, data, seed)?;
    let fine_of = |name: &str| name.parse::<FineClass>().ok().and_then(FineClass::coarse);
    let mut merged_correct = 0;
    for (s, &pred) in data.samples.iter().zip(&eval.predictions) {
        let truth = fine_of(&data.classes[s.label]);
        let guess = fine_of(&model.classes[pred]);
        merged_correct += (truth.is_some() && truth == guess) as usize;
    }
    Ok((eval.accuracy, merged_correct as f64 / data.len().max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::dataset::{LabeledCloud, Taxonomy};
    use rand::Rng;

    fn toy_cloud(kind: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        // class 0: sphere shells, class 1: elongated boxes
        (0..200)
            .map(|_| {
                if kind == 0 {
                    let (u, v): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU));
                    let r = (1.0 - u * u).sqrt();
                    Point3::new(r * v.cos(), u, r * v.sin())
                } else {
                    Point3::new(rng.random_range(-0.15..0.15), rng.random_range(-1.0..1.0), rng.random_range(-0.15..0.15))
                }
            })
            .collect()
    }

    fn toy_split(per_class: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..per_class * 2)
            .map(|i| LabeledCloud { cloud: toy_cloud(i % 2, &mut rng), label: i % 2, fine: None })
            .collect();
        Dataset { classes: vec!["sphere".into(), "rod".into()], samples }
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            n_points: 64,
            point_widths: vec![3, 16, 32],
            head_hidden: vec![16],
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_set() {
        let (train_set, test_set) = (toy_split(30, 1), toy_split(15, 2));
        let (_, history) = train(&train_set, &test_set, &toy_config()).unwrap();
        assert!(history.last().unwrap().test_accuracy >= 0.95, "{:?}", history.last());
        assert!(history[10].train_loss <= history[0].train_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let (train_set, test_set) = (toy_split(6, 1), toy_split(2, 2));
        let cfg = TrainConfig { epochs: 3, ..toy_config() };
        let (a, _) = train(&train_set, &test_set, &cfg).unwrap();
        let (b, _) = train(&train_set, &test_set, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn training_preconditions() {
        let mut one = toy_split(3, 1);
        one.classes.truncate(1);
        one.samples.retain(|s| s.label == 0);
        assert!(train(&one, &one, &toy_config()).is_err());
        let mut missing = toy_split(3, 1);
        missing.samples.retain(|s| s.label == 0);
        assert!(matches!(train(&missing, &missing, &toy_config()), Err(ClassifierError::EmptyClass(_))));
    }

    #[test]
    fn dominance_on_fine_model() {
        let (train_set, test_set) = crate::classifier::dataset::synthetic_split(Taxonomy::Fine, 2, 2, 1);
        let cfg = TrainConfig { epochs: 1, ..toy_config() };
        let (model, _) = train(&train_set, &test_set, &cfg).unwrap();
        let (fine, merged) = fine_and_merged_accuracy(&model, &test_set, 0).unwrap();
        assert!(merged >= fine);
    }
}
