//! Labeled point-cloud datasets: the built-in synthetic desk-scale dataset
//! and text manifests (`<path> <fine_class>` per line, OFF or xyz files).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::off::sample_mesh_off;
use super::taxonomy::{CoarseClass, FineClass};
use super::ClassifierError;
use crate::depthio::PointCloud;
use crate::scenegen::sample_box_cloud;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub label: usize,
    pub fine: Option<FineClass>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub samples: Vec<LabeledCloud>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

/// Which class list the labels index into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taxonomy {
    /// The six training classes.
    Coarse,
    /// The fourteen trained fine classes.
    Fine,
}

impl Taxonomy {
    pub fn class_names(self) -> Vec<String> {
        match self {
            Taxonomy::Coarse => CoarseClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            Taxonomy::Fine => FineClass::TRAINED.iter().map(|c| c.name().to_string()).collect(),
        }
    }

    fn label_of(self, fine: FineClass) -> Option<usize> {
        match self {
            Taxonomy::Coarse => fine.coarse().map(CoarseClass::index),
            Taxonomy::Fine => FineClass::TRAINED.iter().position(|&c| c == fine),
        }
    }
}

/// Synthetic train/test split: `per_class` clouds for every class of the
/// taxonomy, with coarse classes cycling through their fine members.
pub fn synthetic_split(
    taxonomy: Taxonomy,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> (Dataset, Dataset) {
    let classes = taxonomy.class_names();
    let members: Vec<Vec<FineClass>> = (0..classes.len())
        .map(|label| FineClass::TRAINED.iter().copied().filter(|&f| taxonomy.label_of(f) == Some(label)).collect())
        .collect();
    let build = |per_class: usize, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut samples = Vec::with_capacity(per_class * classes.len());
        for i in 0..per_class {
            for (label, fines) in members.iter().enumerate() {
                let fine = fines[i % fines.len()];
                samples.push(LabeledCloud { cloud: sample_box_cloud(fine, &mut rng), label, fine: Some(fine) });
            }
        }
        Dataset { classes: classes.clone(), samples }
    };
    (build(train_per_class, 1), build(test_per_class, 2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub fine: FineClass,
}

/// Parses `<path> <fine_class>` lines; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, ClassifierError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, label) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| ClassifierError::Manifest(format!("line {}: expected `<path> <class>`", i + 1)))?;
        let fine: FineClass = label.parse()?;
        let path = Path::new(path.trim());
        out.push(ManifestEntry { path: if path.is_absolute() { path.to_path_buf() } else { base.join(path) }, fine });
    }
    Ok(out)
}

/// Loads every manifest entry as a labeled cloud. OFF meshes are sampled to
/// `off_points` points; other files are read as `x y z` text.
pub fn load_manifest(
    entries: &[ManifestEntry],
    taxonomy: Taxonomy,
    off_points: usize,
    rng: &mut impl Rng,
) -> Result<Dataset, ClassifierError> {
    let mut samples = Vec::with_capacity(entries.len());
    for e in entries {
        let Some(label) = taxonomy.label_of(e.fine) else {
            continue;
        };
        let bytes = std::fs::read(&e.path)?;
        let is_off = e.path.extension().is_some_and(|x| x.eq_ignore_ascii_case("off"));
        let cloud = if is_off {
            sample_mesh_off(&bytes, off_points, rng)?
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| ClassifierError::Manifest(format!("{} is not UTF-8", e.path.display())))?;
            PointCloud::parse_xyz(&text).map_err(|err| ClassifierError::Manifest(err.to_string()))?
        };
        samples.push(LabeledCloud { cloud, label, fine: Some(e.fine) });
    }
    Ok(Dataset { classes: taxonomy.class_names(), samples })
}
