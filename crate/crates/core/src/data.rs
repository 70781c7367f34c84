//! Synthetic dataset generators, CSV ingestion, and unlabeled auxiliary pools.
//!
//! CSV format: comma-separated, `.` decimal separator, one sample per row,
//! no header. When labeled, the label is the last column and must be a
//! nonnegative integer.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Feature matrix with one global class id per row.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<u32>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<u32>, split: Split) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::input("dataset must contain at least one sample"));
        }
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Distinct class ids present, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }

    /// Restrict to samples whose label is in `keep`; preserves row order.
    pub fn filter_classes(&self, keep: &[u32]) -> Result<LabeledDataset> {
        let keep: BTreeSet<u32> = keep.iter().copied().collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        if idx.is_empty() {
            return Err(Error::input("no samples left after class filter"));
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(self.features.select_rows(&idx), labels, self.split)
    }

    /// Concatenate datasets with identical dimensionality.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::input("nothing to concatenate"))?;
        let dim = first.dim();
        let mut rows: Vec<Vec<f32>> = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != dim {
                return Err(Error::shape("dimension mismatch in concat"));
            }
            for i in 0..p.len() {
                rows.push(p.features.row(i).to_vec());
                labels.push(p.labels[i]);
            }
        }
        LabeledDataset::new(Matrix::from_rows(&rows)?, labels, first.split)
    }
}

/// Unlabeled samples used only as distillation inputs.
#[derive(Debug, Clone)]
pub struct AuxiliaryPool {
    pub features: Matrix,
}

impl AuxiliaryPool {
    pub fn new(features: Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::input("auxiliary pool must be nonempty"));
        }
        Ok(AuxiliaryPool { features })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    GaussianBlobs,
    RingMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxKind {
    /// Uniform over an inflated bounding box of the class mixture.
    BroadUniform,
    /// Same mixture components with dispersion scaled up 3x.
    InflatedMixture,
    /// Extra mixture components disjoint from the target classes.
    HeldoutClasses,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub classes: u32,
    pub samples_per_class: usize,
    pub test_samples_per_class: usize,
    pub dim: usize,
    pub dispersion: f32,
    pub seed: u64,
    pub aux_kind: AuxKind,
    pub aux_size: usize,
}

impl GeneratorSpec {
    fn validate(&self) -> Result<()> {
        if self.classes == 0
            || self.samples_per_class == 0
            || self.test_samples_per_class == 0
            || self.aux_size == 0
        {
            return Err(Error::config("generator counts must be positive"));
        }
        if self.dim < 2 {
            return Err(Error::config("generator needs dim >= 2"));
        }
        if !(self.dispersion > 0.0) {
            return Err(Error::config("dispersion must be > 0"));
        }
        Ok(())
    }
}

/// Radius of the circle the class centers sit on, in feature units.
pub const CENTER_RADIUS: f32 = 2.0;

/// Center of target class `c` (first two dims on a circle, rest zero).
pub fn class_center(spec: &GeneratorSpec, c: u32) -> Vec<f32> {
    let angle = 2.0 * std::f32::consts::PI * c as f32 / spec.classes as f32;
    let mut center = vec![0.0; spec.dim];
    match spec.kind {
        GeneratorKind::GaussianBlobs => {
            center[0] = CENTER_RADIUS * angle.cos();
            center[1] = CENTER_RADIUS * angle.sin();
        }
        GeneratorKind::RingMixture => {
            // rings share a center; radius encodes the class
            center[0] = 0.0;
            center[1] = 0.0;
        }
    }
    center
}

fn sample_point(spec: &GeneratorSpec, c: u32, dispersion: f32, rng: &mut impl Rng) -> Vec<f32> {
    match spec.kind {
        GeneratorKind::GaussianBlobs => {
            let center = class_center(spec, c);
            (0..spec.dim)
                .map(|j| center[j] + dispersion * gaussian(rng))
                .collect()
        }
        GeneratorKind::RingMixture => {
            let radius = 0.8 + 0.8 * c as f32 + dispersion * gaussian(rng);
            let theta: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
            let mut p = vec![0.0; spec.dim];
            p[0] = radius * theta.cos();
            p[1] = radius * theta.sin();
            for v in p.iter_mut().skip(2) {
                *v = dispersion * gaussian(rng);
            }
            p
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f32 {
    // Box-Muller; two uniforms per call keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

/// Generate a train split, a test split, and an unlabeled auxiliary pool.
pub fn generate(spec: &GeneratorSpec) -> Result<(LabeledDataset, LabeledDataset, AuxiliaryPool)> {
    spec.validate()?;
    let train = generate_split(spec, spec.samples_per_class, Split::Train, 0)?;
    let test = generate_split(spec, spec.test_samples_per_class, Split::Test, 1)?;
    let aux = generate_aux(spec)?;
    Ok((train, test, aux))
}

fn generate_split(
    spec: &GeneratorSpec,
    per_class: usize,
    split: Split,
    stream: u64,
) -> Result<LabeledDataset> {
    let mut rows = Vec::with_capacity(per_class * spec.classes as usize);
    let mut labels = Vec::with_capacity(rows.capacity());
    for c in 0..spec.classes {
        let mut rng = rng_from(derive_seed(spec.seed, stream, c as u64));
        for _ in 0..per_class {
            rows.push(sample_point(spec, c, spec.dispersion, &mut rng));
            labels.push(c);
        }
    }
    LabeledDataset::new(Matrix::from_rows(&rows)?, labels, split)
}

fn generate_aux(spec: &GeneratorSpec) -> Result<AuxiliaryPool> {
    let mut rng = rng_from(derive_seed(spec.seed, 2, 0));
    let mut rows = Vec::with_capacity(spec.aux_size);
    match spec.aux_kind {
        AuxKind::BroadUniform => {
            let half = CENTER_RADIUS + 4.0 * spec.dispersion + 1.0;
            for _ in 0..spec.aux_size {
                rows.push((0..spec.dim).map(|_| rng.gen_range(-half..half)).collect());
            }
        }
        AuxKind::InflatedMixture => {
            for _ in 0..spec.aux_size {
                let c = rng.gen_range(0..spec.classes);
                rows.push(sample_point(spec, c, 3.0 * spec.dispersion, &mut rng));
            }
        }
        AuxKind::HeldoutClasses => {
            // components at the midpoints between consecutive target centers,
            // so the pool covers the target region without touching its classes
            let mut heldout = spec.clone();
            heldout.classes = 2 * spec.classes;
            for _ in 0..spec.aux_size {
                let c = 2 * rng.gen_range(0..spec.classes) + 1;
                rows.push(sample_point(&heldout, c, spec.dispersion, &mut rng));
            }
        }
    }
    AuxiliaryPool::new(Matrix::from_rows(&rows)?)
}

/// Uniform subsample without replacement, deterministic per seed.
pub fn subsample_aux(pool: &AuxiliaryPool, n: usize, seed: u64) -> Result<AuxiliaryPool> {
    let m = pool.len();
    if n == 0 || n > m {
        return Err(Error::input(format!(
            "cannot draw {} samples from a pool of {}",
            n, m
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = rng_from(seed);
    // partial Fisher-Yates: first n slots are a uniform sample
    for i in 0..n {
        let j = rng.gen_range(i..m);
        idx.swap(i, j);
    }
    AuxiliaryPool::new(pool.features.select_rows(&idx[..n]))
}

fn parse_rows(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = Vec::new();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("non-numeric cell {:?}", cell.trim()),
            })?;
            vals.push(v);
        }
        if let Some((_, first)) = rows.first() {
            let width: usize = Vec::len(first);
            if vals.len() != width {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("row has {} cells, expected {}", vals.len(), width),
                });
            }
        }
        rows.push((i + 1, vals));
    }
    if rows.is_empty() {
        return Err(Error::input(format!("{} contains no data rows", path.display())));
    }
    Ok(rows)
}

/// Load a labeled CSV; the label is the last column.
pub fn load_labeled_csv(path: &Path, split: Split) -> Result<LabeledDataset> {
    let rows = parse_rows(path)?;
    if rows[0].1.len() < 2 {
        return Err(Error::Parse {
            line: rows[0].0,
            msg: "labeled rows need at least one feature and a label".into(),
        });
    }
    let mut feats = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, vals) in rows {
        let (features, label) = vals.split_at(vals.len() - 1);
        let l = label[0];
        if l < 0.0 || l.fract() != 0.0 || l > u32::MAX as f64 {
            return Err(Error::Parse {
                line,
                msg: format!("label {} is not a nonnegative integer", l),
            });
        }
        feats.push(features.iter().map(|&v| v as f32).collect());
        labels.push(l as u32);
    }
    LabeledDataset::new(Matrix::from_rows(&feats)?, labels, split)
}

/// Load an unlabeled CSV as an auxiliary pool.
pub fn load_aux_csv(path: &Path) -> Result<AuxiliaryPool> {
    let rows = parse_rows(path)?;
    let feats: Vec<Vec<f32>> = rows
        .into_iter()
        .map(|(_, vals)| vals.into_iter().map(|v| v as f32).collect())
        .collect();
    AuxiliaryPool::new(Matrix::from_rows(&feats)?)
}

fn write_csv(path: &Path, features: &Matrix, labels: Option<&[u32]>) -> Result<()> {
    let mut out = String::new();
    for i in 0..features.rows() {
        for (j, v) in features.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // round-trippable f32 formatting
            let _ = write!(out, "{}", v);
        }
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn save_labeled_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    write_csv(path, &data.features, Some(&data.labels))
}

pub fn save_aux_csv(path: &Path, pool: &AuxiliaryPool) -> Result<()> {
    write_csv(path, &pool.features, None)
}
