//! Synthetic scenario datasets and the MRDS dataset file format.
//!
//! A scenario draws features around its own mean and labels every pixel with
//! the argmax of a scenario-specific linear map of the feature, so the
//! correct segmentation depends on both the scenario and the within-scenario
//! variation.
//!
//! MRDS layout (little-endian):
//!
//! ```text
//! "MRDS" | version u32 | n_samples u32 | d u32 | pixels u32 | classes u32 | has_scenario u8
//! per sample: d × f32 feature | pixels × u8 labels | [u16 scenario id]
//! ```

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"MRDS";
pub const DATASET_VERSION: u32 = 1;

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_PIXELS: usize = 64;
pub const DEFAULT_CLASSES: usize = 6;
pub const DEFAULT_SCENARIOS: usize = 3;
pub const DEFAULT_PER_SCENARIO: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub feature: Vec<f32>,
    pub labels: Vec<u8>,
    pub scenario_id: Option<u16>,
}

impl Sample {
    pub fn feature_f64(&self) -> Vec<f64> {
        self.feature.iter().map(|&x| x as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub pixels: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub mean: Vec<f64>,
    /// Standard deviation of the isotropic feature noise.
    pub feature_noise: f64,
    /// Row-major `pixels × classes × d`.
    pub label_map: Vec<f64>,
    pub count: usize,
}

impl ScenarioSpec {
    fn validate(&self, pixels: usize, classes: usize) -> Result<()> {
        let d = self.mean.len();
        if !(self.feature_noise > 0.0) {
            return Err(MoeError::Config(format!("feature noise must be positive, got {}", self.feature_noise)));
        }
        if self.label_map.len() != pixels * classes * d {
            return Err(MoeError::Config(format!(
                "label map has {} entries, expected {pixels}×{classes}×{d}",
                self.label_map.len()
            )));
        }
        Ok(())
    }

    /// Per-pixel argmax (lowest class on ties) of the label map applied to
    /// `feature`.
    pub fn labels_for(&self, feature: &[f64], pixels: usize, classes: usize) -> Vec<u8> {
        let d = self.mean.len();
        (0..pixels)
            .map(|p| {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for c in 0..classes {
                    let row = &self.label_map[(p * classes + c) * d..(p * classes + c + 1) * d];
                    let v: f64 = row.iter().zip(feature).map(|(w, x)| w * x).sum();
                    if v > best_v {
                        best_v = v;
                        best = c;
                    }
                }
                best as u8
            })
            .collect()
    }
}

/// Parameters of the default scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFamily {
    pub scenarios: usize,
    pub per_scenario: usize,
    pub dim: usize,
    pub pixels: usize,
    pub classes: usize,
    /// Standard deviation of each mean coordinate.
    pub mean_scale: f64,
    pub feature_noise: f64,
    /// Number of noise directions the labels respond to.
    pub label_rank: usize,
    /// Scale of the label response to the standardized noise.
    pub noise_response: f64,
}

impl Default for ScenarioFamily {
    fn default() -> Self {
        Self {
            scenarios: DEFAULT_SCENARIOS,
            per_scenario: DEFAULT_PER_SCENARIO,
            dim: DEFAULT_DIM,
            pixels: DEFAULT_PIXELS,
            classes: DEFAULT_CLASSES,
            mean_scale: 3.0,
            feature_noise: 0.5,
            label_rank: 1,
            noise_response: 0.3,
        }
    }
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl ScenarioFamily {
    /// Draws scenario means and label maps.
    ///
    /// Each label map is `A ⊗ m̂ / |m| + Σ_r g B_r ⊗ u_r / σ`, where `m̂` is the
    /// scenario mean direction, `σ` the feature noise, `g` the noise response and the `u_r` are
    /// orthonormal directions orthogonal to `m̂`, so labels combine a
    /// scenario-wide layout with a response to the standardized noise along
    /// `u_r`.
    pub fn specs(&self, seed: u64) -> Result<Vec<ScenarioSpec>> {
        if self.scenarios == 0 {
            return Err(MoeError::Config("at least one scenario is required".into()));
        }
        if self.dim < 2 || self.pixels == 0 || self.classes < 2 || self.classes > 256 {
            return Err(MoeError::Config(format!(
                "need d >= 2, pixels >= 1 and 2 <= classes <= 256, got d={}, pixels={}, classes={}",
                self.dim, self.pixels, self.classes
            )));
        }
        if self.label_rank + 1 > self.dim {
            return Err(MoeError::Config(format!("label rank {} too large for d={}", self.label_rank, self.dim)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7_a710);
        let d = self.dim;
        let specs = (0..self.scenarios)
            .map(|_| {
                let mean: Vec<f64> = (0..d).map(|_| self.mean_scale * rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let mut basis: Vec<Vec<f64>> = vec![mean.iter().map(|x| x / norm).collect()];
                while basis.len() < self.label_rank + 1 {
                    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    for b in &basis {
                        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                    }
                    unit(&mut v);
                    basis.push(v);
                }
                let mut label_map = vec![0.0; self.pixels * self.classes * d];
                for row in label_map.chunks_exact_mut(d) {
                    for (r, dir) in basis.iter().enumerate() {
                        let coeff: f64 = rng.sample(StandardNormal);
                        let coeff = if r == 0 { coeff / norm } else { coeff * self.noise_response / self.feature_noise };
                        row.iter_mut().zip(dir).for_each(|(w, u)| *w += coeff * u);
                    }
                }
                ScenarioSpec { mean, feature_noise: self.feature_noise, label_map, count: self.per_scenario }
            })
            .collect();
        Ok(specs)
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        generate_synthetic(&self.specs(seed)?, self.pixels, self.classes, seed)
    }
}

/// Draws `count` samples per scenario: `mean + noise · N(0, I)`, rounded to
/// f32, labelled by the scenario's label map applied to the rounded feature.
pub fn generate_synthetic(specs: &[ScenarioSpec], pixels: usize, classes: usize, seed: u64) -> Result<Dataset> {
    let first = specs.first().ok_or_else(|| MoeError::Config("at least one scenario is required".into()))?;
    let dim = first.mean.len();
    if dim < 2 {
        return Err(MoeError::Config(format!("feature dimension must be at least 2, got {dim}")));
    }
    if !(2..=256).contains(&classes) {
        return Err(MoeError::Config(format!("class count must lie in [2, 256], got {classes}")));
    }
    if specs.len() > u16::MAX as usize + 1 {
        return Err(MoeError::Config("too many scenarios for a u16 id".into()));
    }
    for s in specs {
        if s.mean.len() != dim {
            return Err(MoeError::Config(format!("scenario means disagree on dimension ({} vs {dim})", s.mean.len())));
        }
        s.validate(pixels, classes)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(specs.iter().map(|s| s.count).sum());
    for (id, spec) in specs.iter().enumerate() {
        for _ in 0..spec.count {
            let feature: Vec<f32> = spec
                .mean
                .iter()
                .map(|m| (m + spec.feature_noise * rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();
            let wide: Vec<f64> = feature.iter().map(|&x| x as f64).collect();
            let labels = spec.labels_for(&wide, pixels, classes);
            samples.push(Sample { feature, labels, scenario_id: Some(id as u16) });
        }
    }
    Ok(Dataset { dim, pixels, classes, samples })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_scenarios(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.scenario_id.is_some())
    }

    /// Seeded split into `(held, rest)` where `held` takes `per_scenario`
    /// shuffled samples of each scenario. Samples without scenario ids go to
    /// `rest`.
    pub fn split_per_scenario(&self, per_scenario: usize, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut taken = std::collections::HashMap::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in order {
            let s = &self.samples[i];
            match s.scenario_id {
                Some(id) if *taken.entry(id).or_insert(0usize) < per_scenario => {
                    *taken.get_mut(&id).unwrap() += 1;
                    a.push(s.clone());
                }
                _ => b.push(s.clone()),
            }
        }
        let wrap = |samples| Dataset { dim: self.dim, pixels: self.pixels, classes: self.classes, samples };
        (wrap(a), wrap(b))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            ensure_dim(self.dim, s.feature.len(), &format!("sample {i} feature"))?;
            ensure_dim(self.pixels, s.labels.len(), &format!("sample {i} labels"))?;
            if s.feature.iter().any(|x| !x.is_finite()) {
                return Err(MoeError::InvalidInput(format!("sample {i} has a non-finite feature")));
            }
            if let Some(l) = s.labels.iter().find(|&&l| l as usize >= self.classes) {
                return Err(MoeError::InvalidInput(format!("sample {i} label {l} outside [0, {})", self.classes)));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let has_scenario = self.has_scenarios();
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| MoeError::InvalidInput(format!("{what} {v} does not fit in u32")))
        };
        let per_sample = self.dim * 4 + self.pixels + if has_scenario { 2 } else { 0 };
        let mut out = Vec::with_capacity(25 + per_sample * self.len());
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        for (v, what) in [(self.len(), "sample count"), (self.dim, "dimension"), (self.pixels, "pixels"), (self.classes, "classes")] {
            out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
        }
        out.push(has_scenario as u8);
        for s in &self.samples {
            for x in &s.feature {
                out.extend_from_slice(&x.to_le_bytes());
            }
            out.extend_from_slice(&s.labels);
            if has_scenario {
                out.extend_from_slice(&s.scenario_id.unwrap_or(0).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(4, "magic")?;
        if magic != DATASET_MAGIC {
            return Err(MoeError::Format { offset: 0, message: format!("bad magic {magic:?}, expected \"MRDS\"") });
        }
        let version = r.u32("version")?;
        if version != DATASET_VERSION {
            return Err(MoeError::Format { offset: 4, message: format!("unsupported dataset version {version}") });
        }
        let n = r.u32("sample count")? as usize;
        let dim = r.u32("dimension")? as usize;
        let pixels = r.u32("pixels")? as usize;
        let classes = r.u32("classes")? as usize;
        let flag_at = r.offset();
        let has_scenario = match r.u8("scenario flag")? {
            0 => false,
            1 => true,
            other => return Err(MoeError::Format { offset: flag_at, message: format!("scenario flag must be 0 or 1, got {other}") }),
        };
        let per_sample = dim * 4 + pixels + if has_scenario { 2 } else { 0 };
        if r.remaining() < n.saturating_mul(per_sample) {
            return Err(MoeError::Format {
                offset: bytes.len() as u64,
                message: format!("truncated: {n} samples need {} bytes, {} remain", n * per_sample, r.remaining()),
            });
        }
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let feature = (0..dim).map(|_| r.f32("feature")).collect::<Result<Vec<f32>>>()?;
            let label_at = r.offset();
            let labels = r.take(pixels, "labels")?.to_vec();
            if let Some(l) = labels.iter().find(|&&l| l as usize >= classes) {
                return Err(MoeError::Format { offset: label_at, message: format!("label {l} outside [0, {classes})") });
            }
            let scenario_id = if has_scenario { Some(r.u16("scenario id")?) } else { None };
            samples.push(Sample { feature, labels, scenario_id });
        }
        if r.remaining() != 0 {
            return Err(MoeError::Format { offset: r.offset(), message: format!("{} trailing bytes", r.remaining()) });
        }
        Ok(Dataset { dim, pixels, classes, samples })
    }
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset.to_bytes()?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_bytes(&std::fs::read(path)?)
}

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(MoeError::Format {
                offset: self.pos as u64,
                message: format!("truncated while reading {what}: need {n} bytes, {} remain", self.remaining()),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
