//! Two-layer ReLU binary classifier.
//!
//! `score(x) = w2 · relu(W1 x + b1) + b2`, class 1 iff `score >= 0`
//! (equivalently `sigmoid(score) >= 0.5`).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, NormParam};

/// Conventional extension for serialized classifiers.
pub const MODEL_EXTENSION: &str = "model.json";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field `{field}` has the wrong shape: {detail}")]
    Shape { field: &'static str, detail: String },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("training data is empty")]
    EmptyData,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    Zero = 0,
    One = 1,
}

impl Class {
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Class::One
        } else {
            Class::Zero
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Class::Zero => Class::One,
            Class::One => Class::Zero,
        }
    }

    /// `+1` for class one, `-1` for class zero; multiplies a score so that
    /// "more confidently this class" is always positive.
    pub fn sign(self) -> f64 {
        match self {
            Class::Zero => -1.0,
            Class::One => 1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Self {
        if v == 0 {
            Class::Zero
        } else {
            Class::One
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: Class,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { hidden_width: 16, epochs: 200, step_size: 0.05, batch_size: 32, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_width == 0 || self.batch_size == 0 || !(self.step_size > 0.0) {
            return Err(ModelError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Element-wise perturbation radius applied to every weight and bias.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct WeightInterval {
    pub radius: f64,
}

impl WeightInterval {
    pub fn new(radius: f64) -> Self {
        assert!(radius >= 0.0, "weight radius must be non-negative");
        WeightInterval { radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    n: usize,
    hidden: usize,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    #[serde(default)]
    norm_params: Option<Vec<NormParam>>,
    #[serde(default)]
    seed: u64,
}

impl Classifier {
    /// Builds a classifier from `W1` (hidden x n), `b1`, `w2` and `b2`.
    pub fn new(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self, ModelError> {
        let n = w1.first().map_or(0, Vec::len);
        let clf = Classifier { n, hidden: w1.len(), w1, b1, w2, b2, norm_params: None, seed: 0 };
        clf.validate()?;
        Ok(clf)
    }

    /// `score(x, y) = relu(x + y) - 4`: class 1 exactly when `x + y >= 4`
    /// on the non-negative quadrant.
    pub fn fixture() -> Self {
        Classifier::new(vec![vec![1.0, 1.0]], vec![0.0], vec![1.0], -4.0).expect("fixture shapes")
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.w1.len() != self.hidden {
            return Err(ModelError::Shape {
                field: "W1",
                detail: format!("{} rows for hidden width {}", self.w1.len(), self.hidden),
            });
        }
        if let Some((j, row)) = self.w1.iter().enumerate().find(|(_, r)| r.len() != self.n) {
            return Err(ModelError::Shape {
                field: "W1",
                detail: format!("row {j} has {} columns, expected {}", row.len(), self.n),
            });
        }
        if self.b1.len() != self.hidden {
            return Err(ModelError::Shape {
                field: "b1",
                detail: format!("length {} for hidden width {}", self.b1.len(), self.hidden),
            });
        }
        if self.w2.len() != self.hidden {
            return Err(ModelError::Shape {
                field: "w2",
                detail: format!("length {} for hidden width {}", self.w2.len(), self.hidden),
            });
        }
        if let Some(p) = &self.norm_params {
            if p.len() != self.n {
                return Err(ModelError::Shape {
                    field: "norm_params",
                    detail: format!("length {} for {} features", p.len(), self.n),
                });
            }
        }
        let finite = self.w1.iter().flatten().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite())
            && self.b2.is_finite();
        if !finite {
            return Err(ModelError::Shape { field: "W1", detail: "non-finite parameter".into() });
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn w1(&self) -> &[Vec<f64>] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn norm_params(&self) -> Option<&[NormParam]> {
        self.norm_params.as_deref()
    }

    pub fn with_norm_params(mut self, params: Vec<NormParam>) -> Result<Self, ModelError> {
        self.norm_params = Some(params);
        self.validate()?;
        Ok(self)
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n {
            return Err(ModelError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    pub fn pre_activations(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Raw score; panics on a dimension mismatch (use [`Classifier::predict`]
    /// for a checked call).
    pub fn score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        self.w1
            .iter()
            .zip(&self.b1)
            .zip(&self.w2)
            .map(|((row, b), w)| {
                let a = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                w * a.max(0.0)
            })
            .sum::<f64>()
            + self.b2
    }

    pub fn class_of(&self, x: &[f64]) -> Class {
        Class::from_score(self.score(x))
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        self.check_dim(x)?;
        let score = self.score(x);
        Ok(Prediction { class: Class::from_score(score), score })
    }

    /// Gradient of the raw score; inactive units (pre-activation <= 0)
    /// contribute nothing.
    pub fn score_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for ((row, a), w) in self.w1.iter().zip(self.pre_activations(x)).zip(&self.w2) {
            if a > 0.0 {
                for (gi, wi) in g.iter_mut().zip(row) {
                    *gi += w * wi;
                }
            }
        }
        g
    }

    /// Gradient of `sigmoid(score(x))` with respect to `x`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        let p = self.probability(x);
        let scale = p * (1.0 - p);
        Ok(self.score_gradient(x).into_iter().map(|g| g * scale).collect())
    }

    /// Sound bounds on the score at `x` over every classifier whose
    /// parameters lie within `±wi.radius` of this one, by interval arithmetic.
    pub fn interval_score(&self, x: &[f64], wi: WeightInterval) -> Result<(f64, f64), ModelError> {
        self.check_dim(x)?;
        let r = wi.radius;
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let spread = r * (l1 + 1.0);
        let (mut lo, mut hi) = (self.b2 - r, self.b2 + r);
        for (a, w) in self.pre_activations(x).into_iter().zip(&self.w2) {
            let (h_lo, h_hi) = ((a - spread).max(0.0), (a + spread).max(0.0));
            let (p_lo, p_hi) = interval_mul((w - r, w + r), (h_lo, h_hi));
            lo += p_lo;
            hi += p_hi;
        }
        Ok((lo, hi))
    }

    /// Copy with every parameter shifted by an independent draw from
    /// `U(-radius, radius)`.
    pub fn perturbed(&self, radius: f64, rng: &mut impl Rng) -> Classifier {
        let mut jitter = |v: f64| if radius > 0.0 { v + rng.random_range(-radius..=radius) } else { v };
        let w1 = self.w1.iter().map(|row| row.iter().map(|&v| jitter(v)).collect()).collect();
        let b1 = self.b1.iter().map(|&v| jitter(v)).collect();
        let w2 = self.w2.iter().map(|&v| jitter(v)).collect();
        let b2 = jitter(self.b2);
        Classifier { w1, b1, w2, b2, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let clf: Classifier = serde_json::from_str(s)?;
        clf.validate()?;
        Ok(clf)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Classifier::from_json(&s)
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        if ds.is_empty() {
            return 0.0;
        }
        let hits = ds
            .features
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &y)| self.class_of(x).as_u8() == y)
            .count();
        hits as f64 / ds.n_rows() as f64
    }

    /// Mean binary cross-entropy of `sigmoid(score)` against the labels.
    pub fn loss(&self, ds: &Dataset) -> f64 {
        let total: f64 = ds.features.iter().zip(&ds.labels).map(|(x, &y)| bce(self.score(x), y)).sum();
        total / ds.n_rows().max(1) as f64
    }
}

fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Cross-entropy on logits, stable for large |s|.
fn bce(s: f64, y: u8) -> f64 {
    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    if y == 1 {
        softplus(-s)
    } else {
        softplus(s)
    }
}

/// Glorot-uniform initialization from `seed`; biases start at zero.
pub fn init_classifier(n: usize, hidden: usize, seed: u64) -> Classifier {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim1 = (6.0 / (n + hidden) as f64).sqrt();
    let lim2 = (6.0 / (hidden + 1) as f64).sqrt();
    let w1 = (0..hidden).map(|_| (0..n).map(|_| rng.random_range(-lim1..=lim1)).collect()).collect();
    let w2 = (0..hidden).map(|_| rng.random_range(-lim2..=lim2)).collect();
    Classifier {
        n,
        hidden,
        w1,
        b1: vec![0.0; hidden],
        w2,
        b2: 0.0,
        norm_params: None,
        seed,
    }
}

/// Mini-batch gradient descent on binary cross-entropy.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<Classifier, ModelError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(ModelError::EmptyData);
    }
    if ds.class_counts().contains(&0) {
        return Err(ModelError::SingleClass);
    }
    let (n, hidden) = (ds.n_features(), cfg.hidden_width);
    let mut clf = init_classifier(n, hidden, cfg.seed);
    clf.norm_params = Some(ds.norm_params.clone());
    // separate stream for batch order so epochs=0 leaves the init untouched
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();

    let mut g_w1 = vec![vec![0.0; n]; hidden];
    let mut g_b1 = vec![0.0; hidden];
    let mut g_w2 = vec![0.0; hidden];
    let mut act = vec![0.0; hidden];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            g_w1.iter_mut().for_each(|r| r.fill(0.0));
            g_b1.fill(0.0);
            g_w2.fill(0.0);
            let mut g_b2 = 0.0;
            for &i in batch {
                let x = &ds.features[i];
                for (j, a) in act.iter_mut().enumerate() {
                    *a = clf.w1[j].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + clf.b1[j];
                }
                let s: f64 = act.iter().zip(&clf.w2).map(|(a, w)| w * a.max(0.0)).sum::<f64>() + clf.b2;
                let d = sigmoid(s) - f64::from(ds.labels[i]);
                g_b2 += d;
                for j in 0..hidden {
                    if act[j] > 0.0 {
                        g_w2[j] += d * act[j];
                        let da = d * clf.w2[j];
                        g_b1[j] += da;
                        for (g, v) in g_w1[j].iter_mut().zip(x) {
                            *g += da * v;
                        }
                    }
                }
            }
            let step = cfg.step_size / batch.len() as f64;
            for j in 0..hidden {
                for (w, g) in clf.w1[j].iter_mut().zip(&g_w1[j]) {
                    *w -= step * g;
                }
                clf.b1[j] -= step * g_b1[j];
                clf.w2[j] -= step * g_w2[j];
            }
            clf.b2 -= step * g_b2;
        }
    }
    Ok(clf)
}
