//! Robustness machinery shared by the robust explainers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standard_normal, Dataset};
use crate::model::{sigmoid, train, Class, Classifier, ModelError, TrainConfig, WeightInterval};

const MAX_BOOTSTRAP_ATTEMPTS: usize = 10;

/// True iff every classifier within `±radius` of `clf` (element-wise on all
/// parameters) assigns `x` to `target`, as proven by interval bounds.
/// Sound but incomplete.
pub fn certify(clf: &Classifier, x: &[f64], target: Class, radius: f64) -> bool {
    let Ok((lo, hi)) = clf.interval_score(x, WeightInterval::new(radius)) else {
        return false;
    };
    match target {
        Class::One => lo > 0.0,
        Class::Zero => hi < 0.0,
    }
}

/// A family of plausible models around a trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSet {
    /// Every classifier within an element-wise weight box; used via
    /// [`certify`].
    IntervalCertified { radius: f64 },
    /// Uniformly perturbed copies; member 0 is the unperturbed base model.
    Sampled { members: Vec<Classifier>, radius: f64, seed: u64 },
    /// Models retrained on bootstrap resamples.
    Retrained { members: Vec<Classifier>, seeds: Vec<u64> },
}

impl ModelSet {
    pub fn members(&self) -> &[Classifier] {
        match self {
            ModelSet::IntervalCertified { .. } => &[],
            ModelSet::Sampled { members, .. } | ModelSet::Retrained { members, .. } => members,
        }
    }

    pub fn len(&self) -> usize {
        self.members().len()
    }

    pub fn is_empty(&self) -> bool {
        self.members().is_empty()
    }

    /// Whether every member (or, for an interval set, the certificate)
    /// agrees that `x` belongs to `target`. `base` is only consulted for
    /// interval sets.
    pub fn all_predict(&self, base: &Classifier, x: &[f64], target: Class) -> bool {
        match self {
            ModelSet::IntervalCertified { radius } => certify(base, x, target, *radius),
            _ => self.members().iter().all(|m| m.class_of(x) == target),
        }
    }
}

/// `count` models: the base classifier followed by `count - 1` copies with
/// every parameter shifted by `U(-radius, radius)` noise.
pub fn sample_models(clf: &Classifier, count: usize, radius: f64, seed: u64) -> ModelSet {
    assert!(count >= 1, "a sampled model set needs at least one member");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(count);
    members.push(clf.clone());
    for _ in 1..count {
        members.push(clf.perturbed(radius, &mut rng));
    }
    ModelSet::Sampled { members, radius, seed }
}

/// `size` classifiers trained on bootstrap resamples of `ds` (or on `ds`
/// itself with shifted seeds when `bootstrap` is false). Member `e` uses
/// training seed `cfg.seed + e`; members train in parallel with identical
/// results to a sequential run.
pub fn retrain_ensemble(
    ds: &Dataset,
    cfg: &TrainConfig,
    size: usize,
    seed: u64,
    bootstrap: bool,
) -> Result<ModelSet, ModelError> {
    assert!(size >= 1, "an ensemble needs at least one member");
    let seeds: Vec<u64> = (0..size as u64).map(|e| cfg.seed.wrapping_add(e)).collect();
    let members = seeds
        .par_iter()
        .enumerate()
        .map(|(e, &member_seed)| {
            let member_cfg = TrainConfig { seed: member_seed, ..*cfg };
            if !bootstrap {
                return train(ds, &member_cfg);
            }
            let rows = ds.n_rows();
            for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS as u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((e as u64) << 16 | attempt),
                );
                let idx: Vec<usize> = (0..rows).map(|_| rng.random_range(0..rows)).collect();
                let sample = ds.subset(&idx);
                if !sample.class_counts().contains(&0) {
                    return train(&sample, &member_cfg);
                }
            }
            Err(ModelError::SingleClass)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelSet::Retrained { members, seeds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityParams {
    /// Standard deviation σ of the Gaussian input neighbourhood.
    pub noise_std: f64,
    /// Number of neighbourhood samples S.
    pub samples: usize,
    /// Penalty k on the standard deviation.
    pub k: f64,
    /// Acceptance threshold τ.
    pub threshold: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams { noise_std: 0.05, samples: 100, k: 1.0, threshold: 0.6 }
    }
}

/// Mean minus `k` standard deviations of the target-class probability over
/// `S` draws from `N(x, σ²I)`.
pub fn stability_score(clf: &Classifier, x: &[f64], target: Class, params: &StabilityParams, seed: u64) -> f64 {
    assert!(params.noise_std > 0.0 && params.samples >= 2, "invalid stability params");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = x.to_vec();
    let probs: Vec<f64> = (0..params.samples)
        .map(|_| {
            for (p, &v) in point.iter_mut().zip(x) {
                *p = v + params.noise_std * standard_normal(&mut rng);
            }
            let p1 = sigmoid(clf.score(&point));
            match target {
                Class::One => p1,
                Class::Zero => 1.0 - p1,
            }
        })
        .collect();
    let s = probs.len() as f64;
    let mean = probs.iter().sum::<f64>() / s;
    let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / s;
    mean - params.k * var.sqrt()
}
