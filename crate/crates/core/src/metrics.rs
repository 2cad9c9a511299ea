//! Batch evaluation: validity, cost, plausibility and rank statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::explainers::{Explanation, Status};
use crate::model::{Class, Classifier};

/// Upper bound on local reachability density when a neighbourhood is all
/// duplicates.
pub const LRD_CAP: f64 = 1e12;
/// Largest combined sample size for which p-values are enumerated exactly.
pub const EXACT_LIMIT: usize = 12;
pub const DEFAULT_LOF_NEIGHBORS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("lof needs more reference rows than neighbours (k = {k}, rows = {rows})")]
    TooFewReferenceRows { k: usize, rows: usize },
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricError> {
    if a == 0 || b == 0 {
        return Err(MetricError::EmptyBatch);
    }
    if a != b {
        return Err(MetricError::LengthMismatch(a, b));
    }
    Ok(())
}

/// Fraction of explanations whose point is classified as its target.
/// Explanations without a point count as failures.
pub fn vcx(clf: &Classifier, explanations: &[Explanation], targets: &[Class]) -> Result<f64, MetricError> {
    check_lengths(explanations.len(), targets.len())?;
    let hits = explanations
        .iter()
        .zip(targets)
        .filter(|(e, &t)| e.has_point() && clf.class_of(&e.counterfactual) == t)
        .count();
    Ok(hits as f64 / explanations.len() as f64)
}

/// `x + δ` clipped to the unit box, and whether clipping changed anything.
pub fn apply_recourse(x: &[f64], delta: &[f64]) -> (Vec<f64>, bool) {
    let mut clipped = false;
    let out = x
        .iter()
        .zip(delta)
        .map(|(x, d)| {
            let v = x + d;
            let c = v.clamp(0.0, 1.0);
            clipped |= c != v;
            c
        })
        .collect();
    (out, clipped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecourseValidity {
    pub vrc: f64,
    /// Instances where `x + δ` left the unit box.
    pub n_clipped: usize,
}

/// Fraction of instances where applying the recourse to the true input
/// reaches the target class.
pub fn vrc_detailed(
    clf: &Classifier,
    true_inputs: &[Vec<f64>],
    explanations: &[Explanation],
    targets: &[Class],
) -> Result<RecourseValidity, MetricError> {
    check_lengths(true_inputs.len(), explanations.len())?;
    check_lengths(explanations.len(), targets.len())?;
    let mut hits = 0;
    let mut n_clipped = 0;
    for ((x, e), &t) in true_inputs.iter().zip(explanations).zip(targets) {
        if !e.has_point() {
            continue;
        }
        let (applied, clipped) = apply_recourse(x, &e.delta);
        n_clipped += clipped as usize;
        hits += (clf.class_of(&applied) == t) as usize;
    }
    Ok(RecourseValidity { vrc: hits as f64 / explanations.len() as f64, n_clipped })
}

pub fn vrc(
    clf: &Classifier,
    true_inputs: &[Vec<f64>],
    explanations: &[Explanation],
    targets: &[Class],
) -> Result<f64, MetricError> {
    vrc_detailed(clf, true_inputs, explanations, targets).map(|v| v.vrc)
}

/// Population mean and standard deviation; `(NaN, NaN)` for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Mean and population std of `‖x − x′‖₁` against the true inputs, over
/// explanations that produced a point.
pub fn cost(true_inputs: &[Vec<f64>], explanations: &[Explanation]) -> Result<(f64, f64), MetricError> {
    check_lengths(true_inputs.len(), explanations.len())?;
    let d: Vec<f64> = true_inputs
        .iter()
        .zip(explanations)
        .filter(|(_, e)| e.has_point())
        .map(|(x, e)| l1_distance(x, &e.counterfactual))
        .collect();
    Ok(mean_std(&d))
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Indices of the k-distance neighbourhood of `dists` (ties at the k-th
/// distance included) and the k-distance itself.
fn neighbourhood(dists: &[(f64, usize)], k: usize) -> (f64, Vec<usize>) {
    let mut sorted = dists.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let kd = sorted[k - 1].0;
    let members = sorted.iter().take_while(|(d, _)| *d <= kd).map(|&(_, i)| i).collect();
    (kd, members)
}

/// Local outlier factor against a fixed reference set, with ℓ2 distances.
/// Scores are reported negated: about -1 for inliers, lower for outliers.
#[derive(Debug, Clone)]
pub struct Lof {
    reference: Vec<Vec<f64>>,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

impl Lof {
    pub fn fit(reference: &[Vec<f64>], k: usize) -> Result<Self, MetricError> {
        if k == 0 || k >= reference.len() {
            return Err(MetricError::TooFewReferenceRows { k, rows: reference.len() });
        }
        let n = reference.len();
        let hoods: Vec<(f64, Vec<usize>)> = (0..n)
            .map(|i| {
                let d: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (l2(&reference[i], &reference[j]), j)).collect();
                neighbourhood(&d, k)
            })
            .collect();
        let k_distance: Vec<f64> = hoods.iter().map(|h| h.0).collect();
        let lrd = (0..n)
            .map(|i| {
                let hood = &hoods[i].1;
                let reach: f64 =
                    hood.iter().map(|&o| k_distance[o].max(l2(&reference[i], &reference[o]))).sum();
                density(reach / hood.len() as f64)
            })
            .collect();
        Ok(Lof { reference: reference.to_vec(), k, k_distance, lrd })
    }

    /// `k = min(20, rows - 1)`.
    pub fn with_default_k(reference: &[Vec<f64>]) -> Result<Self, MetricError> {
        Lof::fit(reference, DEFAULT_LOF_NEIGHBORS.min(reference.len().saturating_sub(1)))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The classic outlier factor of `x`, not negated.
    pub fn factor(&self, x: &[f64]) -> f64 {
        let d: Vec<(f64, usize)> = self.reference.iter().enumerate().map(|(j, r)| (l2(x, r), j)).collect();
        let (_, hood) = neighbourhood(&d, self.k);
        let reach: f64 = hood.iter().map(|&o| self.k_distance[o].max(d[o].0)).sum();
        let own = density(reach / hood.len() as f64);
        hood.iter().map(|&o| self.lrd[o]).sum::<f64>() / (hood.len() as f64 * own)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        -self.factor(x)
    }
}

fn density(mean_reach: f64) -> f64 {
    if mean_reach > 0.0 {
        (1.0 / mean_reach).min(LRD_CAP)
    } else {
        LRD_CAP
    }
}

/// Ranks starting at 1 with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Two-sided Mann–Whitney U test. Small tie-free samples get the exact null
/// distribution, everything else a tie- and continuity-corrected normal
/// approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let (na, nb) = (a.len(), b.len());
    let rank_sum: f64 = ranks[..na].iter().sum();
    let u = rank_sum - (na * (na + 1)) as f64 / 2.0;
    let tie_term = tie_term(&all);
    if na + nb <= EXACT_LIMIT && tie_term == 0.0 {
        return Ok(MannWhitney { u, p_two_sided: exact_p_value(u, na, nb), exact: true });
    }
    Ok(MannWhitney { u, p_two_sided: normal_p_value(u, na, nb, tie_term), exact: false })
}

/// `Σ (t³ − t)` over groups of tied values.
pub fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|x, y| x == y)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

/// Counts of each U value over all `C(na + nb, na)` rank assignments.
fn u_distribution(na: usize, nb: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i first-sample and j second-sample items
    // with statistic u
    let max_u = na * nb;
    let mut f = vec![vec![vec![0.0; max_u + 1]; nb + 1]; na + 1];
    for j in 0..=nb {
        f[0][j][0] = 1.0;
    }
    for i in 1..=na {
        f[i][0][0] = 1.0;
        for j in 1..=nb {
            for u in 0..=i * j {
                // the largest item belongs either to the first sample (it
                // beats all j others) or to the second
                let from_a = if u >= j { f[i - 1][j][u - j] } else { 0.0 };
                f[i][j][u] = from_a + f[i][j - 1][u];
            }
        }
    }
    f[na][nb].clone()
}

pub fn exact_p_value(u: f64, na: usize, nb: usize) -> f64 {
    let dist = u_distribution(na, nb);
    let total: f64 = dist.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = dist[..=u.min(dist.len() - 1)].iter().sum::<f64>() / total;
    let upper: f64 = dist[u.min(dist.len() - 1)..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn normal_p_value(u: f64, na: usize, nb: usize, tie_term: f64) -> f64 {
    let (fa, fb) = (na as f64, nb as f64);
    let n = fa + fb;
    let mu = fa * fb / 2.0;
    let var = fa * fb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).min(1.0)
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Median by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchScore {
    pub vrc: f64,
    pub vcx: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub lof_mean: f64,
    pub lof_std: f64,
    pub n: usize,
    pub n_infeasible: usize,
    pub n_not_converged: usize,
    pub n_clipped: usize,
}

/// All four metrics for one batch.
pub fn score_batch(
    clf: &Classifier,
    lof: &Lof,
    true_inputs: &[Vec<f64>],
    explanations: &[Explanation],
    targets: &[Class],
) -> Result<BatchScore, MetricError> {
    let rv = vrc_detailed(clf, true_inputs, explanations, targets)?;
    let (cost_mean, cost_std) = cost(true_inputs, explanations)?;
    let lofs: Vec<f64> =
        explanations.iter().filter(|e| e.has_point()).map(|e| lof.score(&e.counterfactual)).collect();
    let (lof_mean, lof_std) = mean_std(&lofs);
    let count = |s: Status| explanations.iter().filter(|e| e.status == s).count();
    Ok(BatchScore {
        vrc: rv.vrc,
        vcx: vcx(clf, explanations, targets)?,
        cost_mean,
        cost_std,
        lof_mean,
        lof_std,
        n: explanations.len(),
        n_infeasible: count(Status::Infeasible),
        n_not_converged: count(Status::NotConverged),
        n_clipped: rv.n_clipped,
    })
}
