//! The ten counterfactual methods.
//!
//! Every method maps a completed input `x̂` and a target class to an
//! [`Explanation`]. Gradient methods may stop early with
//! [`Status::NotConverged`]; all others either find a valid point or report
//! [`Status::Infeasible`].

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Class, Classifier};
use crate::robustness::{certify, sample_models, stability_score, ModelSet, StabilityParams};
use crate::solver::{
    solve_armin, solve_milo, InputBox, LinearProgram, LpOutcome, MiloProblem, MiloSolution, Sense,
    SolverError,
};

/// Width at which line searches stop.
pub const LINE_SEARCH_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("input has {got} features, classifier expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stce is configured with an ensemble filter but no ensemble was supplied")]
    MissingEnsemble,
    #[error("invalid method parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wachter,
    Bls,
    KdTreeNnce,
    Mce,
    Armin,
    Mcer,
    Rnce,
    Proplace,
    Stce,
    Apas,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Wachter,
        Method::Bls,
        Method::KdTreeNnce,
        Method::Mce,
        Method::Armin,
        Method::Mcer,
        Method::Rnce,
        Method::Proplace,
        Method::Stce,
        Method::Apas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Wachter => "wachter",
            Method::Bls => "bls",
            Method::KdTreeNnce => "kdtreennce",
            Method::Mce => "mce",
            Method::Armin => "armin",
            Method::Mcer => "mcer",
            Method::Rnce => "rnce",
            Method::Proplace => "proplace",
            Method::Stce => "stce",
            Method::Apas => "apas",
        }
    }

    /// Methods that target robustness to model changes.
    pub fn is_robust(self) -> bool {
        matches!(self, Method::Mcer | Method::Rnce | Method::Proplace | Method::Stce | Method::Apas)
    }

    /// Gradient methods, the only ones that can stop without a valid point.
    pub fn is_incomplete(self) -> bool {
        matches!(self, Method::Wachter | Method::Apas)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| ExplainError::InvalidParams(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Valid,
    NotConverged,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// The counterfactual `x′`; empty when infeasible.
    pub counterfactual: Vec<f64>,
    /// `x′ − x̂`; empty when infeasible.
    pub delta: Vec<f64>,
    pub target: Class,
    pub method: Method,
    pub status: Status,
    pub solve_time: Duration,
    /// Gradient steps, bisection steps or branch-and-bound nodes.
    pub iterations: usize,
}

impl Explanation {
    fn found(x_hat: &[f64], counterfactual: Vec<f64>, target: Class, method: Method, status: Status) -> Self {
        let delta = counterfactual.iter().zip(x_hat).map(|(c, x)| c - x).collect();
        Explanation {
            counterfactual,
            delta,
            target,
            method,
            status,
            solve_time: Duration::ZERO,
            iterations: 0,
        }
    }

    fn infeasible(target: Class, method: Method) -> Self {
        Explanation {
            counterfactual: Vec::new(),
            delta: Vec::new(),
            target,
            method,
            status: Status::Infeasible,
            solve_time: Duration::ZERO,
            iterations: 0,
        }
    }

    /// Valid result for a complete method, downgraded to infeasible if the
    /// point does not actually land in the target class.
    fn checked(clf: &Classifier, x_hat: &[f64], counterfactual: Vec<f64>, target: Class, method: Method) -> Self {
        if clf.class_of(&counterfactual) == target {
            Explanation::found(x_hat, counterfactual, target, method, Status::Valid)
        } else {
            Explanation::infeasible(target, method)
        }
    }

    fn iterations(mut self, n: usize) -> Self {
        self.iterations = n;
        self
    }

    pub fn has_point(&self) -> bool {
        !self.counterfactual.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.delta.iter().map(|d| d.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WachterParams {
    /// Weight on the ℓ1 cost; `1 - lambda` weighs the validity term.
    pub lambda: f64,
    /// Probability margin past 0.5 that ends the search.
    pub eps: f64,
    pub lr: f64,
    pub max_iter: usize,
}

impl Default for WachterParams {
    fn default() -> Self {
        WachterParams { lambda: 0.9, eps: 0.001, lr: 0.01, max_iter: 2000 }
    }
}

impl WachterParams {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if !(0.0..=1.0).contains(&self.lambda) || !(self.eps > 0.0) || !(self.lr > 0.0) {
            return Err(ExplainError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

fn margin_reached(p: f64, target: Class, eps: f64) -> bool {
    match target {
        Class::One => p >= 0.5 + eps,
        Class::Zero => p <= 0.5 - eps,
    }
}

fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Subgradient descent on `λ‖x′ − x̂‖₁ + (1 − λ) max_m (σ(s_m(x′)) − t)²`,
/// projected into the box after every step. Returns the final point when
/// every member reaches the margin, otherwise the lowest-loss iterate.
fn descend(
    members: &[Classifier],
    x_hat: &[f64],
    target: Class,
    p: &WachterParams,
    input_box: &InputBox,
) -> (Vec<f64>, Status, usize) {
    let t = target.as_u8() as f64;
    let mut x = x_hat.to_vec();
    input_box.clip(&mut x);
    let mut best = (f64::INFINITY, x.clone());
    for it in 0..=p.max_iter {
        let probs: Vec<f64> = members.iter().map(|m| m.probability(&x)).collect();
        if probs.iter().all(|&q| margin_reached(q, target, p.eps)) {
            return (x, Status::Valid, it);
        }
        let (worst, &q) = probs
            .iter()
            .enumerate()
            .max_by(|a, b| (a.1 - t).powi(2).total_cmp(&(b.1 - t).powi(2)).then(b.0.cmp(&a.0)))
            .expect("at least one member");
        let loss = p.lambda * l1_dist(&x, x_hat) + (1.0 - p.lambda) * (q - t).powi(2);
        if loss < best.0 {
            best = (loss, x.clone());
        }
        if it == p.max_iter {
            break;
        }
        let scale = (1.0 - p.lambda) * 2.0 * (q - t) * q * (1.0 - q);
        let grad = members[worst].score_gradient(&x);
        for ((xi, &xh), g) in x.iter_mut().zip(x_hat).zip(grad) {
            let diff = *xi - xh;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            *xi -= p.lr * (p.lambda * sign + scale * g);
        }
        input_box.clip(&mut x);
    }
    (best.1, Status::NotConverged, p.max_iter)
}

fn check_dim(clf: &Classifier, x: &[f64]) -> Result<(), ExplainError> {
    if x.len() != clf.n_features() {
        return Err(ExplainError::DimensionMismatch { expected: clf.n_features(), got: x.len() });
    }
    Ok(())
}

/// Gradient search that stops once the probability clears `0.5 ± ε`.
pub fn wachter(
    clf: &Classifier,
    x_hat: &[f64],
    target: Class,
    p: &WachterParams,
    input_box: &InputBox,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    p.validate()?;
    let start = Instant::now();
    let (x, status, it) = descend(std::slice::from_ref(clf), x_hat, target, p, input_box);
    let mut e = Explanation::found(x_hat, x, target, Method::Wachter, status).iterations(it);
    e.solve_time = start.elapsed();
    Ok(e)
}

/// Gradient search against the worst member of a sampled model set.
pub fn apas(
    clf: &Classifier,
    x_hat: &[f64],
    target: Class,
    models: &ModelSet,
    p: &WachterParams,
    input_box: &InputBox,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    p.validate()?;
    if models.is_empty() {
        return Err(ExplainError::InvalidParams("apas needs a non-empty sampled model set".into()));
    }
    let start = Instant::now();
    let (x, status, it) = descend(models.members(), x_hat, target, p, input_box);
    let mut e = Explanation::found(x_hat, x, target, Method::Apas, status).iterations(it);
    e.solve_time = start.elapsed();
    Ok(e)
}

/// Indices of `rows` the classifier assigns to `target`.
pub fn predicted_rows(clf: &Classifier, rows: &[Vec<f64>], target: Class) -> Vec<usize> {
    (0..rows.len()).filter(|&i| clf.class_of(&rows[i]) == target).collect()
}

fn bls_from(
    clf: &Classifier,
    rows: &[Vec<f64>],
    candidates: &[usize],
    x_hat: &[f64],
    target: Class,
    margin: f64,
    seed: u64,
) -> Explanation {
    if clf.class_of(x_hat) == target {
        return Explanation::found(x_hat, x_hat.to_vec(), target, Method::Bls, Status::Valid);
    }
    if candidates.is_empty() {
        return Explanation::infeasible(target, Method::Bls);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let far = &rows[candidates[rng.random_range(0..candidates.len())]];
    let sign = target.sign();
    let use_margin = sign * clf.score(far) >= margin;
    let accept = |x: &[f64]| {
        if use_margin {
            sign * clf.score(x) >= margin
        } else {
            clf.class_of(x) == target
        }
    };
    let point = |a: f64| -> Vec<f64> {
        if a >= 1.0 {
            far.clone()
        } else {
            x_hat.iter().zip(far).map(|(x, f)| x + a * (f - x)).collect()
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut steps = 0;
    while hi - lo > LINE_SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if accept(&point(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    Explanation::checked(clf, x_hat, point(hi), target, Method::Bls).iterations(steps)
}

/// Line search toward a seeded-random training point of the target class.
/// The crossing is pushed to score margin `margin` when that point clears it.
pub fn bls(
    clf: &Classifier,
    train: &[Vec<f64>],
    x_hat: &[f64],
    target: Class,
    margin: f64,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    let start = Instant::now();
    let candidates = predicted_rows(clf, train, target);
    let mut e = bls_from(clf, train, &candidates, x_hat, target, margin, seed);
    e.solve_time = start.elapsed();
    Ok(e)
}

/// Acceptance test applied to nearest-neighbour candidates.
#[derive(Debug, Clone, Copy)]
pub enum NnceFilter<'a> {
    None,
    Certified(f64),
    Ensemble(&'a ModelSet),
    /// Stability score at least `params.threshold`; candidate `i` is scored
    /// with seed `seed + i`.
    Stable { params: StabilityParams, seed: u64 },
}

fn sorted_by_distance(rows: &[Vec<f64>], candidates: &[usize], x_hat: &[f64]) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = candidates.iter().map(|&i| (l1_dist(&rows[i], x_hat), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

fn passes(clf: &Classifier, x: &[f64], row: usize, target: Class, filter: &NnceFilter<'_>) -> bool {
    match filter {
        NnceFilter::None => true,
        NnceFilter::Certified(r) => certify(clf, x, target, *r),
        NnceFilter::Ensemble(set) => set.all_predict(clf, x, target),
        NnceFilter::Stable { params, seed } => {
            stability_score(clf, x, target, params, seed.wrapping_add(row as u64)) >= params.threshold
        }
    }
}

fn nnce_from(
    clf: &Classifier,
    rows: &[Vec<f64>],
    candidates: &[usize],
    x_hat: &[f64],
    target: Class,
    filter: &NnceFilter<'_>,
    method: Method,
) -> Explanation {
    for (scanned, i) in sorted_by_distance(rows, candidates, x_hat).into_iter().enumerate() {
        if passes(clf, &rows[i], i, target, filter) {
            return Explanation::checked(clf, x_hat, rows[i].clone(), target, method).iterations(scanned + 1);
        }
    }
    Explanation::infeasible(target, method).iterations(candidates.len())
}

/// Nearest training point (ℓ1) predicted as `target` that passes `filter`.
pub fn nnce(
    clf: &Classifier,
    train: &[Vec<f64>],
    x_hat: &[f64],
    target: Class,
    filter: NnceFilter<'_>,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    let start = Instant::now();
    let method = match filter {
        NnceFilter::None => Method::KdTreeNnce,
        NnceFilter::Certified(_) => Method::Rnce,
        NnceFilter::Ensemble(_) | NnceFilter::Stable { .. } => Method::Stce,
    };
    let candidates = predicted_rows(clf, train, target);
    let mut e = nnce_from(clf, train, &candidates, x_hat, target, &filter, method);
    e.solve_time = start.elapsed();
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McerParams {
    pub theta_max: f64,
    pub tol: f64,
}

impl Default for McerParams {
    fn default() -> Self {
        McerParams { theta_max: 20.0, tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub enum MiloMode<'a> {
    Mce,
    Mcer { radius: f64, params: McerParams },
    Armin { completions: &'a [Vec<f64>] },
}

struct MiloRun<'a> {
    clf: &'a Classifier,
    x_hat: &'a [f64],
    target: Class,
    input_box: &'a InputBox,
    node_limit: usize,
    nodes: usize,
}

impl MiloRun<'_> {
    fn solve(&mut self, margin: f64, l1_bound: Option<f64>) -> Result<Option<Vec<f64>>, SolverError> {
        let mut prob = MiloProblem::new(self.clf, self.x_hat, self.target, margin)
            .with_box(self.input_box.clone())
            .with_node_limit(self.node_limit);
        prob.l1_bound = l1_bound;
        let sol = solve_milo(&prob)?;
        self.nodes += sol.nodes;
        Ok(point_of(sol))
    }
}

fn point_of(sol: MiloSolution) -> Option<Vec<f64>> {
    (!sol.counterfactual.is_empty()).then_some(sol.counterfactual)
}

/// Minimum-ℓ1 counterfactuals from the mixed-integer encoding.
///
/// MCER searches the smallest score margin in `[margin, theta_max]` whose
/// optimum is certified at `radius`: doubling from `margin`, then bisecting
/// to `tol`.
pub fn milo_explain(
    clf: &Classifier,
    x_hat: &[f64],
    target: Class,
    mode: MiloMode<'_>,
    margin: f64,
    input_box: &InputBox,
    node_limit: usize,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    let start = Instant::now();
    let mut run = MiloRun { clf, x_hat, target, input_box, node_limit, nodes: 0 };
    let (method, point) = match mode {
        MiloMode::Mce => (Method::Mce, run.solve(margin, None)?),
        MiloMode::Armin { completions } => {
            let anchors = if completions.is_empty() { vec![x_hat.to_vec()] } else { completions.to_vec() };
            let sol = solve_armin(clf, &anchors, target, margin, input_box.clone())?;
            run.nodes = sol.nodes;
            // the recourse is shared, so the point is re-anchored at x̂
            let p = (!sol.delta.is_empty()).then(|| {
                let mut x: Vec<f64> = x_hat.iter().zip(&sol.delta).map(|(x, d)| x + d).collect();
                input_box.clip(&mut x);
                x
            });
            (Method::Armin, p)
        }
        MiloMode::Mcer { radius, params } => (Method::Mcer, mcer_search(&mut run, margin, radius, &params)?),
    };
    let mut e = match point {
        Some(x) => Explanation::checked(clf, x_hat, x, target, method),
        None => Explanation::infeasible(target, method),
    }
    .iterations(run.nodes);
    e.solve_time = start.elapsed();
    Ok(e)
}

fn mcer_search(
    run: &mut MiloRun<'_>,
    margin: f64,
    radius: f64,
    params: &McerParams,
) -> Result<Option<Vec<f64>>, SolverError> {
    let (clf, target) = (run.clf, run.target);
    let ok = |x: &[f64]| certify(clf, x, target, radius);
    let mut theta = margin;
    let mut lo = margin;
    let (mut hi, mut best) = loop {
        match run.solve(theta, None)? {
            None => return Ok(None),
            Some(x) if ok(&x) => break (theta, x),
            Some(_) if theta >= params.theta_max => return Ok(None),
            Some(_) => {
                lo = theta;
                theta = (theta * 2.0).max(1e-3).min(params.theta_max);
            }
        }
    };
    if hi == margin {
        return Ok(Some(best));
    }
    while hi - lo > params.tol {
        let mid = 0.5 * (lo + hi);
        // `best` clears every margin below `hi`
        let bound = best.iter().zip(run.x_hat).map(|(a, b)| (a - b).abs()).sum();
        match run.solve(mid, Some(bound))? {
            Some(x) if ok(&x) => {
                hi = mid;
                best = x;
            }
            _ => lo = mid,
        }
    }
    Ok(Some(best))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProplaceParams {
    /// Number of certified neighbours spanning the search region.
    pub k: usize,
}

impl Default for ProplaceParams {
    fn default() -> Self {
        ProplaceParams { k: 10 }
    }
}

/// Point of `hull(vertices)` nearest to `x_hat` in ℓ1, by linear programming.
/// Returns the point and its distance.
pub fn nearest_in_hull(vertices: &[&[f64]], x_hat: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = x_hat.len();
    let mut lp = LinearProgram::new(0);
    let w: Vec<usize> = vertices.iter().map(|_| lp.add_var(0.0, 0.0, 1.0)).collect();
    lp.add_constraint(w.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
    for i in 0..n {
        let up = lp.add_var(1.0, 0.0, f64::INFINITY);
        let down = lp.add_var(1.0, 0.0, f64::INFINITY);
        let mut terms: Vec<(usize, f64)> = w.iter().zip(vertices).map(|(&j, v)| (j, v[i])).collect();
        terms.push((up, -1.0));
        terms.push((down, 1.0));
        lp.add_constraint(terms, Sense::Eq, x_hat[i]);
    }
    let LpOutcome::Optimal { x, .. } = lp.solve() else {
        return None;
    };
    let mut point = vec![0.0; n];
    for (&j, v) in w.iter().zip(vertices) {
        let wj = x[j].clamp(0.0, 1.0);
        for (p, vi) in point.iter_mut().zip(v.iter()) {
            *p += wj * vi;
        }
    }
    let d = l1_dist(&point, x_hat);
    Some((point, d))
}

fn proplace_from(
    clf: &Classifier,
    rows: &[Vec<f64>],
    candidates: &[usize],
    x_hat: &[f64],
    target: Class,
    radius: f64,
    k: usize,
) -> Explanation {
    let vertices: Vec<&[f64]> = sorted_by_distance(rows, candidates, x_hat)
        .into_iter()
        .filter(|&i| certify(clf, &rows[i], target, radius))
        .take(k.max(1))
        .map(|i| rows[i].as_slice())
        .collect();
    let Some(&nearest) = vertices.first() else {
        return Explanation::infeasible(target, Method::Proplace);
    };
    let ok = |x: &[f64]| certify(clf, x, target, radius);
    if vertices.len() == 1 {
        return Explanation::checked(clf, x_hat, nearest.to_vec(), target, Method::Proplace);
    }
    let Some((point, dist)) = nearest_in_hull(&vertices, x_hat) else {
        return Explanation::checked(clf, x_hat, nearest.to_vec(), target, Method::Proplace);
    };
    if dist <= 1e-9 && ok(x_hat) {
        return Explanation::checked(clf, x_hat, x_hat.to_vec(), target, Method::Proplace);
    }
    if ok(&point) {
        return Explanation::checked(clf, x_hat, point, target, Method::Proplace);
    }
    let along = |a: f64| -> Vec<f64> {
        if a >= 1.0 {
            nearest.to_vec()
        } else {
            point.iter().zip(nearest).map(|(p, v)| p + a * (v - p)).collect()
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut steps = 0;
    while hi - lo > LINE_SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(&along(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    Explanation::checked(clf, x_hat, along(hi), target, Method::Proplace).iterations(steps)
}

/// Nearest point of the convex hull spanned by the `k` nearest certified
/// training points, pulled toward the nearest of them until certified.
pub fn proplace(
    clf: &Classifier,
    train: &[Vec<f64>],
    x_hat: &[f64],
    target: Class,
    radius: f64,
    k: usize,
) -> Result<Explanation, ExplainError> {
    check_dim(clf, x_hat)?;
    let start = Instant::now();
    let candidates = predicted_rows(clf, train, target);
    let mut e = proplace_from(clf, train, &candidates, x_hat, target, radius, k);
    e.solve_time = start.elapsed();
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StceFilter {
    Stable,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StceParams {
    pub filter: StceFilter,
    pub stability: StabilityParams,
    /// Retrained members when `filter` is `ensemble`.
    pub ensemble_size: usize,
}

impl Default for StceParams {
    fn default() -> Self {
        StceParams { filter: StceFilter::Stable, stability: StabilityParams::default(), ensemble_size: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApasParams {
    /// Sampled models, the base model included.
    pub models: usize,
    pub descent: WachterParams,
}

impl Default for ApasParams {
    fn default() -> Self {
        ApasParams { models: 20, descent: WachterParams { lambda: 0.1, eps: 0.001, lr: 0.05, max_iter: 2000 } }
    }
}

/// Per-method parameters, as read from a bench configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    /// Score margin θ₀ required of solver and line-search results.
    pub margin: f64,
    /// Weight-perturbation radius δw shared by the robust methods.
    pub radius: f64,
    pub node_limit: usize,
    pub wachter: WachterParams,
    pub mcer: McerParams,
    pub proplace: ProplaceParams,
    pub stce: StceParams,
    pub apas: ApasParams,
    /// Completions per instance for ARMIN.
    pub armin_draws: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            margin: 0.01,
            radius: 0.05,
            node_limit: crate::solver::milo::DEFAULT_NODE_LIMIT,
            wachter: WachterParams::default(),
            mcer: McerParams::default(),
            proplace: ProplaceParams::default(),
            stce: StceParams::default(),
            apas: ApasParams::default(),
            armin_draws: 5,
        }
    }
}

impl MethodParams {
    pub fn validate(&self) -> Result<(), ExplainError> {
        self.wachter.validate()?;
        self.apas.descent.validate()?;
        let bad = |what: &str| Err(ExplainError::InvalidParams(what.into()));
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if !(self.radius >= 0.0) {
            return bad("radius must be non-negative");
        }
        if !(self.mcer.theta_max >= self.margin) || !(self.mcer.tol > 0.0) {
            return bad("mcer needs theta_max >= margin and tol > 0");
        }
        if self.proplace.k == 0 || self.apas.models == 0 || self.armin_draws == 0 || self.node_limit == 0 {
            return bad("proplace.k, apas.models, armin_draws and node_limit must be positive");
        }
        if self.stce.filter == StceFilter::Ensemble && self.stce.ensemble_size == 0 {
            return bad("stce ensemble_size must be positive");
        }
        Ok(())
    }
}

/// Everything the methods share for one classifier: the training rows split
/// by predicted class, the APAS model sample and the optional STCE ensemble.
pub struct ExplainContext<'a> {
    clf: &'a Classifier,
    train: &'a [Vec<f64>],
    params: MethodParams,
    input_box: InputBox,
    by_class: [Vec<usize>; 2],
    apas_models: ModelSet,
    ensemble: Option<ModelSet>,
}

impl<'a> ExplainContext<'a> {
    /// APAS members are sampled once with `seed`.
    pub fn new(
        clf: &'a Classifier,
        train: &'a [Vec<f64>],
        params: MethodParams,
        seed: u64,
    ) -> Result<Self, ExplainError> {
        params.validate()?;
        let by_class = [predicted_rows(clf, train, Class::Zero), predicted_rows(clf, train, Class::One)];
        Ok(ExplainContext {
            clf,
            train,
            params,
            input_box: InputBox::unit(clf.n_features()),
            by_class,
            apas_models: sample_models(clf, params.apas.models, params.radius, seed),
            ensemble: None,
        })
    }

    pub fn with_ensemble(mut self, ensemble: ModelSet) -> Self {
        self.ensemble = Some(ensemble);
        self
    }

    pub fn with_box(mut self, input_box: InputBox) -> Self {
        self.input_box = input_box;
        self
    }

    pub fn params(&self) -> &MethodParams {
        &self.params
    }

    pub fn classifier(&self) -> &Classifier {
        self.clf
    }

    /// Runs `method` on `x_hat`. `completions` feeds ARMIN; without them it
    /// degenerates to MCE on `x_hat`.
    pub fn explain(
        &self,
        method: Method,
        x_hat: &[f64],
        target: Class,
        seed: u64,
        completions: Option<&[Vec<f64>]>,
    ) -> Result<Explanation, ExplainError> {
        check_dim(self.clf, x_hat)?;
        let p = &self.params;
        let start = Instant::now();
        let candidates = &self.by_class[target.as_u8() as usize];
        let milo = |mode| milo_explain(self.clf, x_hat, target, mode, p.margin, &self.input_box, p.node_limit);
        let mut e = match method {
            Method::Wachter => wachter(self.clf, x_hat, target, &p.wachter, &self.input_box)?,
            Method::Apas => apas(self.clf, x_hat, target, &self.apas_models, &p.apas.descent, &self.input_box)?,
            Method::Bls => bls_from(self.clf, self.train, candidates, x_hat, target, p.margin, seed),
            Method::KdTreeNnce => {
                nnce_from(self.clf, self.train, candidates, x_hat, target, &NnceFilter::None, method)
            }
            Method::Rnce => {
                let filter = NnceFilter::Certified(p.radius);
                nnce_from(self.clf, self.train, candidates, x_hat, target, &filter, method)
            }
            Method::Stce => {
                let filter = match p.stce.filter {
                    StceFilter::Stable => NnceFilter::Stable { params: p.stce.stability, seed },
                    StceFilter::Ensemble => {
                        NnceFilter::Ensemble(self.ensemble.as_ref().ok_or(ExplainError::MissingEnsemble)?)
                    }
                };
                nnce_from(self.clf, self.train, candidates, x_hat, target, &filter, method)
            }
            Method::Proplace => {
                proplace_from(self.clf, self.train, candidates, x_hat, target, p.radius, p.proplace.k)
            }
            Method::Mce => milo(MiloMode::Mce)?,
            Method::Mcer => milo(MiloMode::Mcer { radius: p.radius, params: p.mcer })?,
            Method::Armin => milo(MiloMode::Armin { completions: completions.unwrap_or(&[]) })?,
        };
        e.solve_time = start.elapsed();
        Ok(e)
    }
}
