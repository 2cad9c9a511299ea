//! ℓ1-minimal counterfactual search over a ReLU classifier as a
//! mixed-integer linear program, solved by branch and bound.
//!
//! The decision variable is a shared recourse `δ = p - q` (`p, q >= 0`), so
//! one encoding covers both a single anchor (minimum-cost counterfactual) and
//! several imputed completions that must all reach the target class.
//!
//! Each unstable hidden unit of each anchor gets the big-M encoding
//!
//! ```text
//! u >= a,  u >= 0,  u <= a + M⁻(1 - z),  u <= M⁺ z,  z ∈ {0, 1}
//! ```
//!
//! with `M⁻, M⁺` from interval propagation of the input box. Units that are
//! provably active or inactive over the box are substituted directly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use thiserror::Error;

use super::lp::{LinearProgram, LpOutcome, Sense, FEAS_TOL};
use crate::model::{Class, Classifier};

/// Default node budget for branch and bound.
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;
const INT_TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("input box is empty in coordinate {0}")]
    EmptyBox(usize),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least one anchor is required")]
    NoAnchors,
    #[error("margin must be non-negative, got {0}")]
    NegativeMargin(f64),
}

/// Per-coordinate bounds on the counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputBox {
    pub fn unit(n: usize) -> Self {
        InputBox { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        InputBox { lo: vec![lo; n], hi: vec![hi; n] }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Pre-activation bounds `(lower, upper)` of every hidden unit over the box.
pub fn preactivation_bounds(clf: &Classifier, input_box: &InputBox) -> Vec<(f64, f64)> {
    clf.w1()
        .iter()
        .zip(clf.b1())
        .map(|(row, &b)| {
            row.iter().zip(input_box.lo.iter().zip(&input_box.hi)).fold((b, b), |(lo, hi), (&w, (&l, &h))| {
                if w >= 0.0 {
                    (lo + w * l, hi + w * h)
                } else {
                    (lo + w * h, hi + w * l)
                }
            })
        })
        .collect()
}

/// Big-M constants `(M⁻, M⁺)` per hidden unit: `M⁻ = max(0, -lower)` and
/// `M⁺ = max(0, upper)` of the pre-activation over the box.
pub fn big_m_bounds(clf: &Classifier, input_box: &InputBox) -> Vec<(f64, f64)> {
    preactivation_bounds(clf, input_box)
        .into_iter()
        .map(|(lo, hi)| ((-lo).max(0.0), hi.max(0.0)))
        .collect()
}

/// Minimum-ℓ1 recourse problem.
#[derive(Debug, Clone)]
pub struct MiloProblem<'a> {
    pub clf: &'a Classifier,
    /// Points the shared recourse is applied to. A single anchor gives the
    /// plain minimum-cost counterfactual.
    pub anchors: Vec<Vec<f64>>,
    pub target: Class,
    /// Required score margin: `sign(target) · score >= margin`.
    pub margin: f64,
    pub input_box: InputBox,
    pub node_limit: usize,
    /// Known upper bound on the optimal `‖δ‖₁`, e.g. the cost of a feasible
    /// recourse. Used to tighten the activation bounds.
    pub l1_bound: Option<f64>,
}

impl<'a> MiloProblem<'a> {
    pub fn new(clf: &'a Classifier, anchor: &[f64], target: Class, margin: f64) -> Self {
        MiloProblem {
            clf,
            anchors: vec![anchor.to_vec()],
            target,
            margin,
            input_box: InputBox::unit(anchor.len()),
            node_limit: DEFAULT_NODE_LIMIT,
            l1_bound: None,
        }
    }

    pub fn with_anchors(clf: &'a Classifier, anchors: Vec<Vec<f64>>, target: Class, margin: f64) -> Self {
        let n = anchors.first().map_or(clf.n_features(), Vec::len);
        MiloProblem {
            clf,
            anchors,
            target,
            margin,
            input_box: InputBox::unit(n),
            node_limit: DEFAULT_NODE_LIMIT,
            l1_bound: None,
        }
    }

    pub fn with_box(mut self, input_box: InputBox) -> Self {
        self.input_box = input_box;
        self
    }

    pub fn with_node_limit(mut self, limit: usize) -> Self {
        self.node_limit = limit;
        self
    }

    pub fn with_l1_bound(mut self, bound: f64) -> Self {
        self.l1_bound = Some(bound);
        self
    }

    /// True if `δ` keeps every anchor inside the box with the required margin.
    pub fn is_feasible(&self, delta: &[f64], tol: f64) -> bool {
        let sign = self.target.sign();
        self.anchors.iter().all(|a| {
            let x: Vec<f64> = a.iter().zip(delta).map(|(a, d)| a + d).collect();
            self.input_box.contains(&x, tol) && sign * self.clf.score(&x) >= self.margin - tol
        })
    }
}

/// Which unit of which anchor a binary indicator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Indicator {
    pub var: usize,
    pub anchor: usize,
    pub unit: usize,
}

/// Encoded mixed-integer program plus the variable layout needed to read a
/// recourse back out of an LP solution.
#[derive(Debug, Clone)]
pub struct MixedIntegerModel {
    pub lp: LinearProgram,
    /// `p_i` (positive part of δ_i) variable indices.
    pub pos: Vec<usize>,
    /// `q_i` (negative part of δ_i) variable indices.
    pub neg: Vec<usize>,
    pub indicators: Vec<Indicator>,
    pub names: Vec<String>,
}

impl MixedIntegerModel {
    pub fn delta(&self, x: &[f64]) -> Vec<f64> {
        self.pos.iter().zip(&self.neg).map(|(&p, &q)| x[p] - x[q]).collect()
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicators.iter().map(|i| i.var)
    }

    /// CPLEX-style LP text, for debugging.
    pub fn to_lp_text(&self) -> String {
        let lp = &self.lp;
        let term = |coef: f64, var: usize| {
            let sign = if coef < 0.0 { "-" } else { "+" };
            format!(" {sign} {} {}", coef.abs(), self.names[var])
        };
        let mut s = String::from("\\ minimum-l1 recourse\nMinimize\n obj:");
        for (j, &c) in lp.objective.iter().enumerate() {
            if c != 0.0 {
                s.push_str(&term(c, j));
            }
        }
        s.push_str("\nSubject To\n");
        for (i, c) in lp.constraints.iter().enumerate() {
            let _ = write!(s, " c{i}:");
            for &(j, a) in &c.terms {
                s.push_str(&term(a, j));
            }
            let _ = writeln!(s, " {} {}", c.sense, c.rhs);
        }
        s.push_str("Bounds\n");
        for j in 0..lp.n_vars() {
            let hi = if lp.upper[j].is_finite() { lp.upper[j].to_string() } else { "+inf".into() };
            let _ = writeln!(s, " {} <= {} <= {}", lp.lower[j], self.names[j], hi);
        }
        s.push_str("Binaries\n");
        for ind in &self.indicators {
            let _ = writeln!(s, " {}", self.names[ind.var]);
        }
        s.push_str("End\n");
        s
    }
}

/// Builds the big-M encoding of `prob`.
pub fn encode(prob: &MiloProblem<'_>) -> Result<MixedIntegerModel, SolverError> {
    let clf = prob.clf;
    let n = clf.n_features();
    if prob.anchors.is_empty() {
        return Err(SolverError::NoAnchors);
    }
    if !(prob.margin >= 0.0) {
        return Err(SolverError::NegativeMargin(prob.margin));
    }
    if prob.input_box.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: prob.input_box.len() });
    }
    if let Some(a) = prob.anchors.iter().find(|a| a.len() != n) {
        return Err(SolverError::DimensionMismatch { expected: n, got: a.len() });
    }
    if let Some(i) = (0..n).find(|&i| prob.input_box.lo[i] > prob.input_box.hi[i]) {
        return Err(SolverError::EmptyBox(i));
    }

    let mut lp = LinearProgram::new(0);
    let mut names = Vec::new();
    let mut pos = Vec::with_capacity(n);
    let mut neg = Vec::with_capacity(n);
    // range of δ_i that keeps every anchor inside the box
    for i in 0..n {
        let dlo = prob.anchors.iter().map(|a| prob.input_box.lo[i] - a[i]).fold(f64::NEG_INFINITY, f64::max);
        let dhi = prob.anchors.iter().map(|a| prob.input_box.hi[i] - a[i]).fold(f64::INFINITY, f64::min);
        if dlo > dhi {
            return Err(SolverError::EmptyBox(i));
        }
        let p = lp.add_var(1.0, 0.0, dhi.max(0.0));
        let q = lp.add_var(1.0, 0.0, (-dlo).max(0.0));
        names.push(format!("p{i}"));
        names.push(format!("q{i}"));
        if dlo > 0.0 {
            lp.add_constraint(vec![(p, 1.0), (q, -1.0)], Sense::Ge, dlo);
        }
        if dhi < 0.0 {
            lp.add_constraint(vec![(p, 1.0), (q, -1.0)], Sense::Le, dhi);
        }
        pos.push(p);
        neg.push(q);
    }

    let budget = prob.l1_bound.map(|u| u + 1e-7);
    if let Some(u) = budget {
        let terms = pos.iter().chain(&neg).map(|&v| (v, 1.0)).collect();
        lp.add_constraint(terms, Sense::Le, u);
    }
    let (dlo, dhi): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (-lp.upper[neg[i]], lp.upper[pos[i]])).unzip();
    let sign = prob.target.sign();
    let mut indicators = Vec::new();
    for (k, anchor) in prob.anchors.iter().enumerate() {
        let reach = InputBox {
            lo: anchor.iter().zip(&dlo).map(|(a, d)| a + d).collect(),
            hi: anchor.iter().zip(&dhi).map(|(a, d)| a + d).collect(),
        };
        let mut bounds = preactivation_bounds(clf, &reach);
        if let Some(u) = budget {
            for (b, (row, &bias)) in bounds.iter_mut().zip(clf.w1().iter().zip(clf.b1())) {
                let c = bias + row.iter().zip(anchor).map(|(w, x)| w * x).sum::<f64>();
                let r = u * row.iter().fold(0.0f64, |m, w| m.max(w.abs()));
                *b = (b.0.max(c - r), b.1.min(c + r));
            }
        }
        // validity row: sign * (Σ w2_j u_j + b2) >= margin, accumulated as
        // terms over p/q/u plus a constant
        let mut valid: Vec<(usize, f64)> = Vec::new();
        let mut valid_const = clf.b2();
        for (j, (row, (&b, &w))) in clf.w1().iter().zip(clf.b1().iter().zip(clf.w2())).enumerate() {
            let (lower, upper) = bounds[j];
            // pre-activation at the anchor: a = base + W·δ
            let base = b + row.iter().zip(anchor).map(|(w, x)| w * x).sum::<f64>();
            if upper <= 0.0 {
                continue;
            }
            if lower >= 0.0 {
                valid_const += w * base;
                for i in 0..n {
                    if row[i] != 0.0 {
                        valid.push((pos[i], w * row[i]));
                        valid.push((neg[i], -w * row[i]));
                    }
                }
                continue;
            }
            let m_minus = -lower;
            let m_plus = upper;
            let u = lp.add_var(0.0, 0.0, m_plus);
            let z = lp.add_var(0.0, 0.0, 1.0);
            names.push(format!("u{k}_{j}"));
            names.push(format!("z{k}_{j}"));
            indicators.push(Indicator { var: z, anchor: k, unit: j });
            let mut a_terms: Vec<(usize, f64)> = Vec::with_capacity(2 * n + 2);
            for i in 0..n {
                if row[i] != 0.0 {
                    a_terms.push((pos[i], -row[i]));
                    a_terms.push((neg[i], row[i]));
                }
            }
            // u - W·δ >= base
            let mut t = a_terms.clone();
            t.push((u, 1.0));
            lp.add_constraint(t, Sense::Ge, base);
            // u - W·δ + M⁻ z <= base + M⁻
            let mut t = a_terms;
            t.push((u, 1.0));
            t.push((z, m_minus));
            lp.add_constraint(t, Sense::Le, base + m_minus);
            // u - M⁺ z <= 0
            lp.add_constraint(vec![(u, 1.0), (z, -m_plus)], Sense::Le, 0.0);
            valid.push((u, w));
        }
        let terms = merge_terms(valid.into_iter().map(|(v, c)| (v, sign * c)).collect());
        lp.add_constraint(terms, Sense::Ge, prob.margin - sign * valid_const);
    }
    Ok(MixedIntegerModel { lp, pos, neg, indicators, names })
}

fn merge_terms(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MiloStatus {
    Optimal,
    Infeasible,
    /// Node budget exhausted; the incumbent (if any) is returned with the
    /// best remaining bound.
    GapLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiloSolution {
    pub status: MiloStatus,
    /// Shared recourse; empty when no feasible point was found.
    pub delta: Vec<f64>,
    /// `anchors[0] + delta`, clipped into the box; empty when infeasible.
    pub counterfactual: Vec<f64>,
    /// ℓ1 norm of `delta`.
    pub objective: f64,
    /// Lower bound on the optimum at termination.
    pub bound: f64,
    pub nodes: usize,
}

impl MiloSolution {
    fn infeasible(nodes: usize) -> Self {
        MiloSolution {
            status: MiloStatus::Infeasible,
            delta: Vec::new(),
            counterfactual: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            nodes,
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: invert so the lowest bound, then the lowest
    // id, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    delta: Vec<f64>,
    objective: f64,
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Branch and bound over the activation indicators: most-fractional
/// branching, best-bound node selection, ties broken by creation order.
pub fn solve_milo(prob: &MiloProblem<'_>) -> Result<MiloSolution, SolverError> {
    let model = encode(prob)?;
    Ok(branch_and_bound(prob, &model))
}

/// Minimum-ℓ1 recourse valid for every completion at once. The returned
/// counterfactual is `completions[0] + δ`.
pub fn solve_armin(
    clf: &Classifier,
    completions: &[Vec<f64>],
    target: Class,
    margin: f64,
    input_box: InputBox,
) -> Result<MiloSolution, SolverError> {
    let mut prob = MiloProblem::with_anchors(clf, completions.to_vec(), target, margin).with_box(input_box);
    if let Some(delta) = stacked_recourse(&prob) {
        prob.l1_bound = Some(l1(&delta));
    }
    solve_milo(&prob)
}

/// Greedy feasible recourse for a multi-anchor problem: starting from zero,
/// repeatedly add the single-anchor optimum for the first anchor that the
/// current recourse leaves invalid.
fn stacked_recourse(prob: &MiloProblem<'_>) -> Option<Vec<f64>> {
    let n = prob.clf.n_features();
    let mut delta = vec![0.0; n];
    for _ in 0..2 * prob.anchors.len() {
        if prob.is_feasible(&delta, FEAS_TOL) {
            return Some(delta);
        }
        let sign = prob.target.sign();
        let Some(anchor) = prob.anchors.iter().find(|a| {
            let x: Vec<f64> = a.iter().zip(&delta).map(|(a, d)| a + d).collect();
            sign * prob.clf.score(&x) < prob.margin - FEAS_TOL
        }) else {
            // the margin holds everywhere, only the box is violated
            return None;
        };
        let shifted: Vec<f64> = anchor.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let single = MiloProblem::new(prob.clf, &shifted, prob.target, prob.margin).with_box(prob.input_box.clone());
        // a shifted anchor can leave the box, which makes the subproblem empty
        let sol = match solve_milo(&single) {
            Ok(sol) if !sol.delta.is_empty() => sol,
            _ => return None,
        };
        for (d, s) in delta.iter_mut().zip(&sol.delta) {
            *d += s;
        }
    }
    prob.is_feasible(&delta, FEAS_TOL).then_some(delta)
}

fn branch_and_bound(prob: &MiloProblem<'_>, model: &MixedIntegerModel) -> MiloSolution {
    let mut lp = model.lp.clone();
    let base_lower = lp.lower.clone();
    let base_upper = lp.upper.clone();
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, id: 0, fixings: Vec::new() });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut best: Option<Incumbent> = None;
    let consider = |delta: Vec<f64>, best: &mut Option<Incumbent>| {
        let objective = l1(&delta);
        if best.as_ref().is_none_or(|b| objective < b.objective - GAP_TOL)
            && prob.is_feasible(&delta, FEAS_TOL)
        {
            *best = Some(Incumbent { delta, objective });
        }
    };

    while let Some(node) = heap.pop() {
        let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.objective);
        if node.bound >= cutoff - GAP_TOL {
            // every remaining node is at least as bad
            heap.clear();
            break;
        }
        if nodes >= prob.node_limit {
            heap.push(node);
            break;
        }
        nodes += 1;
        lp.lower.copy_from_slice(&base_lower);
        lp.upper.copy_from_slice(&base_upper);
        for &(v, val) in &node.fixings {
            lp.lower[v] = val;
            lp.upper[v] = val;
        }
        let LpOutcome::Optimal { x, value } = lp.solve() else {
            continue;
        };
        if value >= cutoff - GAP_TOL {
            continue;
        }
        // the relaxation point may already be a valid counterfactual
        consider(model.delta(&x), &mut best);

        let branch = model
            .indicators
            .iter()
            .map(|ind| (ind.var, x[ind.var]))
            .filter(|&(_, v)| v > INT_TOL && v < 1.0 - INT_TOL)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(a.0.cmp(&b.0)));
        match branch {
            None => {
                // integral: re-solve with every indicator pinned to clean up
                // round-off, then take the exact activation-pattern optimum
                for ind in &model.indicators {
                    let v = x[ind.var].round();
                    lp.lower[ind.var] = v;
                    lp.upper[ind.var] = v;
                }
                if let LpOutcome::Optimal { x, .. } = lp.solve() {
                    consider(model.delta(&x), &mut best);
                }
            }
            Some((var, _)) => {
                for val in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((var, val));
                    heap.push(Node { bound: value, id: next_id, fixings });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.peek().map(|n| n.bound);
    let status = if open_bound.is_some() { MiloStatus::GapLimit } else { MiloStatus::Optimal };
    match best {
        None if status == MiloStatus::Optimal => MiloSolution::infeasible(nodes),
        None => MiloSolution {
            status,
            delta: Vec::new(),
            counterfactual: Vec::new(),
            objective: f64::INFINITY,
            bound: open_bound.unwrap_or(f64::INFINITY),
            nodes,
        },
        Some(inc) => {
            let mut counterfactual: Vec<f64> = prob.anchors[0].iter().zip(&inc.delta).map(|(a, d)| a + d).collect();
            prob.input_box.clip(&mut counterfactual);
            let bound = match open_bound {
                Some(b) => b.max(0.0).min(inc.objective),
                None => inc.objective,
            };
            MiloSolution { status, delta: inc.delta, counterfactual, objective: inc.objective, bound, nodes }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture_box() -> InputBox {
        InputBox::uniform(2, 0.0, 5.0)
    }

    #[test]
    fn big_m_for_fixture() {
        let f = Classifier::fixture();
        assert_eq!(big_m_bounds(&f, &fixture_box()), vec![(0.0, 10.0)]);
    }

    #[test]
    fn fixture_minimum_cost_is_one() {
        let f = Classifier::fixture();
        let prob = MiloProblem::new(&f, &[2.0, 1.0], Class::One, 0.0).with_box(fixture_box());
        let sol = solve_milo(&prob).unwrap();
        assert_eq!(sol.status, MiloStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        let cf = &sol.counterfactual;
        assert!((cf[0] + cf[1] - 4.0).abs() < 1e-7);
    }

    #[test]
    fn anchor_already_valid_costs_nothing() {
        let f = Classifier::fixture();
        let prob = MiloProblem::new(&f, &[2.0, 2.0], Class::One, 0.0).with_box(fixture_box());
        let sol = solve_milo(&prob).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.counterfactual, vec![2.0, 2.0]);
    }

    #[test]
    fn box_excluding_target_region_is_infeasible() {
        let f = Classifier::fixture();
        let prob = MiloProblem::new(&f, &[0.5, 0.5], Class::One, 0.0);
        assert_eq!(solve_milo(&prob).unwrap().status, MiloStatus::Infeasible);
    }

    #[test]
    fn encoding_errors() {
        let f = Classifier::fixture();
        let prob = MiloProblem::new(&f, &[0.5, 0.5], Class::One, 0.0)
            .with_box(InputBox { lo: vec![0.0, 2.0], hi: vec![1.0, 1.0] });
        assert_eq!(encode(&prob).unwrap_err(), SolverError::EmptyBox(1));
        let prob = MiloProblem::new(&f, &[0.5], Class::One, 0.0);
        assert!(matches!(encode(&prob), Err(SolverError::DimensionMismatch { .. })));
        let prob = MiloProblem::new(&f, &[0.5, 0.5], Class::One, -1.0);
        assert_eq!(encode(&prob).unwrap_err(), SolverError::NegativeMargin(-1.0));
    }

    #[test]
    fn two_completion_recourse_costs_two() {
        let f = Classifier::fixture();
        let sol = solve_armin(&f, &[vec![2.0, 1.0], vec![1.0, 1.0]], Class::One, 0.0, fixture_box()).unwrap();
        assert_eq!(sol.status, MiloStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9, "{}", sol.objective);
        // counterfactual is built from the first completion
        let d = &sol.delta;
        assert_eq!(sol.counterfactual, vec![2.0 + d[0], 1.0 + d[1]]);
    }

    #[test]
    fn single_completion_reduces_to_plain_problem() {
        let f = Classifier::fixture();
        let a = solve_armin(&f, &[vec![2.0, 1.0]], Class::One, 0.0, fixture_box()).unwrap();
        let b = solve_milo(&MiloProblem::new(&f, &[2.0, 1.0], Class::One, 0.0).with_box(fixture_box())).unwrap();
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn lp_text_dump_lists_binaries() {
        let clf = Classifier::new(
            vec![vec![1.0, -1.0], vec![-1.0, 2.0]],
            vec![0.0, -0.5],
            vec![1.0, -1.0],
            0.1,
        )
        .unwrap();
        let model = encode(&MiloProblem::new(&clf, &[0.2, 0.8], Class::One, 0.01)).unwrap();
        let text = model.to_lp_text();
        assert!(text.starts_with("\\ minimum-l1 recourse\nMinimize"));
        assert!(text.contains("Binaries\n z0_0\n z0_1\n"));
        assert!(text.ends_with("End\n"));
    }

    pub(crate) fn random_net(rng: &mut ChaCha8Rng, n: usize) -> Classifier {
        let hidden = rng.random_range(1..=4);
        let w1 = (0..hidden).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let b1 = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w2 = (0..hidden).map(|_| rng.random_range(-2.0..2.0)).collect();
        Classifier::new(w1, b1, w2, rng.random_range(-0.5..0.5)).unwrap()
    }

    #[test]
    fn margin_monotonicity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let clf = random_net(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let t = clf.class_of(&x).opposite();
            let mut last = 0.0;
            for margin in [0.0, 0.05, 0.1, 0.2] {
                let prob = MiloProblem::new(&clf, &x, t, margin);
                let sol = solve_milo(&prob).unwrap();
                if sol.status == MiloStatus::Infeasible {
                    break;
                }
                assert!(sol.objective >= last - 1e-9);
                last = sol.objective;
                assert_eq!(sol, solve_milo(&prob).unwrap());
                assert!(prob.is_feasible(&sol.delta, 1e-7));
            }
        }
    }

    #[test]
    fn l1_bound_keeps_the_multi_anchor_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut bounded = 0;
        for _ in 0..60 {
            let clf = random_net(&mut rng, 3);
            let centre: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..0.7)).collect();
            let anchors: Vec<Vec<f64>> =
                (0..3).map(|_| centre.iter().map(|c| c + rng.random_range(-0.1..0.1)).collect()).collect();
            let t = clf.class_of(&anchors[0]).opposite();
            let plain = solve_milo(&MiloProblem::with_anchors(&clf, anchors.clone(), t, 0.01)).unwrap();
            let fast = solve_armin(&clf, &anchors, t, 0.01, InputBox::unit(3)).unwrap();
            assert_eq!(plain.status, fast.status);
            if plain.status == MiloStatus::Optimal {
                assert!((plain.objective - fast.objective).abs() < 1e-6, "{} vs {}", plain.objective, fast.objective);
                let prob = MiloProblem::with_anchors(&clf, anchors.clone(), t, 0.01);
                if let Some(d) = stacked_recourse(&prob) {
                    assert!(prob.is_feasible(&d, 1e-7));
                    assert!(l1(&d) >= plain.objective - 1e-6);
                    bounded += 1;
                }
            }
        }
        assert!(bounded > 5, "{bounded}");
    }
}
