//! Dense bounded-variable primal simplex.
//!
//! Two phases (artificial variables, then the real objective). Pricing is
//! Dantzig's rule; after a run of degenerate pivots it switches to Bland's
//! rule until the objective moves again, which rules out cycling.

use std::fmt;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` terms.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min objective · x` subject to the constraints and `lower <= x <= upper`.
/// Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 30;
const MAX_ITERATIONS: usize = 100_000;

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(terms.iter().all(|&(j, _)| j < self.n_vars()));
        self.constraints.push(Constraint { terms, sense, rhs });
    }

    /// Largest violation of any bound or constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0));
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.terms.iter().map(|&(j, a)| a * x[j]).sum();
            match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            }
        });
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> LpOutcome {
        solve(self)
    }
}

/// How a user variable maps onto non-negative internal columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Mirror { col: usize, offset: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Row-major `m x n` matrix `B^-1 A`.
    t: Vec<f64>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    /// Reduced costs.
    d: Vec<f64>,
    /// Columns allowed to enter the basis.
    eligible: Vec<bool>,
}

enum Step {
    Optimal,
    Unbounded,
    Stalled,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.beta[r]
            }
            Status::AtLower => 0.0,
            Status::AtUpper => self.upper[j],
        }
    }

    fn set_costs(&mut self, c: &[f64]) {
        self.d.copy_from_slice(c);
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.n..(i + 1) * self.n];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn objective(&self, c: &[f64]) -> f64 {
        (0..self.n).map(|j| c[j] * self.value_of(j)).sum()
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n {
            if !self.eligible[j] || self.upper[j] <= 0.0 {
                continue;
            }
            let dir = match self.status[j] {
                Status::AtLower if self.d[j] < -COST_TOL => 1.0,
                Status::AtUpper if self.d[j] > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let gain = self.d[j].abs();
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((j, dir, gain));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn iterate(&mut self, max_iter: usize) -> Step {
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Step::Optimal;
            };
            // ratio test: step length t >= 0 along x_j += dir * t
            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_key = (f64::INFINITY, usize::MAX);
            for i in 0..self.m {
                let alpha = dir * self.at(i, j);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, to_upper) = if alpha > 0.0 {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = if limit < step - 1e-12 {
                    true
                } else if limit <= step + 1e-12 && leave.is_some() {
                    // ties: Bland takes the lowest variable index, Dantzig the
                    // largest pivot
                    if bland {
                        b < leave_key.1
                    } else {
                        alpha.abs() > leave_key.0
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leave = Some((i, to_upper));
                    leave_key = (alpha.abs(), b);
                }
            }
            if !step.is_finite() {
                return Step::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    self.beta[i] -= dir * step * a;
                }
            }
            let entering_value = match self.status[j] {
                Status::AtUpper => self.upper[j] - step,
                _ => step,
            };
            match leave {
                None => {
                    // bound flip
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                }
                Some((r, to_upper)) => {
                    let old = self.basis[r];
                    self.status[old] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
        }
        Step::Stalled
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let p = self.at(r, j);
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (dv, pr) in self.d.iter_mut().zip(&pivot_row) {
                *dv -= f * pr;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }
}

fn solve(lp: &LinearProgram) -> LpOutcome {
    let nv = lp.n_vars();
    let mut maps = Vec::with_capacity(nv);
    let mut col_upper: Vec<f64> = Vec::new();
    let mut col_cost: Vec<f64> = Vec::new();
    for j in 0..nv {
        let (lo, hi, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
        if lo > hi + FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: col_upper.len(), offset: lo });
            col_upper.push((hi - lo).max(0.0));
            col_cost.push(c);
        } else if hi.is_finite() {
            maps.push(VarMap::Mirror { col: col_upper.len(), offset: hi });
            col_upper.push(f64::INFINITY);
            col_cost.push(-c);
        } else {
            let pos = col_upper.len();
            maps.push(VarMap::Split { pos, neg: pos + 1 });
            col_upper.extend([f64::INFINITY, f64::INFINITY]);
            col_cost.extend([c, -c]);
        }
    }
    let n_struct = col_upper.len();
    let m = lp.constraints.len();

    // rows in internal coordinates, flipped so the right-hand side is >= 0
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut a = vec![0.0; n_struct];
        let mut rhs = c.rhs;
        for &(j, v) in &c.terms {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    a[col] += v;
                    rhs -= v * offset;
                }
                VarMap::Mirror { col, offset } => {
                    a[col] -= v;
                    rhs -= v * offset;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
            }
        }
        let mut sense = c.sense;
        if rhs < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        rows.push((a, sense, rhs));
    }

    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let n = n_struct + n_slack + n_art;
    let mut tab = Tableau {
        m,
        n,
        t: vec![0.0; m * n],
        beta: vec![0.0; m],
        basis: vec![0; m],
        status: vec![Status::AtLower; n],
        upper: vec![f64::INFINITY; n],
        d: vec![0.0; n],
        eligible: vec![true; n],
    };
    tab.upper[..n_struct].copy_from_slice(&col_upper);
    let mut phase1 = vec![0.0; n];
    let (mut s, mut a) = (n_struct, n_struct + n_slack);
    for (i, (coefs, sense, rhs)) in rows.iter().enumerate() {
        tab.t[i * n..i * n + n_struct].copy_from_slice(coefs);
        tab.beta[i] = *rhs;
        match sense {
            Sense::Le => {
                tab.t[i * n + s] = 1.0;
                tab.basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                tab.t[i * n + s] = -1.0;
                tab.t[i * n + a] = 1.0;
                tab.basis[i] = a;
                phase1[a] = 1.0;
                s += 1;
                a += 1;
            }
            Sense::Eq => {
                tab.t[i * n + a] = 1.0;
                tab.basis[i] = a;
                phase1[a] = 1.0;
                a += 1;
            }
        }
    }
    for &b in &tab.basis {
        tab.status[b] = Status::Basic;
    }

    if n_art > 0 {
        tab.set_costs(&phase1);
        if let Step::Stalled = tab.iterate(MAX_ITERATIONS) {
            return LpOutcome::Infeasible;
        }
        let infeas = tab.objective(&phase1);
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return LpOutcome::Infeasible;
        }
        // artificials stay pinned at zero from here on
        for j in n_struct + n_slack..n {
            tab.upper[j] = 0.0;
            tab.eligible[j] = false;
        }
    }

    let mut cost = vec![0.0; n];
    cost[..n_struct].copy_from_slice(&col_cost);
    tab.set_costs(&cost);
    match tab.iterate(MAX_ITERATIONS) {
        Step::Optimal => {}
        Step::Unbounded => return LpOutcome::Unbounded,
        Step::Stalled => return LpOutcome::Infeasible,
    }

    let mut internal = vec![0.0; n_struct];
    for (j, v) in internal.iter_mut().enumerate() {
        *v = tab.value_of(j);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, offset } => offset + internal[col],
            VarMap::Mirror { col, offset } => offset - internal[col],
            VarMap::Split { pos, neg } => internal[pos] - internal[neg],
        })
        .collect();
    let value = x.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_bound_constraint() {
        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 3.0);
        lp.add_constraint(vec![(x, 1.0)], Sense::Le, 10.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 3.0).abs() < 1e-9);
                assert!((value - 3.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tight_sum_constraint() {
        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(1.0, 0.0, 5.0);
        let y = lp.add_var(1.0, 0.0, 5.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 4.0);
        assert!((lp.solve().value().unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);

        let mut lp = LinearProgram::new(0);
        lp.add_var(1.0, 2.0, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn equality_and_mirrored_variables() {
        // max x + y  s.t. x + 2y = 4, x <= 2 (x unbounded below), y <= 3
        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(-1.0, f64::NEG_INFINITY, 2.0);
        let y = lp.add_var(-1.0, 0.0, 3.0);
        lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Sense::Eq, 4.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
                assert!((value + 3.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example under Dantzig pricing
        let mut lp = LinearProgram::new(0);
        let v: Vec<usize> = [-0.75, 150.0, -0.02, 6.0].iter().map(|&c| lp.add_var(c, 0.0, f64::INFINITY)).collect();
        lp.add_constraint(vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)], Sense::Le, 0.0);
        lp.add_constraint(vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)], Sense::Le, 0.0);
        lp.add_constraint(vec![(v[2], 1.0)], Sense::Le, 1.0);
        assert!((lp.solve().value().unwrap() + 0.05).abs() < 1e-9);
    }

    /// Enumerates every basic solution of a box-bounded LP: choose `n` active
    /// constraints among rows and bounds, solve the square system, keep the
    /// feasible points.
    fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
        let n = lp.n_vars();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &lp.constraints {
            let mut a = vec![0.0; n];
            for &(j, v) in &c.terms {
                a[j] += v;
            }
            planes.push((a, c.rhs));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), lp.lower[j]));
            planes.push((e, lp.upper[j]));
        }
        let mut best: Option<f64> = None;
        let mut pick = Vec::new();
        fn rec(
            start: usize,
            pick: &mut Vec<usize>,
            n: usize,
            planes: &[(Vec<f64>, f64)],
            lp: &LinearProgram,
            best: &mut Option<f64>,
        ) {
            if pick.len() == n {
                let a = nalgebra::DMatrix::from_fn(n, n, |i, j| planes[pick[i]].0[j]);
                let b = nalgebra::DVector::from_fn(n, |i, _| planes[pick[i]].1);
                if let Some(x) = a.lu().solve(&b) {
                    let x: Vec<f64> = x.iter().copied().collect();
                    if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= 1e-9 {
                        let v: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
                        *best = Some(best.map_or(v, |b: f64| b.min(v)));
                    }
                }
                return;
            }
            for k in start..planes.len() {
                pick.push(k);
                rec(k + 1, pick, n, planes, lp, best);
                pick.pop();
            }
        }
        rec(0, &mut pick, n, &planes, lp, &mut best);
        best
    }

    #[test]
    fn matches_vertex_enumeration_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 50 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=10);
            let mut lp = LinearProgram::new(0);
            for _ in 0..n {
                let lo = rng.random_range(-2.0..0.0);
                let hi = rng.random_range(0.5..2.0);
                lp.add_var(rng.random_range(-1.0..1.0), lo, hi);
            }
            // keep the origin feasible so most draws are informative
            for _ in 0..m {
                let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
                let sense = match rng.random_range(0..3) {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Le,
                };
                let rhs = match sense {
                    Sense::Le => rng.random_range(0.0..1.0),
                    _ => rng.random_range(-1.0..0.0),
                };
                lp.add_constraint(terms, sense, rhs);
            }
            let oracle = vertex_oracle(&lp).expect("origin is feasible");
            match lp.solve() {
                LpOutcome::Optimal { x, value } => {
                    assert!((value - oracle).abs() <= 1e-6, "simplex {value} vs oracle {oracle}");
                    assert!(lp.max_violation(&x) <= FEAS_TOL);
                }
                other => panic!("{other:?} for feasible bounded LP"),
            }
            checked += 1;
        }
    }
}
