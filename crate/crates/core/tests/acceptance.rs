//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cxmiss::explainers::{Explanation, Method, Status};
use cxmiss::harness::{
    aggregate, config_base, run_bench_in, sweep_wachter, BenchConfig, BenchOutput, GroupBy, Prepared, ReportRow,
    SweepAxis, SweepConfig,
};
use cxmiss::impute::ImputerKind;
use cxmiss::metrics::{mann_whitney_u, median, spearman, vcx, vrc, Lof};
use cxmiss::model::{Class, Classifier};
use cxmiss::robustness::certify;
use cxmiss::solver::{solve_armin, solve_milo, InputBox, MiloProblem, MiloStatus};

const C1_BUDGET: Duration = Duration::from_secs(10 * 60);
const C2_BUDGET: Duration = Duration::from_secs(30 * 60);
const C2_MIN_GAP: f64 = 0.03;
const C2_ALPHA: f64 = 0.05;
const C3_TOL: f64 = 0.02;
const C4_TOL: f64 = 0.02;
const C4_MIN_SHARE: f64 = 0.75;
const C5_TOL: f64 = 1e-6;
const C6_EPS_TOL: f64 = 0.05;
const C7_BUDGET: Duration = Duration::from_secs(5 * 60);
const C7_NETS: usize = 50;
const C7_STEP: f64 = 1e-3;
const C7_TOL: f64 = 2e-3;
const THETA0: f64 = 0.01;
const C8_CASES: usize = 500;
const C8_TOL: f64 = 1e-9;
const C9_SAMPLES: usize = 10_000;

const COMPLETE: [Method; 8] = [
    Method::Bls,
    Method::KdTreeNnce,
    Method::Mce,
    Method::Armin,
    Method::Mcer,
    Method::Rnce,
    Method::Proplace,
    Method::Stce,
];
const ROBUST: [Method; 5] = [Method::Mcer, Method::Rnce, Method::Proplace, Method::Stce, Method::Apas];
const NON_ROBUST: [Method; 4] = [Method::Bls, Method::Mce, Method::Wachter, Method::KdTreeNnce];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_bench(name: &str) -> (BenchConfig, PathBuf) {
    let path = configs().join(name);
    (BenchConfig::from_file(&path).expect("bench config"), config_base(&path))
}

fn c1(cfg: &BenchConfig, base: &Path, out: &BenchOutput, elapsed: Duration) -> Outcome {
    let mut models: BTreeMap<(String, u64), Classifier> = BTreeMap::new();
    for dc in &cfg.datasets {
        let ds = dc.load(base).expect("dataset").dataset;
        for &seed in &out.manifest.seeds {
            let prep = Prepared::new(&dc.name, &ds, &cfg.model, cfg.n_batch, seed).expect("prepare");
            models.insert((dc.name.clone(), seed), prep.clf);
        }
    }
    let mut checked = 0;
    let mut bad_points = 0;
    let mut bad_rows = Vec::new();
    for (row, expl) in out.rows.iter().zip(&out.explanations) {
        if !COMPLETE.contains(&row.method) {
            continue;
        }
        let clf = &models[&(row.dataset.clone(), row.seed)];
        for e in expl.iter().filter(|e| e.status == Status::Valid) {
            checked += 1;
            if clf.class_of(&e.counterfactual) != e.target {
                bad_points += 1;
            }
        }
        if row.vcx != 1.0 {
            bad_rows.push(format!("{}/{}/{}/m={} vcx={}", row.dataset, row.method, row.imputer, row.m, row.vcx));
        }
    }
    let pass = bad_points == 0 && bad_rows.is_empty() && elapsed <= C1_BUDGET && checked > 0;
    outcome(
        pass,
        format!(
            "{checked} valid points checked, {bad_points} misclassified, {} rows with VCX < 1 {:?}, {:.0} s (budget {} s)",
            bad_rows.len(),
            bad_rows,
            elapsed.as_secs_f64(),
            C1_BUDGET.as_secs()
        ),
    )
}

fn c2() -> Outcome {
    let (mut cfg, base) = load_bench("bench.json");
    cfg.m_values = vec![1];
    cfg.seeds.repetitions = 3;
    cfg.methods = ROBUST.iter().chain(&NON_ROBUST).copied().collect();
    let start = Instant::now();
    let out = run_bench_in(&cfg, &base).expect("bench");
    let elapsed = start.elapsed();
    let agg = aggregate(&out.rows, GroupBy::Robust).expect("aggregate");
    let robust = agg.groups.iter().find(|g| g.group == "robust").expect("robust group");
    let other = agg.groups.iter().find(|g| g.group == "non-robust").expect("non-robust group");
    let test = &agg.comparisons[0];
    let gap = robust.median - other.median;
    outcome(
        gap >= C2_MIN_GAP && test.p < C2_ALPHA && elapsed <= C2_BUDGET,
        format!(
            "median VRC robust {:.3} (n={}) vs non-robust {:.3} (n={}), gap {gap:.3} (min {C2_MIN_GAP}), U={} p={:.2e} (alpha {C2_ALPHA}), {:.0} s (budget {} s)",
            robust.median,
            robust.n,
            other.median,
            other.n,
            test.u,
            test.p,
            elapsed.as_secs_f64(),
            C2_BUDGET.as_secs()
        ),
    )
}

fn vrc_values(rows: &[ReportRow], keep: impl Fn(&ReportRow) -> bool) -> Vec<f64> {
    rows.iter().filter(|r| keep(r)).map(|r| r.vrc).collect()
}

fn c3(rows: &[ReportRow]) -> Outcome {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for method in Method::ALL {
        let at = |m: usize| median(&vrc_values(rows, |r| r.method == method && r.m == m));
        let (one, three) = (at(1), at(3));
        summary.push(format!("{method} {one:.2}->{three:.2}"));
        if !(three <= one + C3_TOL) {
            failures.push(method.to_string());
        }
    }
    outcome(
        failures.is_empty(),
        format!("median VRC m=1 -> m=3 (tol {C3_TOL}): {}; violations {:?}", summary.join(", "), failures),
    )
}

fn c4(rows: &[ReportRow]) -> Outcome {
    let datasets: Vec<String> = {
        let mut d: Vec<String> = rows.iter().map(|r| r.dataset.clone()).collect();
        d.dedup();
        d
    };
    let mut held = 0;
    let mut total = 0;
    let mut misses = Vec::new();
    for d in &datasets {
        for method in Method::ALL {
            let mean_vrc = |k: ImputerKind| {
                let v = vrc_values(rows, |r| &r.dataset == d && r.method == method && r.imputer == k);
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let (Some(knn), Some(mice), Some(mean)) =
                (mean_vrc(ImputerKind::Knn), mean_vrc(ImputerKind::Mice), mean_vrc(ImputerKind::Simple))
            else {
                continue;
            };
            total += 1;
            if knn >= mice - C4_TOL && mice >= mean - C4_TOL {
                held += 1;
            } else {
                misses.push(format!("{d}/{method} knn {knn:.3} mice {mice:.3} mean {mean:.3}"));
            }
        }
    }
    let share = held as f64 / total as f64;
    outcome(
        total > 0 && share >= C4_MIN_SHARE,
        format!("ordering holds on {held}/{total} pairs ({share:.2}, need {C4_MIN_SHARE}); misses {misses:?}"),
    )
}

/// Mean recourse norm of MCE against each robust method per cell, over the
/// instances where both return a valid counterfactual.
fn c5(out: &BenchOutput) -> Outcome {
    let key = |r: &ReportRow| (r.dataset.clone(), r.imputer, r.m, r.seed);
    let mut cells: BTreeMap<_, BTreeMap<Method, &Vec<Explanation>>> = BTreeMap::new();
    for (row, e) in out.rows.iter().zip(&out.explanations) {
        cells.entry(key(row)).or_default().insert(row.method, e);
    }
    let mut compared = 0;
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (k, methods) in &cells {
        let Some(mce) = methods.get(&Method::Mce) else { continue };
        for robust in ROBUST {
            let Some(other) = methods.get(&robust) else { continue };
            let pairs: Vec<(f64, f64)> = mce
                .iter()
                .zip(other.iter())
                .filter(|(a, b)| a.status == Status::Valid && b.status == Status::Valid)
                .map(|(a, b)| (a.l1_norm(), b.l1_norm()))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            compared += 1;
            let n = pairs.len() as f64;
            let a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            worst = worst.max(a - b);
            if a > b + C5_TOL {
                violations.push(format!("{}/{}/m={} {robust}: mce {a:.4} > {b:.4}", k.0, k.1, k.2));
            }
        }
    }
    outcome(
        compared > 0 && violations.is_empty(),
        format!(
            "{compared} (cell, robust method) comparisons, max mce - robust {worst:.2e} (tol {C5_TOL}); violations {violations:?}"
        ),
    )
}

fn load_sweep(name: &str) -> (SweepConfig, PathBuf) {
    let path = configs().join(name);
    (SweepConfig::from_file(&path).expect("sweep config"), config_base(&path))
}

fn c6() -> Outcome {
    let (cfg, base) = load_sweep("sweep_lr.json");
    assert_eq!(cfg.axis_x, SweepAxis::Lr);
    let cells = sweep_wachter(&cfg, &base).expect("lr sweep");
    let mut defined = 0;
    let mut negative = Vec::new();
    for &lambda in &cfg.grid_y {
        let col: Vec<_> = cells.iter().filter(|c| c.lambda == lambda).collect();
        let lr: Vec<f64> = col.iter().map(|c| c.x).collect();
        let v: Vec<f64> = col.iter().map(|c| c.vrc).collect();
        if let Some(rho) = spearman(&lr, &v) {
            defined += 1;
            if rho < 0.0 {
                negative.push(format!("lambda={lambda} rho={rho:.3}"));
            }
        }
    }

    let (mut eps_cfg, base) = load_sweep("sweep_eps.json");
    eps_cfg.grid_x = vec![0.001, 0.5];
    eps_cfg.grid_y = vec![0.0];
    let mut eps_fail = Vec::new();
    for &lr in &cfg.grid_x {
        eps_cfg.fixed.lr = lr;
        let cells = sweep_wachter(&eps_cfg, &base).expect("eps sweep");
        let at = |e: f64| cells.iter().find(|c| c.x == e).expect("grid point").vrc;
        if at(0.5) < at(0.001) - C6_EPS_TOL {
            eps_fail.push(format!("lr={lr}: {:.2} < {:.2}", at(0.5), at(0.001)));
        }
    }
    outcome(
        defined > 0 && negative.is_empty() && eps_fail.is_empty(),
        format!(
            "Spearman(lr, VRC) defined on {defined}/{} lambda columns, negative {negative:?}; eps 0.5 vs 0.001 at lambda=0 over {} lr values (tol {C6_EPS_TOL}), failures {eps_fail:?}",
            cfg.grid_y.len(),
            cfg.grid_x.len()
        ),
    )
}

fn random_net(rng: &mut ChaCha8Rng, n: usize) -> Classifier {
    let hidden = rng.random_range(1..=4);
    let w1 = (0..hidden).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let b1 = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w2 = (0..hidden).map(|_| rng.random_range(-3.0..3.0)).collect();
    Classifier::new(w1, b1, w2, rng.random_range(-1.0..1.0)).expect("shapes")
}

/// Cheapest grid point of the unit square clearing the margin.
fn grid_oracle(clf: &Classifier, x: &[f64], target: Class, margin: f64) -> Option<f64> {
    let steps = (1.0 / C7_STEP).round() as usize;
    let mut best: Option<f64> = None;
    for i in 0..=steps {
        let a = i as f64 * C7_STEP;
        let da = (a - x[0]).abs();
        if best.is_some_and(|b| da >= b) {
            continue;
        }
        for j in 0..=steps {
            let b = j as f64 * C7_STEP;
            let d = da + (b - x[1]).abs();
            if best.is_some_and(|bst| d >= bst) {
                continue;
            }
            if target.sign() * clf.score(&[a, b]) >= margin {
                best = Some(d);
            }
        }
    }
    best
}

fn c7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    let mut feasible = 0;
    for net in 0..C7_NETS {
        let clf = random_net(&mut rng, 2);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
        let t = clf.class_of(&x).opposite();
        let sol = solve_milo(&MiloProblem::new(&clf, &x, t, THETA0)).expect("solve");
        let oracle = grid_oracle(&clf, &x, t, THETA0);
        match (sol.status, oracle) {
            (MiloStatus::Optimal, Some(o)) if !sol.delta.is_empty() => {
                feasible += 1;
                let gap = (sol.objective - o).abs();
                worst = worst.max(gap);
                if gap > C7_TOL {
                    mismatches.push(format!("net {net}: milo {:.5} grid {o:.5}", sol.objective));
                }
            }
            (MiloStatus::Infeasible, None) => {}
            (s, o) => mismatches.push(format!("net {net}: milo {s:?} grid {o:?}")),
        }
    }
    let f = Classifier::fixture();
    let armin = solve_armin(&f, &[vec![2.0, 1.0], vec![1.0, 1.0]], Class::One, THETA0, InputBox::uniform(2, 0.0, 5.0))
        .expect("armin");
    let armin_ok = (armin.objective - 2.0).abs() <= THETA0 + 1e-9;
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && feasible > 0 && armin_ok && elapsed <= C7_BUDGET,
        format!(
            "{C7_NETS} nets ({feasible} feasible), max |milo - grid| {worst:.2e} (tol {C7_TOL}), mismatches {mismatches:?}; two-completion recourse {:.4} (2 ± {THETA0}); {:.0} s (budget {} s)",
            armin.objective,
            elapsed.as_secs_f64(),
            C7_BUDGET.as_secs()
        ),
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// LOF straight from the definition: neighbourhoods include ties at the
/// k-distance, reference points exclude themselves.
fn lof_oracle(reference: &[Vec<f64>], k: usize, q: &[f64]) -> f64 {
    let neighbours = |p: &[f64], skip: Option<usize>| -> (f64, Vec<usize>) {
        let mut d: Vec<(f64, usize)> =
            reference.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(i, r)| (dist(p, r), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kd = d[k - 1].0;
        (kd, d.iter().filter(|(x, _)| *x <= kd).map(|&(_, i)| i).collect())
    };
    let kdist: Vec<f64> = (0..reference.len()).map(|i| neighbours(&reference[i], Some(i)).0).collect();
    let lrd = |p: &[f64], skip: Option<usize>| {
        let (_, nb) = neighbours(p, skip);
        let reach: f64 = nb.iter().map(|&o| kdist[o].max(dist(p, &reference[o]))).sum();
        nb.len() as f64 / reach
    };
    let (_, nb) = neighbours(q, None);
    let mean: f64 = nb.iter().map(|&o| lrd(&reference[o], Some(o))).sum::<f64>() / nb.len() as f64;
    mean / lrd(q, None)
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for case in 0..C8_CASES {
        let k = [2, 3, 5][case % 3];
        let dim = rng.random_range(1..=4);
        let rows = rng.random_range(k + 2..=30);
        let reference: Vec<Vec<f64>> = (0..rows).map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.2..1.2)).collect();
        let lof = Lof::fit(&reference, k).expect("fit");
        let want = lof_oracle(&reference, k, &q);
        worst = worst.max((lof.score(&q) + want).abs());
    }
    let lof_ok = worst <= C8_TOL;

    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).expect("test");
    let mw_ok = (mw.p_two_sided - 0.1).abs() < 1e-12 && mw.exact;

    let f = Classifier::fixture();
    let e = Explanation {
        counterfactual: vec![2.0, 2.0],
        delta: vec![0.0, 1.0],
        target: Class::One,
        method: Method::Mce,
        status: Status::Valid,
        solve_time: Duration::ZERO,
        iterations: 0,
    };
    let vrc_v = vrc(&f, &[vec![1.0, 1.0]], std::slice::from_ref(&e), &[Class::One]).expect("vrc");
    let vcx_v = vcx(&f, &[e], &[Class::One]).expect("vcx");
    outcome(
        lof_ok && mw_ok && vrc_v == 0.0 && vcx_v == 1.0,
        format!(
            "LOF max error {worst:.2e} over {C8_CASES} cases (tol {C8_TOL}); Mann-Whitney p {} exact={}; fixture vrc {vrc_v} vcx {vcx_v}",
            mw.p_two_sided, mw.exact
        ),
    )
}

fn c9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let per_point = 100;
    let mut samples = 0;
    let mut flips = 0;
    let mut points = 0;
    while samples < C9_SAMPLES {
        let n = rng.random_range(2..=5);
        let clf = random_net(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t = clf.class_of(&x);
        let radius = rng.random_range(0.001..0.1);
        if !certify(&clf, &x, t, radius) {
            continue;
        }
        points += 1;
        for _ in 0..per_point {
            if clf.perturbed(radius, &mut rng).class_of(&x) != t {
                flips += 1;
            }
            samples += 1;
        }
    }
    outcome(flips == 0, format!("{samples} perturbations of {points} certified points, {flips} class flips"))
}

fn c10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_cxmiss");
    let config = configs().join("smoke.json");
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["bench", config.to_str().expect("utf-8 path"), "--seed", "11", "--out"])
            .arg(&out)
            .status()
            .expect("run bench");
        assert!(status.success(), "bench exited with {status}");
        let read = |f: &str| std::fs::read(out.join(f)).expect("output file");
        (read("rows.csv"), read("manifest.json"))
    };
    let (rows_a, manifest_a) = run("a");
    let (rows_b, manifest_b) = run("b");
    outcome(
        rows_a == rows_b && manifest_a == manifest_b && !rows_a.is_empty(),
        format!(
            "rows.csv {} bytes identical={}, manifest.json {} bytes identical={}",
            rows_a.len(),
            rows_a == rows_b,
            manifest_a.len(),
            manifest_a == manifest_b
        ),
    )
}

fn report(id: usize, name: &str, o: &Outcome, elapsed: Duration) -> bool {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {tag} {name} [{:.1} s]: {}", elapsed.as_secs_f64(), o.detail);
    o.pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut all = true;

    let (cfg, base) = load_bench("bench.json");
    let start = Instant::now();
    let bench = run_bench_in(&cfg, &base).expect("default bench");
    let bench_time = start.elapsed();

    let (o, t) = timed(|| c1(&cfg, &base, &bench, bench_time));
    all &= report(1, "counterfactual validity of complete methods", &o, bench_time + t);
    let (o, t) = timed(c2);
    all &= report(2, "robust methods beat non-robust on VRC", &o, t);
    let (o, t) = timed(|| c3(&bench.rows));
    all &= report(3, "VRC degrades with missingness", &o, t);
    let (o, t) = timed(|| c4(&bench.rows));
    all &= report(4, "imputer ordering knn >= mice >= mean", &o, t);
    let (o, t) = timed(|| c5(&bench));
    all &= report(5, "MCE is the cheapest recourse", &o, t);
    let (o, t) = timed(c6);
    all &= report(6, "Wachter sweep trends", &o, t);
    let (o, t) = timed(c7);
    all &= report(7, "solver matches grid oracle", &o, t);
    let (o, t) = timed(c8);
    all &= report(8, "metric oracles", &o, t);
    let (o, t) = timed(c9);
    all &= report(9, "interval certificates are sound", &o, t);
    let (o, t) = timed(c10);
    all &= report(10, "bench output is byte-identical across runs", &o, t);

    if !all {
        std::process::exit(1);
    }
}
