//! Plausibility, rank tests and correlation on small hand-made inputs.

use cxmiss::metrics::{mann_whitney_u, median, quantile, spearman, Lof};

fn main() {
    let grid: Vec<Vec<f64>> = (0..5).flat_map(|i| (0..5).map(move |j| vec![i as f64 * 0.1, j as f64 * 0.1])).collect();
    let lof = Lof::fit(&grid, 4).unwrap();
    for q in [[0.2, 0.2], [0.45, 0.1], [1.0, 1.0]] {
        println!("LOF score at {q:?}: {:.3}", lof.score(&q));
    }

    let robust = [0.91, 0.88, 0.95, 0.79, 0.86, 0.93];
    let plain = [0.71, 0.64, 0.80, 0.59, 0.75, 0.69];
    let t = mann_whitney_u(&robust, &plain).unwrap();
    println!("Mann-Whitney U = {}, p = {:.5} ({})", t.u, t.p_two_sided, if t.exact { "exact" } else { "normal" });
    println!("medians {:.3} vs {:.3}, IQR of first [{:.3}, {:.3}]", median(&robust), median(&plain), quantile(&robust, 0.25), quantile(&robust, 0.75));

    let lr = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2];
    let vrc = [0.10, 0.14, 0.21, 0.37, 0.61, 0.74];
    println!("Spearman(lr, vrc) = {:?}", spearman(&lr, &vrc));
    println!("Spearman with a constant side = {:?}", spearman(&lr, &[0.0; 6]));
}
