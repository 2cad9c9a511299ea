//! Recourse validity of gradient-based counterfactuals over a learning-rate
//! by λ grid, printed as a heatmap.

use std::path::Path;

use cxmiss::data::RegressionSpec;
use cxmiss::harness::{sweep_wachter, DatasetConfig, DatasetSource, SweepConfig};

fn main() {
    let cfg = SweepConfig {
        dataset: Some(DatasetConfig {
            name: "toy".into(),
            source: DatasetSource::Synthetic {
                spec: RegressionSpec { n_rows: 800, n_features: 6, n_latent: 3, noise: 0.05, seed: 1 },
                threshold: 0.5,
            },
        }),
        grid_y: vec![0.0, 0.5, 0.8, 0.9, 1.0],
        n_batch: 60,
        ..SweepConfig::default()
    };
    let cells = sweep_wachter(&cfg, Path::new(".")).unwrap();
    print!("{:>8}", "λ \\ lr");
    for lr in &cfg.grid_x {
        print!("{lr:>7}");
    }
    println!();
    for &lambda in &cfg.grid_y {
        print!("{lambda:>8}");
        for c in cells.iter().filter(|c| c.lambda == lambda) {
            print!("{:>7.2}", c.vrc);
        }
        println!();
    }
}
