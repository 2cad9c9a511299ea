//! A reduced benchmark: one synthetic dataset, a few methods, two
//! missingness levels. Prints the table and the robust vs non-robust test.

use cxmiss::data::RegressionSpec;
use cxmiss::explainers::Method;
use cxmiss::harness::{
    aggregate, render, render_aggregate, run_bench, BenchConfig, DatasetConfig, DatasetSource, GroupBy, ReportFormat,
    SeedConfig,
};

fn main() {
    let cfg = BenchConfig {
        datasets: vec![DatasetConfig {
            name: "toy".into(),
            source: DatasetSource::Synthetic {
                spec: RegressionSpec { n_rows: 600, n_features: 4, n_latent: 2, noise: 0.05, seed: 1 },
                threshold: 0.5,
            },
        }],
        n_batch: 40,
        m_values: vec![1, 2],
        methods: vec![Method::Mce, Method::Bls, Method::KdTreeNnce, Method::Rnce, Method::Mcer, Method::Stce],
        seeds: SeedConfig { master: 0, repetitions: 2 },
        ..BenchConfig::default()
    };
    let out = run_bench(&cfg).unwrap();
    println!("config {}", &out.manifest.config_hash[..12]);
    print!("{}", render(&out.rows, ReportFormat::Markdown).unwrap());
    println!();
    print!("{}", render_aggregate(&aggregate(&out.rows, GroupBy::Robust).unwrap(), ReportFormat::Markdown).unwrap());
}
