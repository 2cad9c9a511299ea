//! Mask a test row completely at random and fill it with each imputer.

use cxmiss::data::{mask_mcar, split, synth_regression, MaskSpec, RegressionSpec};
use cxmiss::impute::{Imputer, ImputerKind, ImputerParams};

fn main() {
    let spec = RegressionSpec { n_rows: 800, n_features: 5, n_latent: 2, noise: 0.05, seed: 3 };
    let ds = synth_regression(&spec).unwrap().into_dataset("target", 0.5).unwrap();
    let parts = split(&ds, 0).unwrap();

    let x = &parts.test.features[0];
    let masked = mask_mcar(x, MaskSpec { m: 2, seed: 11 }).unwrap();
    println!("true    {:?}", round(x));
    println!("masked  {masked}");

    for kind in ImputerKind::ALL {
        let imp = Imputer::fit(kind, &parts.train, ImputerParams::default()).unwrap();
        let filled = imp.impute(&masked).unwrap();
        let err: f64 = masked.missing().map(|i| (filled[i] - x[i]).abs()).sum();
        println!("{kind:<6}  {:?}  l1 error on missing {err:.3}", round(&filled));
    }

    let mice = Imputer::fit(ImputerKind::Mice, &parts.train, ImputerParams::default()).unwrap();
    for (j, draw) in mice.impute_multi(&masked, 4, 5).unwrap().iter().enumerate() {
        println!("mice draw {j}  {:?}", round(draw));
    }
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
