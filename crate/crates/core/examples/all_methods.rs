//! Every explainer on the same imputed instance, including ARMIN with
//! multiple MICE completions.

use cxmiss::data::{mask_mcar, split, synth_regression, MaskSpec, RegressionSpec};
use cxmiss::explainers::{ExplainContext, Method, MethodParams};
use cxmiss::impute::{Imputer, ImputerKind, ImputerParams};
use cxmiss::model::{train, TrainConfig};

fn main() {
    let spec = RegressionSpec { n_rows: 800, n_features: 5, n_latent: 2, noise: 0.05, seed: 8 };
    let ds = synth_regression(&spec).unwrap().into_dataset("target", 0.5).unwrap();
    let parts = split(&ds, 2).unwrap();
    let clf = train(&parts.train, &TrainConfig { seed: 2, ..TrainConfig::default() }).unwrap();

    let x = &parts.test.features[0];
    let target = clf.class_of(x).opposite();
    let masked = mask_mcar(x, MaskSpec { m: 2, seed: 6 }).unwrap();
    let mice = Imputer::fit(ImputerKind::Mice, &parts.train, ImputerParams::default()).unwrap();
    let x_hat = mice.impute(&masked).unwrap();
    let params = MethodParams::default();
    let completions = mice.impute_multi(&masked, params.armin_draws, 2).unwrap();

    let ctx = ExplainContext::new(&clf, &parts.train.features, params, 2).unwrap();
    println!("masked {masked}, target class {}", target.as_u8());
    println!("{:<11} {:<13} {:>7} {:>11} {:>9}", "method", "status", "cost", "vs true x", "iters");
    for method in Method::ALL {
        let e = ctx.explain(method, &x_hat, target, 2, Some(&completions)).unwrap();
        let recourse_ok = e.has_point().then(|| {
            let applied: Vec<f64> = x.iter().zip(&e.delta).map(|(a, d)| (a + d).clamp(0.0, 1.0)).collect();
            clf.class_of(&applied) == target
        });
        println!(
            "{method:<11} {:<13} {:>7.3} {:>11} {:>9}",
            format!("{:?}", e.status),
            e.l1_norm(),
            match recourse_ok {
                Some(true) => "valid",
                Some(false) => "invalid",
                None => "-",
            },
            e.iterations
        );
    }
}
