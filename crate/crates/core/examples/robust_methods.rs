//! Robust explainers on one masked instance, checked against perturbed
//! copies of the model.

use cxmiss::data::{mask_mcar, split, synth_regression, MaskSpec, RegressionSpec};
use cxmiss::explainers::{ExplainContext, Method, MethodParams};
use cxmiss::impute::{Imputer, ImputerKind, ImputerParams};
use cxmiss::model::{train, TrainConfig};
use cxmiss::robustness::{certify, sample_models};

fn main() {
    let spec = RegressionSpec { n_rows: 600, n_features: 4, n_latent: 2, noise: 0.05, seed: 2 };
    let ds = synth_regression(&spec).unwrap().into_dataset("target", 0.5).unwrap();
    let parts = split(&ds, 1).unwrap();
    let clf = train(&parts.train, &TrainConfig { seed: 1, ..TrainConfig::default() }).unwrap();

    let x = &parts.test.features[3];
    let target = clf.class_of(x).opposite();
    let masked = mask_mcar(x, MaskSpec { m: 1, seed: 4 }).unwrap();
    let x_hat = Imputer::fit(ImputerKind::Knn, &parts.train, ImputerParams::default()).unwrap().impute(&masked).unwrap();

    let params = MethodParams::default();
    let ctx = ExplainContext::new(&clf, &parts.train.features, params, 1).unwrap();
    let shifted = sample_models(&clf, 200, params.radius, 99);

    println!("{:<10} {:>8} {:>10} {:>10}", "method", "cost", "certified", "agreement");
    for method in [Method::Mce, Method::Mcer, Method::Rnce, Method::Proplace, Method::Stce, Method::Apas] {
        let e = ctx.explain(method, &x_hat, target, 1, None).unwrap();
        if !e.has_point() {
            println!("{method:<10} no counterfactual");
            continue;
        }
        let cf = &e.counterfactual;
        let agree = shifted.members().iter().filter(|m| m.class_of(cf) == target).count();
        println!(
            "{method:<10} {:>8.3} {:>10} {:>9}%",
            e.l1_norm(),
            certify(&clf, cf, target, params.radius),
            agree * 100 / shifted.len()
        );
    }
}
