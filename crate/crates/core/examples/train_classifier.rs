//! Generate a synthetic regression table, binarize it, split and train.

use cxmiss::data::{split, synth_regression, RegressionSpec};
use cxmiss::model::{train, Classifier, TrainConfig};

fn main() {
    let spec = RegressionSpec { n_rows: 1000, n_features: 6, n_latent: 3, noise: 0.05, seed: 1 };
    let ds = synth_regression(&spec).unwrap().into_dataset("target", 0.5).unwrap();
    println!("{} rows, {} features, class counts {:?}", ds.n_rows(), ds.n_features(), ds.class_counts());

    let parts = split(&ds, 7).unwrap();
    let cfg = TrainConfig { hidden_width: 16, epochs: 200, seed: 7, ..TrainConfig::default() };
    let clf = train(&parts.train, &cfg).unwrap();
    println!("train accuracy {:.3}", clf.accuracy(&parts.train));
    println!("test accuracy  {:.3}", clf.accuracy(&parts.test));

    let x = &parts.test.features[0];
    let p = clf.predict(x).unwrap();
    println!("first test row: score {:.3}, p(1) {:.3}, class {}", p.score, clf.probability(x), p.class.as_u8());

    let path = std::env::temp_dir().join("cxmiss_example.model.json");
    clf.save(&path).unwrap();
    assert_eq!(Classifier::load(&path).unwrap(), clf);
    println!("saved and reloaded {}", path.display());
}
