//! The two-feature toy model `score(x, y) = relu(x + y) - 4`.
//!
//! True input (1, 1) has its first feature missing and is imputed as (2, 1).
//! The cheapest counterfactual from the imputed point only moves y by 1,
//! which fails once the same recourse is applied to the real input.

use cxmiss::explainers::{milo_explain, MiloMode};
use cxmiss::metrics::{vcx, vrc};
use cxmiss::model::{Class, Classifier};
use cxmiss::solver::{solve_armin, InputBox};

fn main() {
    let clf = Classifier::fixture();
    let x_true = vec![1.0, 1.0];
    let x_hat = vec![2.0, 1.0];
    let space = InputBox::uniform(2, 0.0, 5.0);

    let mce = milo_explain(&clf, &x_hat, Class::One, MiloMode::Mce, 0.0, &space, 10_000).unwrap();
    println!("MCE  x' = {:?}  delta = {:?}  cost = {:.3}", mce.counterfactual, mce.delta, mce.l1_norm());
    let batch = [mce];
    println!("  vcx = {}", vcx(&clf, &batch, &[Class::One]).unwrap());
    println!("  vrc = {}  (recourse applied to the true input)", vrc(&clf, std::slice::from_ref(&x_true), &batch, &[Class::One]).unwrap());

    // one recourse valid for both plausible completions
    let completions = [x_hat.clone(), x_true.clone()];
    let armin = solve_armin(&clf, &completions, Class::One, 0.0, space).unwrap();
    println!("ARMIN delta = {:?}  cost = {:.3}", armin.delta, armin.objective);
    let applied: Vec<f64> = x_true.iter().zip(&armin.delta).map(|(a, d)| a + d).collect();
    println!("  true input + delta = {:?} -> class {}", applied, clf.class_of(&applied).as_u8());
}
