//! Minimum-ℓ1 counterfactual of a small ReLU network by branch and bound,
//! plus the LP-format dump of the encoding.

use cxmiss::model::Classifier;
use cxmiss::solver::{encode, solve_milo, MiloProblem};

fn main() {
    let clf = Classifier::new(
        vec![vec![1.5, -2.0], vec![-1.0, 2.5], vec![2.0, 1.0]],
        vec![0.1, -0.4, -1.2],
        vec![1.2, -1.5, 0.8],
        -0.2,
    )
    .unwrap();
    let x = [0.2, 0.7];
    let target = clf.class_of(&x).opposite();
    println!("x = {x:?}, class {}, target {}", clf.class_of(&x).as_u8(), target.as_u8());

    for margin in [0.0, 0.01, 0.1, 0.5] {
        let sol = solve_milo(&MiloProblem::new(&clf, &x, target, margin)).unwrap();
        println!(
            "margin {margin:<5} {:?}  cost {:.4}  x' {:?}  nodes {}",
            sol.status, sol.objective, sol.counterfactual, sol.nodes
        );
    }

    let model = encode(&MiloProblem::new(&clf, &x, target, 0.01)).unwrap();
    print!("{}", model.to_lp_text());
}
