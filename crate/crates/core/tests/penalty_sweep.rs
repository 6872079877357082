//! Stiffer penalties leave smaller violations on a tiny dispatch problem.

use std::sync::Arc;

use looplc_core::baselines::{baseline_infer, baseline_model, baseline_train, BaselineConfig, BaselineMethod};
use looplc_core::dcopf::{generate_system, sample_dataset};
use looplc_core::neural::TrainSample;
use looplc_core::problem::instance_violation;
use looplc_core::reduction::reduce;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn median_violation_shrinks_as_rho_grows() {
    let system = generate_system(2, 2, 1, 3).unwrap();
    let red = reduce(Arc::new(system.to_lincon().unwrap())).unwrap();
    let data = sample_dataset(&system, 60, 0.1, 3).unwrap();
    let train: Vec<TrainSample> = data
        .inputs_pu(&data.train_idx)
        .into_iter()
        .map(|x| TrainSample { x, target: None })
        .collect();
    let test = data.inputs_pu(&data.test_idx);

    let mut medians = Vec::new();
    for rho in [1e2, 1e3, 1e4, 1e5, 1e6] {
        let mut cfg = BaselineConfig::new(BaselineMethod::Penalty);
        cfg.penalty_coefficient = rho;
        // curvature grows with rho, so the step shrinks with it; full batches and a
        // long run so the fit error sits below the rho-dependent bias
        cfg.optimizer.learning_rate = 3e-2 / rho;
        cfg.optimizer.epochs = 20_000;
        cfg.optimizer.batch_size = train.len();
        cfg.optimizer.seed = 5;
        let mut model = baseline_model(BaselineMethod::Penalty, &red, 16, 5).unwrap();
        baseline_train(&mut model, &red, &train, &cfg).unwrap();
        let gaps: Vec<f64> = test
            .iter()
            .map(|x| instance_violation(&red.parent, &baseline_infer(&model, &red, x, &cfg).unwrap(), x).unwrap())
            .collect();
        medians.push(median(gaps));
    }
    for w in medians.windows(2) {
        assert!(w[1] <= w[0], "medians not monotone: {medians:?}");
    }
    assert!(medians[4] < medians[0]);
}
