use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interior::{interior_points, InteriorStrategy, Phase1Problem};
use crate::neural::mlp::{MlpModel, OutputActivation};
use crate::neural::pipeline::{network_input, pipeline_backward, pipeline_forward};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainMode {
    /// Squared distance to reference optima.
    SolverInLoop,
    /// The task objective itself.
    ObjectiveOnly,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::SolverInLoop => "solver_in_loop",
            TrainMode::ObjectiveOnly => "objective_only",
        }
    }
}

/// Minibatch gradient descent with heavy-ball momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn check(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(alloc::format!("momentum {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub optimizer: OptimizerConfig,
    pub interior: InteriorStrategy,
    /// Fit input standardisation on the training inputs first.
    pub normalize_inputs: bool,
}

impl TrainConfig {
    pub fn new(mode: TrainMode) -> Self {
        Self {
            mode,
            optimizer: OptimizerConfig::default(),
            interior: InteriorStrategy::default(),
            normalize_inputs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub x: Vector,
    /// Reference optimum over the full decision vector.
    pub target: Option<Vector>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean per-sample loss seen during each epoch.
    pub epoch_loss: Vec<f64>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

/// Runs the optimizer over `n_samples` items. `sample_grad(model, i)` returns
/// the loss of item `i` and its parameter gradient; the step uses the batch mean.
/// Batches are visited in a seeded shuffle and summed in a fixed order.
pub fn run_minibatch<F>(
    model: &mut MlpModel,
    opt: &OptimizerConfig,
    n_samples: usize,
    mut sample_grad: F,
) -> Result<TrainHistory>
where
    F: FnMut(&MlpModel, usize) -> Result<(f64, Vector)>,
{
    opt.check()?;
    if n_samples == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut params = model.params();
    let mut velocity = Vector::zeros(params.len());
    let mut history = TrainHistory::default();
    for epoch in 0..opt.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (batch, chunk) in order.chunks(opt.batch_size).enumerate() {
            let mut grad = Vector::zeros(params.len());
            let mut batch_total = 0.0;
            for &i in chunk {
                let (loss, g) = sample_grad(model, i)?;
                if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteLoss { epoch, batch, loss });
                }
                batch_total += loss;
                grad += g;
            }
            let n = chunk.len() as f64;
            grad /= n;
            epoch_total += batch_total;
            velocity = velocity * opt.momentum + grad;
            params.axpy(-opt.learning_rate, &velocity, 1.0);
            model.set_params(&params)?;
        }
        history.epoch_loss.push(epoch_total / n_samples as f64);
    }
    Ok(history)
}

/// Loss and independent-block gradient of one pipeline output.
pub fn pipeline_loss(
    red: &ReducedProblem,
    mode: TrainMode,
    sample: &TrainSample,
    u_full: &Vector,
) -> Result<(f64, Vector)> {
    match mode {
        TrainMode::SolverInLoop => {
            let target = sample
                .target
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("solver-in-loop training needs reference optima".into()))?;
            check_len("reference optimum", u_full.len(), target.len())?;
            let diff = u_full - target;
            Ok((diff.norm_squared(), red.pull_back_gradient(&(diff * 2.0))))
        }
        TrainMode::ObjectiveOnly => {
            let f = &red.parent.objective;
            Ok((
                f.value(u_full, &sample.x),
                red.pull_back_gradient(&f.gradient(u_full, &sample.x)),
            ))
        }
    }
}

/// Trains the feasibility-guaranteed pipeline; interior points come from `cfg.interior`.
pub fn train(
    model: &mut MlpModel,
    red: &ReducedProblem,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    let xs: Vec<Vector> = samples.iter().map(|s| s.x.clone()).collect();
    let interiors = interior_points(red, &xs, &cfg.interior)?;
    train_with_interiors(model, red, samples, &interiors, cfg)
}

/// As [`train`], with one precomputed interior point per sample.
pub fn train_with_interiors(
    model: &mut MlpModel,
    red: &ReducedProblem,
    samples: &[TrainSample],
    interiors: &[Vector],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    check_len("interior points", samples.len(), interiors.len())?;
    if cfg.mode == TrainMode::SolverInLoop && samples.iter().any(|s| s.target.is_none()) {
        return Err(Error::InvalidConfig(
            "solver-in-loop training needs reference optima".into(),
        ));
    }
    if cfg.normalize_inputs {
        let inputs: Vec<Vector> = samples
            .iter()
            .zip(interiors)
            .map(|(s, u_o)| network_input(&s.x, u_o))
            .collect();
        model.fit_normalization(inputs.iter())?;
    }
    run_minibatch(model, &cfg.optimizer, samples.len(), |m, i| {
        let sample = &samples[i];
        let (full, trace) = pipeline_forward(m, red, &sample.x, &interiors[i])?;
        let (loss, grad_u) = pipeline_loss(red, cfg.mode, sample, &full)?;
        Ok((loss, pipeline_backward(m, &trace, &grad_u)?))
    })
}

/// Trains a direction network on the phase-I problem by minimising `u_a`
/// through the feasible pipeline, anchored at each input's analytic interior point.
pub fn train_phase1(
    phase1: &Phase1Problem,
    xs: &[Vector],
    hidden: usize,
    optimizer: &OptimizerConfig,
) -> Result<(MlpModel, TrainHistory)> {
    let red = &phase1.reduced;
    let mut model = MlpModel::with_hidden(
        red.n_inp() + red.n_indep(),
        hidden,
        red.n_indep(),
        OutputActivation::Tanh,
        optimizer.seed,
    )?;
    let anchors = xs.iter().map(|x| phase1.anchor(x)).collect::<Result<Vec<_>>>()?;
    let samples: Vec<TrainSample> = xs
        .iter()
        .map(|x| TrainSample {
            x: x.clone(),
            target: None,
        })
        .collect();
    let cfg = TrainConfig {
        mode: TrainMode::ObjectiveOnly,
        optimizer: optimizer.clone(),
        interior: InteriorStrategy::default(),
        normalize_inputs: true,
    };
    let history = train_with_interiors(&mut model, red, &samples, &anchors, &cfg)?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::OutputActivation;
    use crate::neural::pipeline::pipeline_infer;
    use crate::problem::{feasibility_gap, Builtin, LinConProblem};
    use crate::reduction::reduce;
    use crate::Matrix;
    use alloc::sync::Arc;
    use rand::Rng;

    // min ||u||^2 over the box [x - 1, x + 1]^2
    fn moving_box() -> ReducedProblem {
        let mut a = Matrix::zeros(4, 2);
        let mut b = Matrix::zeros(4, 2);
        for i in 0..2 {
            a[(i, i)] = 1.0;
            b[(i, i)] = -1.0;
            a[(2 + i, i)] = -1.0;
            b[(2 + i, i)] = 1.0;
        }
        let p = LinConProblem::new(2, 2, Arc::new(Builtin::SumSquares)).with_inequalities(
            a,
            b,
            Vector::from_element(4, -1.0),
        );
        reduce(Arc::new(p)).unwrap()
    }

    fn samples(n: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| TrainSample {
                x: Vector::from_fn(2, |_, _| rng.random_range(-0.5..0.5)),
                target: Some(Vector::zeros(2)),
            })
            .collect()
    }

    fn config(mode: TrainMode, epochs: usize) -> TrainConfig {
        let mut cfg = TrainConfig::new(mode);
        cfg.optimizer.epochs = epochs;
        cfg.optimizer.seed = 3;
        cfg
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let red = moving_box();
        let data = samples(20, 1);
        let mut m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, 1).unwrap();
        let mut cfg = config(TrainMode::ObjectiveOnly, 5);
        cfg.optimizer.learning_rate = 0.0;
        let h = train(&mut m, &red, &data, &cfg).unwrap();
        assert!(h
            .epoch_loss
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0].abs()));
    }

    #[test]
    fn objective_training_reduces_loss_and_stays_feasible() {
        let red = moving_box();
        let data = samples(32, 2);
        let mut m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, 2).unwrap();
        let h = train(&mut m, &red, &data, &config(TrainMode::ObjectiveOnly, 60)).unwrap();
        assert!(h.last().unwrap() < 0.5 * h.epoch_loss[0]);
        for s in &data {
            let u = pipeline_infer(&m, &red, &s.x, &s.x).unwrap();
            assert!(feasibility_gap(&red.parent, [(&u, &s.x)]).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let red = moving_box();
        let data = samples(16, 3);
        let run = || {
            let mut m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, 4).unwrap();
            let h = train(&mut m, &red, &data, &config(TrainMode::SolverInLoop, 10)).unwrap();
            (m.params(), h)
        };
        let (pa, ha) = run();
        let (pb, hb) = run();
        assert!(pa.iter().zip(pb.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(ha, hb);
    }

    #[test]
    fn solver_mode_requires_targets() {
        let red = moving_box();
        let mut data = samples(4, 4);
        data[2].target = None;
        let mut m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, 4).unwrap();
        assert!(matches!(
            train(&mut m, &red, &data, &config(TrainMode::SolverInLoop, 1)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut m = MlpModel::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        let opt = OptimizerConfig {
            epochs: 3,
            ..OptimizerConfig::default()
        };
        let r = run_minibatch(&mut m, &opt, 4, |_, i| {
            Ok((if i == 2 { f64::NAN } else { 1.0 }, Vector::zeros(2)))
        });
        assert!(matches!(r, Err(Error::NonFiniteLoss { epoch: 0, .. })));
    }
}
