//! Comparison methods: a quadratic penalty, a projection layer and a
//! DC3-style gradient correction, plus the active-set QP used for reference
//! optima and projections.
//!
//! All three use the same network shape as the feasible pipeline but take
//! only `x` as input and end in an identity head.

pub mod dc3;
pub mod projection;
pub mod qp;

use alloc::string::String;

use crate::error::{Error, Result};
use crate::neural::{
    pipeline_loss, run_minibatch, MlpModel, OptimizerConfig, OutputActivation, TrainHistory, TrainMode, TrainSample,
};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::Vector;

pub use dc3::{correct_independent, dc3_correct, half_violation, Correction};
pub use projection::{project_onto_polytope, project_with_active, Projection};
pub use qp::{reduced_qp, reference_optimum, solve_qp, solve_qp_from, QpProblem, QpSolution};

pub const DEFAULT_PENALTY: f64 = 1e4;
pub const DEFAULT_DC3_STEP: f64 = 1e-4;
pub const DEFAULT_DC3_ITERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Penalty,
    Projection,
    Dc3,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Penalty => "penalty",
            BaselineMethod::Projection => "projection",
            BaselineMethod::Dc3 => "dc3",
        }
    }

    /// Full vector for the penalty network, independent block otherwise.
    pub fn output_dim(self, red: &ReducedProblem) -> usize {
        match self {
            BaselineMethod::Penalty => red.parent.n_opt,
            BaselineMethod::Projection | BaselineMethod::Dc3 => red.n_indep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub penalty_coefficient: f64,
    pub dc3_step_size: f64,
    pub dc3_inner_iters_train: usize,
    pub dc3_inner_iters_test: usize,
    /// Loss for the projection network; the others minimise the penalised objective.
    pub projection_mode: TrainMode,
    pub optimizer: OptimizerConfig,
    pub normalize_inputs: bool,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            penalty_coefficient: DEFAULT_PENALTY,
            dc3_step_size: DEFAULT_DC3_STEP,
            dc3_inner_iters_train: DEFAULT_DC3_ITERS,
            dc3_inner_iters_test: DEFAULT_DC3_ITERS,
            projection_mode: TrainMode::SolverInLoop,
            optimizer: OptimizerConfig::default(),
            normalize_inputs: true,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.penalty_coefficient > 0.0) || !(self.dc3_step_size > 0.0) {
            return Err(Error::InvalidConfig(String::from(
                "baseline parameters must be positive",
            )));
        }
        Ok(())
    }
}

/// `[n_inp, hidden, out]` with an identity head.
pub fn baseline_model(method: BaselineMethod, red: &ReducedProblem, hidden: usize, seed: u64) -> Result<MlpModel> {
    MlpModel::with_hidden(
        red.n_inp(),
        hidden,
        method.output_dim(red),
        OutputActivation::Identity,
        seed,
    )
}

/// `f(u, x) + rho (||eq residual||^2 + ||max(ineq, 0)||^2)` and its gradient in `u`.
pub fn penalty_loss(red: &ReducedProblem, x: &Vector, u_full: &Vector, rho: f64) -> Result<(f64, Vector)> {
    let p = &*red.parent;
    p.check_point(u_full, x)?;
    let eq = p.equality_residual(u_full, x);
    let ineq = p.inequality_slack(u_full, x).map(|s| s.max(0.0));
    let value = p.objective.value(u_full, x) + rho * (eq.norm_squared() + ineq.norm_squared());
    let grad = p.objective.gradient(u_full, x) + (p.a_eq.tr_mul(&eq) + p.a_ineq.tr_mul(&ineq)) * (2.0 * rho);
    Ok((value, grad))
}

/// Trains a baseline network produced by [`baseline_model`].
pub fn baseline_train(
    model: &mut MlpModel,
    red: &ReducedProblem,
    samples: &[TrainSample],
    cfg: &BaselineConfig,
) -> Result<TrainHistory> {
    cfg.check()?;
    check_len("baseline input", red.n_inp(), model.n_in())?;
    check_len("baseline output", cfg.method.output_dim(red), model.n_out())?;
    if cfg.normalize_inputs {
        model.fit_normalization(samples.iter().map(|s| &s.x))?;
    }
    let rho = cfg.penalty_coefficient;
    run_minibatch(model, &cfg.optimizer, samples.len(), |m, i| {
        let s = &samples[i];
        let trace = m.forward_trace(&s.x)?;
        let out = trace.output();
        let grad_out = match cfg.method {
            BaselineMethod::Penalty => {
                let (loss, g) = penalty_loss(red, &s.x, out, rho)?;
                return Ok((loss, m.backward(&trace, &g)?));
            }
            BaselineMethod::Projection => {
                let proj = project_with_active(red, &s.x, out)?;
                let full = red.lift(&proj.point, &s.x)?;
                let (loss, g_indep) = pipeline_loss(red, cfg.projection_mode, s, &full)?;
                (loss, proj.backward(red, &g_indep))
            }
            BaselineMethod::Dc3 => {
                let corr = correct_independent(red, &s.x, out, cfg.dc3_step_size, cfg.dc3_inner_iters_train)?;
                let full = red.lift(&corr.point, &s.x)?;
                let (loss, g_full) = penalty_loss(red, &s.x, &full, rho)?;
                (loss, corr.backward(red, &red.pull_back_gradient(&g_full)))
            }
        };
        let (loss, g) = grad_out;
        Ok((loss, m.backward(&trace, &g)?))
    })
}

/// Full decision vector predicted by a trained baseline.
pub fn baseline_infer(model: &MlpModel, red: &ReducedProblem, x: &Vector, cfg: &BaselineConfig) -> Result<Vector> {
    let out = model.forward(x)?;
    match cfg.method {
        BaselineMethod::Penalty => Ok(out),
        BaselineMethod::Projection => red.lift(&project_onto_polytope(red, x, &out)?, x),
        BaselineMethod::Dc3 => {
            let corr = correct_independent(red, x, &out, cfg.dc3_step_size, cfg.dc3_inner_iters_test)?;
            red.lift(&corr.point, x)
        }
    }
}
