//! End-to-end DCOPF benchmark: reference optima from the QP oracle, one
//! trained model per method, gaps on the test half and inference timing.
//!
//! Evaluation fans out over test instances on a rayon pool and collects in
//! input order, so every number except wall-clock timings is reproducible.
//! Timings run on the calling thread, one instance at a time. The feasible
//! pipeline is timed with its interior point already known; the finder is
//! timed separately and logged.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use looplc_core::baselines::{
    baseline_infer, baseline_model, baseline_train, reference_optimum, BaselineConfig, BaselineMethod,
};
use looplc_core::dcopf::{DcopfDataset, DcopfSystem};
use looplc_core::interior::{
    build_bfs_structures, find_interior_artificial, find_interior_bfs_average, InteriorStrategy,
};
use looplc_core::neural::{
    pipeline_infer, train_with_interiors, MlpModel, OptimizerConfig, OutputActivation, TrainConfig, TrainMode,
    TrainSample, DEFAULT_HIDDEN,
};
use looplc_core::problem::{instance_violation, relative_l1_gap};
use looplc_core::reduction::{reduce, ReducedProblem};
use looplc_core::Vector;
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LOOP_LC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Loop,
    Penalty,
    Projection,
    Dc3,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Loop, Method::Penalty, Method::Projection, Method::Dc3];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Loop => "loop",
            Method::Penalty => "penalty",
            Method::Projection => "projection",
            Method::Dc3 => "dc3",
        }
    }

    pub fn parse(name: &str) -> AppResult<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == name).ok_or_else(|| {
            AppError::Usage(format!(
                "unknown method `{name}` (expected loop, penalty, projection or dc3)"
            ))
        })
    }

    pub fn parse_list(list: &str) -> AppResult<Vec<Self>> {
        let methods = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Self::parse)
            .collect::<AppResult<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(AppError::Usage("no methods given".into()));
        }
        Ok(methods)
    }

    fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::Loop => None,
            Method::Penalty => Some(BaselineMethod::Penalty),
            Method::Projection => Some(BaselineMethod::Projection),
            Method::Dc3 => Some(BaselineMethod::Dc3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub hidden: usize,
    pub loop_optimizer: OptimizerConfig,
    pub penalty_optimizer: OptimizerConfig,
    pub projection_optimizer: OptimizerConfig,
    pub dc3_optimizer: OptimizerConfig,
    pub penalty_coefficient: f64,
    pub dc3_step_size: f64,
    pub dc3_inner_iters: usize,
    /// `ArtificialLp` or `BfsAverage`; `Shared` uses one point for all inputs.
    pub interior: InteriorStrategy,
    /// When false, time columns are written as zero so reports are byte-stable.
    pub timing: bool,
    /// Passes over the test set per timing measurement.
    pub timing_repeats: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(seed: u64) -> Self {
        let opt = |epochs: usize, learning_rate: f64| OptimizerConfig {
            epochs,
            batch_size: 16,
            learning_rate,
            momentum: 0.9,
            seed,
        };
        Self {
            methods: Method::ALL.to_vec(),
            hidden: DEFAULT_HIDDEN,
            loop_optimizer: opt(1000, 1e-2),
            // the penalty gradient scales with rho; larger steps diverge at rho = 1e4
            penalty_optimizer: opt(1000, 3e-6),
            projection_optimizer: opt(1000, 1e-2),
            dc3_optimizer: opt(1000, 3e-6),
            penalty_coefficient: looplc_core::baselines::DEFAULT_PENALTY,
            dc3_step_size: looplc_core::baselines::DEFAULT_DC3_STEP,
            dc3_inner_iters: looplc_core::baselines::DEFAULT_DC3_ITERS,
            interior: InteriorStrategy::default(),
            timing: true,
            timing_repeats: 3,
            seed,
        }
    }

    fn baseline_config(&self, method: BaselineMethod) -> BaselineConfig {
        let mut cfg = BaselineConfig::new(method);
        cfg.penalty_coefficient = self.penalty_coefficient;
        cfg.dc3_step_size = self.dc3_step_size;
        cfg.dc3_inner_iters_train = self.dc3_inner_iters;
        cfg.dc3_inner_iters_test = self.dc3_inner_iters;
        cfg.optimizer = match method {
            BaselineMethod::Penalty => self.penalty_optimizer.clone(),
            BaselineMethod::Projection => self.projection_optimizer.clone(),
            BaselineMethod::Dc3 => self.dc3_optimizer.clone(),
        };
        cfg
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub optimality_gap: f64,
    pub feasibility_gap: f64,
    pub mean_inference_ms: f64,
    pub train_seconds: f64,
    pub status: String,
}

/// Per-instance gaps of one method on the test half.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGaps {
    pub method: String,
    pub sample: Vec<usize>,
    pub optimality: Vec<f64>,
    pub feasibility: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub instances: Vec<InstanceGaps>,
    /// Mean wall time of the interior finder per test instance.
    pub interior_ms: f64,
}

pub const CSV_HEADER: &str = "method,optimality_gap,feasibility_gap,mean_inference_ms,train_seconds,status";

impl BenchReport {
    pub fn row(&self, method: Method) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.method,
                r.optimality_gap,
                r.feasibility_gap,
                r.mean_inference_ms,
                r.train_seconds,
                csv_field(&r.status)
            );
        }
        out
    }

    /// Long format: one line per method and test instance.
    pub fn plot_data_csv(&self) -> String {
        let mut out = String::from("method,sample,optimality_gap,feasibility_gap\n");
        for g in &self.instances {
            for k in 0..g.sample.len() {
                let _ = writeln!(
                    out,
                    "{},{},{:e},{:e}",
                    g.method, g.sample[k], g.optimality[k], g.feasibility[k]
                );
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Worker pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> AppResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| AppError::Usage(format!("{THREADS_ENV}={v} is not a thread count")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| AppError::Format(format!("thread pool: {e}")))
}

/// Per-input interior points for the LOOP pipeline.
pub fn interiors_for(red: &ReducedProblem, xs: &[Vector], strategy: &InteriorStrategy) -> AppResult<Vec<Vector>> {
    let points = match strategy {
        InteriorStrategy::ArtificialLp { big_m } => xs
            .par_iter()
            .map(|x| find_interior_artificial(red, x, *big_m).map(|r| r.point))
            .collect::<Result<Vec<_>, _>>()?,
        InteriorStrategy::BfsAverage { cap } => {
            let sets = build_bfs_structures(red, *cap)?;
            xs.par_iter()
                .map(|x| find_interior_bfs_average(red, &sets, x).map(|r| r.point))
                .collect::<Result<Vec<_>, _>>()?
        }
        InteriorStrategy::Shared(_) => looplc_core::interior::interior_points(red, xs, strategy)?,
    };
    Ok(points)
}

/// Everything the methods share: the reduced problem, inputs, references and interiors.
pub struct BenchData {
    pub red: ReducedProblem,
    pub train_x: Vec<Vector>,
    pub test_x: Vec<Vector>,
    pub test_idx: Vec<usize>,
    pub train_ref: Vec<Vector>,
    pub test_ref: Vec<Vector>,
    pub train_interior: Vec<Vector>,
    pub test_interior: Vec<Vector>,
}

impl BenchData {
    pub fn prepare(system: &DcopfSystem, dataset: &DcopfDataset, interior: &InteriorStrategy) -> AppResult<Self> {
        let red = reduce(Arc::new(system.to_lincon()?))?;
        let train_x = dataset.inputs_pu(&dataset.train_idx);
        let test_x = dataset.inputs_pu(&dataset.test_idx);
        let refs = |xs: &[Vector]| -> AppResult<Vec<Vector>> {
            Ok(xs
                .par_iter()
                .map(|x| reference_optimum(&red, x))
                .collect::<Result<Vec<_>, _>>()?)
        };
        let train_ref = refs(&train_x)?;
        let test_ref = refs(&test_x)?;
        let train_interior = interiors_for(&red, &train_x, interior)?;
        let test_interior = interiors_for(&red, &test_x, interior)?;
        Ok(Self {
            train_ref,
            test_ref,
            train_interior,
            test_interior,
            test_idx: dataset.test_idx.clone(),
            red,
            train_x,
            test_x,
        })
    }

    fn train_samples(&self) -> Vec<TrainSample> {
        self.train_x
            .iter()
            .zip(&self.train_ref)
            .map(|(x, t)| TrainSample {
                x: x.clone(),
                target: Some(t.clone()),
            })
            .collect()
    }
}

/// A trained method ready for inference.
pub enum Trained {
    Loop(MlpModel),
    Baseline(MlpModel, BaselineConfig),
}

impl Trained {
    /// Prediction for test instance `k`.
    pub fn infer(&self, data: &BenchData, k: usize) -> AppResult<Vector> {
        let x = &data.test_x[k];
        Ok(match self {
            Trained::Loop(m) => pipeline_infer(m, &data.red, x, &data.test_interior[k])?,
            Trained::Baseline(m, cfg) => baseline_infer(m, &data.red, x, cfg)?,
        })
    }
}

pub fn train_method(method: Method, data: &BenchData, cfg: &BenchConfig) -> AppResult<Trained> {
    let samples = data.train_samples();
    let red = &data.red;
    match method.baseline() {
        None => {
            let mut model = MlpModel::with_hidden(
                red.n_inp() + red.n_indep(),
                cfg.hidden,
                red.n_indep(),
                OutputActivation::Tanh,
                cfg.seed,
            )?;
            let mut tc = TrainConfig::new(TrainMode::SolverInLoop);
            tc.optimizer = cfg.loop_optimizer.clone();
            let history = train_with_interiors(&mut model, red, &samples, &data.train_interior, &tc)?;
            log::info!("loop: final epoch loss {:?}", history.last());
            Ok(Trained::Loop(model))
        }
        Some(b) => {
            let bc = cfg.baseline_config(b);
            let mut model = baseline_model(b, red, cfg.hidden, cfg.seed)?;
            let history = baseline_train(&mut model, red, &samples, &bc)?;
            log::info!("{}: final epoch loss {:?}", b.as_str(), history.last());
            Ok(Trained::Baseline(model, bc))
        }
    }
}

/// Gaps of a trained method on every test instance, in test order.
pub fn evaluate(trained: &Trained, data: &BenchData) -> AppResult<InstanceGaps> {
    let parent = &*data.red.parent;
    let per: Vec<(f64, f64)> = (0..data.test_x.len())
        .into_par_iter()
        .map(|k| -> AppResult<(f64, f64)> {
            let u = trained.infer(data, k)?;
            Ok((
                relative_l1_gap(&u, &data.test_ref[k])?,
                instance_violation(parent, &u, &data.test_x[k])?,
            ))
        })
        .collect::<AppResult<Vec<_>>>()?;
    Ok(InstanceGaps {
        method: String::new(),
        sample: data.test_idx.clone(),
        optimality: per.iter().map(|p| p.0).collect(),
        feasibility: per.iter().map(|p| p.1).collect(),
    })
}

/// Mean single-thread wall time per test instance, in milliseconds.
pub fn time_inference(trained: &Trained, data: &BenchData, repeats: usize) -> AppResult<f64> {
    let n = data.test_x.len() * repeats.max(1);
    let start = Instant::now();
    for _ in 0..repeats.max(1) {
        for k in 0..data.test_x.len() {
            std::hint::black_box(trained.infer(data, k)?);
        }
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / n as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn failed_row(method: Method, err: &AppError) -> BenchRow {
    BenchRow {
        method: method.as_str().into(),
        optimality_gap: f64::NAN,
        feasibility_gap: f64::NAN,
        mean_inference_ms: f64::NAN,
        train_seconds: f64::NAN,
        status: format!("error: {err}"),
    }
}

/// Trains and evaluates every configured method. A failing method becomes a
/// row with an error status; only failures shared by all methods are errors.
pub fn run_benchmark(system: &DcopfSystem, dataset: &DcopfDataset, cfg: &BenchConfig) -> AppResult<BenchReport> {
    if dataset.test_idx.is_empty() || dataset.train_idx.is_empty() {
        return Err(AppError::Usage("benchmark needs at least two samples".into()));
    }
    let pool = thread_pool()?;
    let data = pool.install(|| BenchData::prepare(system, dataset, &cfg.interior))?;

    let interior_ms = if cfg.timing {
        let start = Instant::now();
        for x in &data.test_x {
            std::hint::black_box(interiors_for(&data.red, std::slice::from_ref(x), &cfg.interior)?);
        }
        start.elapsed().as_secs_f64() * 1e3 / data.test_x.len() as f64
    } else {
        0.0
    };
    log::info!("interior finder: {interior_ms:.4} ms per instance");

    let mut rows = Vec::with_capacity(cfg.methods.len());
    let mut instances = Vec::new();
    for &method in &cfg.methods {
        let started = Instant::now();
        let trained = match pool.install(|| train_method(method, &data, cfg)) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("{} failed to train: {e}", method.as_str());
                rows.push(failed_row(method, &e));
                continue;
            }
        };
        let train_seconds = if cfg.timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let gaps = match pool.install(|| evaluate(&trained, &data)) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("{} failed at inference: {e}", method.as_str());
                rows.push(failed_row(method, &e));
                continue;
            }
        };
        let mean_inference_ms = if cfg.timing {
            time_inference(&trained, &data, cfg.timing_repeats)?
        } else {
            0.0
        };
        rows.push(BenchRow {
            method: method.as_str().into(),
            optimality_gap: mean(&gaps.optimality),
            feasibility_gap: mean(&gaps.feasibility),
            mean_inference_ms,
            train_seconds,
            status: "ok".into(),
        });
        instances.push(InstanceGaps {
            method: method.as_str().into(),
            ..gaps
        });
    }
    Ok(BenchReport {
        rows,
        instances,
        interior_ms,
    })
}
