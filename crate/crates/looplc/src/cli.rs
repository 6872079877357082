//! Argument parsing and subcommand dispatch.
//!
//! Every subcommand writes JSON or CSV to the given writer (stdout in the
//! binary). Exit codes: 0 success, 1 domain or IO failure, 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use looplc_core::baselines::reference_optimum;
use looplc_core::dcopf::{generate_system, sample_dataset, DEFAULT_FLUCTUATION};
use looplc_core::gauge::build_shifted;
use looplc_core::interior::{
    build_bfs_structures, find_interior_artificial, find_interior_bfs_average, find_interior_two_phase, InteriorResult,
    InteriorStrategy, Phase1Problem, DEFAULT_BIG_M, DEFAULT_ENUMERATION_CAP,
};
use looplc_core::neural::{
    pipeline_infer, train_phase1, train_with_interiors, MlpModel, OptimizerConfig, OutputActivation, TrainConfig,
    TrainMode, TrainSample, DEFAULT_HIDDEN,
};
use looplc_core::reduction::{reduce, ReducedProblem};
use looplc_core::{Error as CoreError, Vector};
use serde::Serialize;

use crate::bench::{run_benchmark, BenchConfig, Method};
use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Metadata};
use crate::error::{AppError, AppResult};
use crate::format::{
    read_json, read_problem, to_json_pretty, write_text, DataFile, DcopfDatasetFile, DcopfSystemFile, InputFile,
    ProblemFile, ReducedFile,
};
use crate::selftest::run_selftest;

#[derive(Debug, Parser)]
#[command(
    name = "looplc",
    version,
    about = "Feasibility-guaranteed learned solvers for linearly constrained problems"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// error, warn, info, debug or trace; logs go to stderr.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eliminate the equalities and print the reduced problem.
    Reduce {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a strictly interior point of the reduced feasible set at x.
    FindInterior {
        #[arg(long)]
        problem: PathBuf,
        /// Input vector; may be omitted when the problem has no inputs.
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FinderArg::Lp)]
        method: FinderArg,
        #[arg(long, default_value_t = DEFAULT_BIG_M)]
        big_m: f64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
        /// Phase-I training epochs for `two-phase`.
        #[arg(long, default_value_t = 200)]
        epochs: usize,
    },
    /// Train the feasible pipeline and write a checkpoint.
    Train {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        /// Interior finder used for every sample.
        #[arg(long, value_enum, default_value_t = TrainFinderArg::Lp)]
        interior: TrainFinderArg,
    },
    /// Run a checkpoint on one input and print the solution with its slacks.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: Option<PathBuf>,
        /// Interior point in the independent coordinates, instead of the checkpoint's finder.
        #[arg(long)]
        u_o: Option<PathBuf>,
        /// Problem to check against the checkpoint's hash; the embedded one is used otherwise.
        #[arg(long)]
        problem: Option<PathBuf>,
    },
    /// Benchmarks.
    Bench {
        #[command(subcommand)]
        bench: BenchCommand,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Multiplies the number of random cases.
        #[arg(long, default_value_t = 1)]
        scale: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Train and compare methods on a synthetic DC optimal power flow system.
    Dcopf {
        #[command(flatten)]
        args: DcopfArgs,
        /// Comma-separated subset of loop, penalty, projection, dc3.
        #[arg(long, default_value = "loop,penalty,projection,dc3")]
        methods: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-instance gaps here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// `off` writes zero timings so the report is byte-reproducible.
        #[arg(long, value_enum, default_value_t = Toggle::On)]
        timing: Toggle,
        /// Also write the generated system and dataset as JSON here.
        #[arg(long)]
        dump_system: Option<PathBuf>,
    },
    /// Per-instance gap series for external plotting.
    PlotData {
        #[command(flatten)]
        args: DcopfArgs,
        #[arg(long, default_value = "loop,penalty,projection,dc3")]
        methods: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DcopfArgs {
    #[arg(long, default_value_t = 3)]
    pub gens: usize,
    #[arg(long, default_value_t = 4)]
    pub loads: usize,
    #[arg(long, default_value_t = 3)]
    pub lines: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_FLUCTUATION)]
    pub fluctuation: f64,
    /// Training epochs for every method; the built-in defaults otherwise.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FinderArg {
    Lp,
    Bfs,
    TwoPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainFinderArg {
    Lp,
    Bfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Solver,
    Objective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

/// Parses `argv`, runs the subcommand and returns the exit code.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return u8::try_from(code).unwrap_or(2);
        }
    };
    init_logging(cli.log_level);
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: log::LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, text: &str) -> AppResult<()> {
    match out {
        Some(path) => write_text(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| AppError::io(Path::new("<stdout>"), e)),
    }
}

fn emit_json<T: Serialize>(stdout: &mut dyn Write, out: Option<&Path>, value: &T) -> AppResult<()> {
    emit(stdout, out, &to_json_pretty(value)?)
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn read_input(path: Option<&Path>, red: &ReducedProblem) -> AppResult<Vector> {
    let x = match path {
        Some(p) => read_json::<InputFile>(p)?.into_vector(),
        None if red.n_inp() == 0 => Vector::zeros(0),
        None => {
            return Err(AppError::Usage(format!(
                "--x is required: the problem has {} inputs",
                red.n_inp()
            )))
        }
    };
    if x.len() != red.n_inp() {
        return Err(AppError::Format(format!(
            "x has {} entries, the problem expects {}",
            x.len(),
            red.n_inp()
        )));
    }
    Ok(x)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> AppResult<()> {
    match &cli.command {
        Command::Reduce { problem, out } => {
            let red = reduce(Arc::new(read_problem(problem)?))?;
            emit_json(stdout, out.as_deref(), &ReducedFile::from_reduced(&red))
        }
        Command::FindInterior {
            problem,
            x,
            method,
            big_m,
            cap,
            epochs,
        } => {
            let red = reduce(Arc::new(read_problem(problem)?))?;
            let x = read_input(x.as_deref(), &red)?;
            let report = find_interior_cmd(&red, &x, *method, *big_m, *cap, *epochs, cli.seed)?;
            emit_json(stdout, None, &report)
        }
        Command::Train {
            problem,
            data,
            mode,
            epochs,
            out,
            learning_rate,
            batch_size,
            hidden,
            interior,
        } => {
            let problem_file: ProblemFile = read_json(problem)?;
            let optimizer = OptimizerConfig {
                epochs: *epochs,
                batch_size: *batch_size,
                learning_rate: *learning_rate,
                momentum: 0.9,
                seed: cli.seed,
            };
            let mode = match mode {
                ModeArg::Solver => TrainMode::SolverInLoop,
                ModeArg::Objective => TrainMode::ObjectiveOnly,
            };
            let summary = train_cmd(
                problem_file,
                &read_json(data)?,
                mode,
                optimizer,
                *hidden,
                *interior,
                out,
            )?;
            emit_json(stdout, None, &summary)
        }
        Command::Solve { model, x, u_o, problem } => {
            let report = solve_cmd(model, x.as_deref(), u_o.as_deref(), problem.as_deref())?;
            emit_json(stdout, None, &report)
        }
        Command::Bench { bench } => match bench {
            BenchCommand::Dcopf {
                args,
                methods,
                out,
                plot_data,
                timing,
                dump_system,
            } => {
                let mut cfg = bench_config(args, methods, cli.seed)?;
                cfg.timing = *timing == Toggle::On;
                let (system, dataset) = dcopf_instance(args, cli.seed)?;
                if let Some(path) = dump_system {
                    let doc = serde_json::json!({
                        "system": DcopfSystemFile::from_system(&system),
                        "dataset": DcopfDatasetFile::from_dataset(&dataset),
                    });
                    write_text(path, &to_json_pretty(&doc)?)?;
                }
                let report = run_benchmark(&system, &dataset, &cfg)?;
                if let Some(path) = plot_data {
                    write_text(path, &report.plot_data_csv())?;
                }
                emit(stdout, out.as_deref(), &report.to_csv())
            }
            BenchCommand::PlotData { args, methods, out } => {
                let mut cfg = bench_config(args, methods, cli.seed)?;
                cfg.timing = false;
                let (system, dataset) = dcopf_instance(args, cli.seed)?;
                let report = run_benchmark(&system, &dataset, &cfg)?;
                emit(stdout, out.as_deref(), &report.plot_data_csv())
            }
        },
        Command::Selftest { scale } => {
            let report = run_selftest(cli.seed, (*scale).max(1));
            emit_json(stdout, None, &report)?;
            if report.passed {
                Ok(())
            } else {
                Err(AppError::Format("selftest failed".into()))
            }
        }
    }
}

fn bench_config(args: &DcopfArgs, methods: &str, seed: u64) -> AppResult<BenchConfig> {
    let mut cfg = BenchConfig::new(seed);
    cfg.methods = Method::parse_list(methods)?;
    if let Some(epochs) = args.epochs {
        for o in [
            &mut cfg.loop_optimizer,
            &mut cfg.penalty_optimizer,
            &mut cfg.projection_optimizer,
            &mut cfg.dc3_optimizer,
        ] {
            o.epochs = epochs;
        }
    }
    Ok(cfg)
}

fn dcopf_instance(
    args: &DcopfArgs,
    seed: u64,
) -> AppResult<(looplc_core::dcopf::DcopfSystem, looplc_core::dcopf::DcopfDataset)> {
    if args.gens == 0 || args.loads == 0 || args.lines == 0 {
        return Err(AppError::Usage("--gens, --loads and --lines must be at least 1".into()));
    }
    if args.samples < 2 {
        return Err(AppError::Usage("--samples must be at least 2".into()));
    }
    let system = generate_system(args.gens, args.loads, args.lines, seed)?;
    let dataset = sample_dataset(&system, args.samples, args.fluctuation, seed)?;
    Ok((system, dataset))
}

#[derive(Debug, Serialize)]
pub struct InteriorReport {
    pub method: String,
    pub point: Vec<f64>,
    pub margin: f64,
    /// Set when the two-phase prediction missed and the LP answered instead.
    pub fallback: bool,
}

fn interior_report(r: InteriorResult, fallback: bool) -> InteriorReport {
    InteriorReport {
        method: r.method.as_str().into(),
        point: to_vec(&r.point),
        margin: r.margin,
        fallback,
    }
}

fn find_interior_cmd(
    red: &ReducedProblem,
    x: &Vector,
    method: FinderArg,
    big_m: f64,
    cap: usize,
    epochs: usize,
    seed: u64,
) -> AppResult<InteriorReport> {
    match method {
        FinderArg::Lp => Ok(interior_report(find_interior_artificial(red, x, big_m)?, false)),
        FinderArg::Bfs => {
            let sets = build_bfs_structures(red, cap)?;
            Ok(interior_report(find_interior_bfs_average(red, &sets, x)?, false))
        }
        FinderArg::TwoPhase => {
            let xs = [x.clone()];
            let phase1 = Phase1Problem::for_inputs(red, &xs)?;
            let optimizer = OptimizerConfig {
                epochs,
                batch_size: 1,
                seed,
                ..OptimizerConfig::default()
            };
            let (model, _) = train_phase1(&phase1, &xs, DEFAULT_HIDDEN, &optimizer)?;
            match find_interior_two_phase(red, &phase1, x, &model) {
                Ok(r) => Ok(interior_report(r, false)),
                Err(CoreError::PredictionMiss { u_a }) => {
                    log::warn!("phase-I prediction missed (u_a = {u_a:e}); falling back to the artificial LP");
                    Ok(interior_report(find_interior_artificial(red, x, big_m)?, true))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub out: String,
    pub mode: String,
    pub epochs: usize,
    pub samples: usize,
    pub final_loss: Option<f64>,
    pub problem_hash: String,
}

fn train_cmd(
    problem_file: ProblemFile,
    data: &DataFile,
    mode: TrainMode,
    optimizer: OptimizerConfig,
    hidden: usize,
    finder: TrainFinderArg,
    out: &Path,
) -> AppResult<TrainSummary> {
    let red = reduce(Arc::new(problem_file.to_problem()?))?;
    if data.samples.is_empty() {
        return Err(AppError::Format("data file has no samples".into()));
    }
    let mut samples = Vec::with_capacity(data.samples.len());
    for (i, s) in data.samples.iter().enumerate() {
        let x = Vector::from_column_slice(&s.x);
        if x.len() != red.n_inp() {
            return Err(AppError::Format(format!(
                "sample {i}: x has {} entries, expected {}",
                x.len(),
                red.n_inp()
            )));
        }
        let target = match (&s.target, mode) {
            (Some(t), _) => Some(Vector::from_column_slice(t)),
            // missing labels come from the QP oracle when the objective allows it
            (None, TrainMode::SolverInLoop) => Some(reference_optimum(&red, &x)?),
            (None, TrainMode::ObjectiveOnly) => None,
        };
        samples.push(TrainSample { x, target });
    }
    let strategy = match finder {
        TrainFinderArg::Lp => InteriorStrategy::default(),
        TrainFinderArg::Bfs => InteriorStrategy::BfsAverage {
            cap: DEFAULT_ENUMERATION_CAP,
        },
    };
    let xs: Vec<Vector> = samples.iter().map(|s| s.x.clone()).collect();
    let interiors = crate::bench::interiors_for(&red, &xs, &strategy)?;
    let mut model = MlpModel::with_hidden(
        red.n_inp() + red.n_indep(),
        hidden,
        red.n_indep(),
        OutputActivation::Tanh,
        optimizer.seed,
    )?;
    let mut cfg = TrainConfig::new(mode);
    cfg.optimizer = optimizer.clone();
    cfg.interior = strategy;
    let history = train_with_interiors(&mut model, &red, &samples, &interiors, &cfg)?;
    let metadata = Metadata {
        mode: mode.as_str().into(),
        interior: match finder {
            TrainFinderArg::Lp => "lp".into(),
            TrainFinderArg::Bfs => "bfs".into(),
        },
        epoch: history.epoch_loss.len(),
        seed: optimizer.seed,
        loss_history: history.epoch_loss.clone(),
    };
    let ckpt = Checkpoint::new(&model, problem_file, metadata)?;
    save_checkpoint(out, &ckpt)?;
    Ok(TrainSummary {
        out: out.display().to_string(),
        mode: mode.as_str().into(),
        epochs: history.epoch_loss.len(),
        samples: samples.len(),
        final_loss: history.last(),
        problem_hash: ckpt.problem_hash,
    })
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub u: Vec<f64>,
    pub u_o: Vec<f64>,
    pub objective: f64,
    /// `a_eq u + b_mat_eq x + b_vec_eq`.
    pub equality_residual: Vec<f64>,
    /// `a_ineq u + b_mat_ineq x + b_vec_ineq`; feasible rows are `<= 0`.
    pub inequality_slack: Vec<f64>,
}

fn solve_cmd(
    model_path: &Path,
    x: Option<&Path>,
    u_o: Option<&Path>,
    problem: Option<&Path>,
) -> AppResult<SolveReport> {
    let ckpt = load_checkpoint(model_path)?;
    if let Some(p) = problem {
        let current: ProblemFile = read_json(p)?;
        if let Some(w) = ckpt.hash_warning(Some(&current))? {
            log::warn!("{w}");
        }
    }
    let model = ckpt.model()?;
    let red = reduce(Arc::new(ckpt.problem.to_problem()?))?;
    let x = read_input(x, &red)?;
    let u_o = match u_o {
        Some(path) => {
            let v = read_json::<InputFile>(path)?.into_vector();
            if v.len() != red.n_indep() {
                return Err(AppError::Format(format!(
                    "u_o has {} entries, the reduced problem has {} independent variables",
                    v.len(),
                    red.n_indep()
                )));
            }
            build_shifted(&red, &x, &v)?;
            v
        }
        None => {
            let strategy = match ckpt.metadata.interior.as_str() {
                "bfs" => InteriorStrategy::BfsAverage {
                    cap: DEFAULT_ENUMERATION_CAP,
                },
                _ => InteriorStrategy::default(),
            };
            crate::bench::interiors_for(&red, std::slice::from_ref(&x), &strategy)?.remove(0)
        }
    };
    let u = pipeline_infer(&model, &red, &x, &u_o)?;
    let p = &*red.parent;
    Ok(SolveReport {
        objective: p.objective.value(&u, &x),
        equality_residual: to_vec(&p.equality_residual(&u, &x)),
        inequality_slack: to_vec(&p.inequality_slack(&u, &x)),
        u: to_vec(&u),
        u_o: to_vec(&u_o),
    })
}
