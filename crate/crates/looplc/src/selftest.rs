//! Quick invariant sweeps run by `looplc selftest`.

use std::sync::Arc;

use looplc_core::baselines::{reduced_qp, solve_qp};
use looplc_core::dcopf::{generate_system, sample_dataset};
use looplc_core::gauge::is_untied;
use looplc_core::interior::{
    build_bfs_structures, find_interior_artificial, find_interior_bfs_average, DEFAULT_BIG_M, DEFAULT_ENUMERATION_CAP,
};
use looplc_core::lp::{solve_lp, LpStatus, StandardFormLP};
use looplc_core::neural::{pipeline_infer, MlpModel, OutputActivation};
use looplc_core::problem::instance_violation;
use looplc_core::reduction::reduce;
use looplc_core::testkit::{random_ball_point, random_polytope_problem, random_shifted_polytope};
use looplc_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

type Check = fn(&mut ChaCha8Rng, usize) -> Result<String, String>;

pub fn run_selftest(seed: u64, scale: usize) -> SelftestReport {
    let checks: [(&str, Check); 6] = [
        ("pipeline_hard_feasibility", hard_feasibility),
        ("gauge_round_trip", gauge_round_trip),
        ("gauge_jacobian_finite_difference", gauge_jacobian),
        ("interior_finders_agree", interior_finders),
        ("lp_duality_certificate", lp_certificate),
        ("qp_kkt_residual", qp_kkt),
    ];
    let results: Vec<CheckResult> = checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let outcome = check(&mut rng, scale);
            CheckResult {
                name: (*name).into(),
                passed: outcome.is_ok(),
                detail: outcome.unwrap_or_else(|e| e),
            }
        })
        .collect();
    SelftestReport {
        seed,
        passed: results.iter().all(|c| c.passed),
        checks: results,
    }
}

fn hard_feasibility(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..3 * scale {
        let g = rng.random_range(2..=6);
        let system = generate_system(g, rng.random_range(1..=4), rng.random_range(1..=4), rng.random())
            .map_err(|e| e.to_string())?;
        let red = reduce(Arc::new(system.to_lincon().map_err(|e| e.to_string())?)).map_err(|e| e.to_string())?;
        let data = sample_dataset(&system, 5, 0.1, rng.random()).map_err(|e| e.to_string())?;
        let xs = data.inputs_pu(&(0..5).collect::<Vec<_>>());
        for _ in 0..20 {
            let gain = 10f64.powf(rng.random_range(-1.0..2.0));
            let mut model = MlpModel::with_hidden(
                red.n_inp() + red.n_indep(),
                16,
                red.n_indep(),
                OutputActivation::Tanh,
                rng.random(),
            )
            .map_err(|e| e.to_string())?;
            for w in &mut model.weights {
                *w *= gain;
            }
            for x in &xs {
                let u_o = find_interior_artificial(&red, x, DEFAULT_BIG_M)
                    .map_err(|e| e.to_string())?
                    .point;
                let u = pipeline_infer(&model, &red, x, &u_o).map_err(|e| e.to_string())?;
                worst = worst.max(instance_violation(&red.parent, &u, x).map_err(|e| e.to_string())?);
                cases += 1;
            }
        }
    }
    if worst <= 1e-9 {
        Ok(format!("{cases} outputs, worst violation {worst:e}"))
    } else {
        Err(format!("violation {worst:e} exceeds 1e-9"))
    }
}

fn gauge_round_trip(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..500 * scale {
        let n = rng.random_range(1..=5);
        let poly = random_shifted_polytope(rng, n);
        let on_boundary = rng.random_bool(0.2);
        let v = random_ball_point(rng, n, on_boundary);
        let u = poly.map(&v).map_err(|e| e.to_string())?;
        let back = poly.inverse(&u).map_err(|e| e.to_string())?;
        worst = worst.max((back - v).amax());
    }
    if worst <= 1e-9 {
        Ok(format!("worst deviation {worst:e}"))
    } else {
        Err(format!("round trip deviates by {worst:e}"))
    }
}

fn gauge_jacobian(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 50 * scale {
        let n = rng.random_range(1..=4);
        let poly = random_shifted_polytope(rng, n);
        let v = random_ball_point(rng, n, false) * 0.9;
        if v.amax() < 1e-3 || !is_untied(&poly, &v, 1e-4) {
            continue;
        }
        let jac = poly.jacobian(&v).map_err(|e| e.to_string())?;
        let h = 1e-7;
        for k in 0..n {
            let mut vp = v.clone();
            vp[k] += h;
            let mut vm = v.clone();
            vm[k] -= h;
            let fd =
                (poly.map(&vp).map_err(|e| e.to_string())? - poly.map(&vm).map_err(|e| e.to_string())?) / (2.0 * h);
            let col = jac.column(k).into_owned();
            let rel = (&fd - &col).amax() / col.amax().max(1.0);
            worst = worst.max(rel);
        }
        checked += 1;
    }
    if worst <= 1e-5 {
        Ok(format!("{checked} points, worst relative error {worst:e}"))
    } else {
        Err(format!("relative error {worst:e} exceeds 1e-5"))
    }
}

fn interior_finders(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let none = Vector::zeros(0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..30 * scale {
        let n = rng.random_range(1..=4);
        let red = reduce(Arc::new(random_polytope_problem(rng, n, 8))).map_err(|e| e.to_string())?;
        let lp = find_interior_artificial(&red, &none, DEFAULT_BIG_M).map_err(|e| e.to_string())?;
        let sets = build_bfs_structures(&red, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
        let bfs = find_interior_bfs_average(&red, &sets, &none).map_err(|e| e.to_string())?;
        worst = worst.max(lp.margin).max(bfs.margin);
    }
    if worst < -1e-10 {
        Ok(format!("largest margin {worst:e}"))
    } else {
        Err(format!("margin {worst:e} is not strictly negative"))
    }
}

fn lp_certificate(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut solved = 0;
    for _ in 0..100 * scale {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let a = Matrix::from_fn(m, n, |_, _| rng.random_range(-3.0..3.0));
        let b = Vector::from_fn(m, |_, _| rng.random_range(0.0..5.0));
        let c = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let lp = StandardFormLP::new(c, a.clone(), b.clone());
        let r = solve_lp(&lp).map_err(|e| e.to_string())?;
        if r.status != LpStatus::Optimal {
            continue;
        }
        let primal = (&a * &r.solution - &b).max().max(0.0) + (-r.solution.min()).max(0.0);
        let gap = (r.objective - r.dual_objective).abs() / (1.0 + r.objective.abs());
        worst = worst.max(primal).max(gap).max(-r.min_reduced_cost);
        solved += 1;
    }
    if worst <= 1e-7 {
        Ok(format!("{solved} optimal LPs, worst certificate error {worst:e}"))
    } else {
        Err(format!("certificate error {worst:e} exceeds 1e-7"))
    }
}

fn qp_kkt(rng: &mut ChaCha8Rng, scale: usize) -> Result<String, String> {
    let none = Vector::zeros(0);
    let mut worst = 0.0f64;
    for _ in 0..50 * scale {
        let n = rng.random_range(1..=3);
        let mut p = random_polytope_problem(rng, n, 8);
        let l = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        p.objective =
            Arc::new(looplc_core::problem::QuadraticObjective::new(&l * l.transpose(), c).map_err(|e| e.to_string())?);
        let red = reduce(Arc::new(p)).map_err(|e| e.to_string())?;
        let qp = reduced_qp(&red, &none).map_err(|e| e.to_string())?;
        let sol = solve_qp(&qp).map_err(|e| e.to_string())?;
        worst = worst.max(sol.kkt_residual);
    }
    if worst <= 1e-7 {
        Ok(format!("worst KKT residual {worst:e}"))
    } else {
        Err(format!("KKT residual {worst:e} exceeds 1e-7"))
    }
}
