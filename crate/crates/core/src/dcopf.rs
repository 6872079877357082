//! Synthetic DC optimal power flow instances.
//!
//! Buses sit on a chain (fewer than three lines) or a ring. Line flows are
//! computed from nodal injections with a PTDF matrix built from random
//! reactances, with bus 0 as the slack bus. Quantities are stored in MW; the
//! optimisation problem is posed in per-unit on [`BASE_MVA`].

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interior::{find_interior_artificial, DEFAULT_BIG_M};
use crate::problem::{LinConProblem, QuadraticObjective};
use crate::reduction::{reduce, ReducedProblem};
use crate::{Matrix, Vector};

pub const BASE_MVA: f64 = 100.0;
pub const DEFAULT_FLUCTUATION: f64 = 0.10;
const RESAMPLE_TRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct DcopfSystem {
    pub n_gen: usize,
    pub n_load: usize,
    pub n_line: usize,
    pub n_bus: usize,
    pub gen_bus: Vec<usize>,
    pub load_bus: Vec<usize>,
    /// `(from, to)` bus pairs.
    pub lines: Vec<(usize, usize)>,
    /// Per-unit series reactance of each line.
    pub reactance: Vector,
    /// Cost `a P^2 + b P` with `P` in MW.
    pub cost_quadratic: Vector,
    pub cost_linear: Vector,
    pub p_min: Vector,
    pub p_max: Vector,
    pub base_load: Vector,
    /// Flow on each line per MW injected at each generator bus (withdrawn at the slack).
    pub ptdf_gen: Matrix,
    pub ptdf_load: Matrix,
    pub line_limits: Vector,
}

/// Shift factors of a connected network with slack bus 0.
pub fn ptdf(n_bus: usize, lines: &[(usize, usize)], reactance: &Vector) -> Result<Matrix> {
    let n_line = lines.len();
    let mut b_bus = Matrix::zeros(n_bus, n_bus);
    for (l, &(f, t)) in lines.iter().enumerate() {
        let y = 1.0 / reactance[l];
        b_bus[(f, f)] += y;
        b_bus[(t, t)] += y;
        b_bus[(f, t)] -= y;
        b_bus[(t, f)] -= y;
    }
    let mut out = Matrix::zeros(n_line, n_bus);
    if n_bus == 1 {
        return Ok(out);
    }
    let reduced = b_bus.view((1, 1), (n_bus - 1, n_bus - 1)).into_owned();
    let inv = reduced
        .try_inverse()
        .ok_or_else(|| Error::Numerical(String::from("network is not connected")))?;
    // angle of bus k (k >= 1) per unit injection at bus j (j >= 1) is inv[k-1, j-1]
    for (l, &(f, t)) in lines.iter().enumerate() {
        let y = 1.0 / reactance[l];
        for j in 1..n_bus {
            let theta_f = if f == 0 { 0.0 } else { inv[(f - 1, j - 1)] };
            let theta_t = if t == 0 { 0.0 } else { inv[(t - 1, j - 1)] };
            out[(l, j)] = y * (theta_f - theta_t);
        }
    }
    Ok(out)
}

pub fn generate_system(n_gen: usize, n_load: usize, n_line: usize, seed: u64) -> Result<DcopfSystem> {
    if n_gen == 0 || n_load == 0 || n_line == 0 {
        return Err(Error::InvalidConfig(String::from(
            "generator, load and line counts must be at least 1",
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_bus, lines): (usize, Vec<(usize, usize)>) = if n_line < 3 {
        (n_line + 1, (0..n_line).map(|i| (i, i + 1)).collect())
    } else {
        (n_line, (0..n_line).map(|i| (i, (i + 1) % n_line)).collect())
    };
    let reactance = Vector::from_fn(n_line, |_, _| rng.random_range(0.05..0.25));
    let shift = ptdf(n_bus, &lines, &reactance)?;
    let gen_bus: Vec<usize> = (0..n_gen).map(|_| rng.random_range(0..n_bus)).collect();
    let load_bus: Vec<usize> = (0..n_load).map(|_| rng.random_range(0..n_bus)).collect();

    let base2 = BASE_MVA * BASE_MVA;
    let cost_quadratic = Vector::from_fn(n_gen, |_, _| rng.random_range(0.5..2.0) / base2);
    let cost_linear = Vector::from_fn(n_gen, |_, _| rng.random_range(1.0..4.0) / BASE_MVA);
    let p_max = Vector::from_fn(n_gen, |_, _| rng.random_range(1.0..3.0) * BASE_MVA);
    let p_min = Vector::from_fn(n_gen, |g, _| rng.random_range(0.0..0.1) * p_max[g]);
    let shares = Vector::from_fn(n_load, |_, _| rng.random_range(0.5..1.5));
    let total = 0.6 * p_max.sum();
    let base_load = &shares * (total / shares.sum());

    let ptdf_gen = Matrix::from_fn(n_line, n_gen, |l, g| shift[(l, gen_bus[g])]);
    let ptdf_load = Matrix::from_fn(n_line, n_load, |l, d| shift[(l, load_bus[d])]);
    // limits leave room around the flow of a capacity-proportional dispatch
    let dispatch = &p_max * (total / p_max.sum());
    let flow = &ptdf_gen * &dispatch - &ptdf_load * &base_load;
    let margin = 0.1 * p_max.mean();
    let line_limits = flow.map(|f| 1.5 * f.abs() + margin);

    let system = DcopfSystem {
        n_gen,
        n_load,
        n_line,
        n_bus,
        gen_bus,
        load_bus,
        lines,
        reactance,
        cost_quadratic,
        cost_linear,
        p_min,
        p_max,
        base_load,
        ptdf_gen,
        ptdf_load,
        line_limits,
    };
    system.validate()?;
    Ok(system)
}

impl DcopfSystem {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidProblem(alloc::format!("dcopf system: {what}")));
        if self.p_min.len() != self.n_gen
            || self.p_max.len() != self.n_gen
            || self.cost_quadratic.len() != self.n_gen
            || self.cost_linear.len() != self.n_gen
            || self.base_load.len() != self.n_load
            || self.ptdf_gen.shape() != (self.n_line, self.n_gen)
            || self.ptdf_load.shape() != (self.n_line, self.n_load)
            || self.line_limits.len() != self.n_line
        {
            return bad("inconsistent dimensions");
        }
        if self.p_min.iter().zip(self.p_max.iter()).any(|(lo, hi)| !(lo < hi)) {
            return bad("p_min must be below p_max");
        }
        if self.line_limits.iter().any(|&l| !(l > 0.0)) {
            return bad("line limits must be positive");
        }
        if self.cost_quadratic.iter().any(|&a| !(a > 0.0)) {
            return bad("quadratic costs must be positive");
        }
        if !(self.p_max.sum() > self.base_load.sum() * (1.0 + DEFAULT_FLUCTUATION)) {
            return bad("not enough generation headroom");
        }
        Ok(())
    }

    pub fn to_pu(&self, mw: &Vector) -> Vector {
        mw / BASE_MVA
    }

    /// Decision `P_G` and input `P_D`, both per-unit. Inequality rows are
    /// lower bounds, upper bounds, forward flows, then reverse flows.
    pub fn to_lincon(&self) -> Result<LinConProblem> {
        let (g, d, l) = (self.n_gen, self.n_load, self.n_line);
        let a_eq = Matrix::from_element(1, g, 1.0);
        let b_eq = Matrix::from_element(1, d, -1.0);
        let m = 2 * g + 2 * l;
        let mut a = Matrix::zeros(m, g);
        let mut b_mat = Matrix::zeros(m, d);
        let mut b_vec = Vector::zeros(m);
        let limits = self.to_pu(&self.line_limits);
        for i in 0..g {
            a[(i, i)] = -1.0;
            b_vec[i] = self.p_min[i] / BASE_MVA;
            a[(g + i, i)] = 1.0;
            b_vec[g + i] = -self.p_max[i] / BASE_MVA;
        }
        for k in 0..l {
            let fwd = 2 * g + k;
            let rev = 2 * g + l + k;
            for i in 0..g {
                a[(fwd, i)] = self.ptdf_gen[(k, i)];
                a[(rev, i)] = -self.ptdf_gen[(k, i)];
            }
            for j in 0..d {
                b_mat[(fwd, j)] = -self.ptdf_load[(k, j)];
                b_mat[(rev, j)] = self.ptdf_load[(k, j)];
            }
            b_vec[fwd] = -limits[k];
            b_vec[rev] = -limits[k];
        }
        let base2 = BASE_MVA * BASE_MVA;
        let q = Matrix::from_diagonal(&(&self.cost_quadratic * (2.0 * base2)));
        let c = &self.cost_linear * BASE_MVA;
        let objective = Arc::new(QuadraticObjective::new(q, c)?);
        Ok(LinConProblem::new(g, d, objective)
            .with_equalities(a_eq, b_eq, Vector::zeros(1))
            .with_inequalities(a, b_mat, b_vec))
    }

    /// Cost in currency units of a per-unit dispatch.
    pub fn cost_pu(&self, p_pu: &Vector) -> f64 {
        let p = p_pu * BASE_MVA;
        (0..self.n_gen)
            .map(|i| self.cost_quadratic[i] * p[i] * p[i] + self.cost_linear[i] * p[i])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcopfDataset {
    /// MW.
    pub base_load: Vector,
    /// MW load vectors.
    pub samples: Vec<Vector>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl DcopfDataset {
    /// Per-unit inputs of the listed samples.
    pub fn inputs_pu(&self, idx: &[usize]) -> Vec<Vector> {
        idx.iter().map(|&i| &self.samples[i] / BASE_MVA).collect()
    }
}

/// Uniform componentwise perturbation of the base load. Samples whose
/// feasible set has no interior are redrawn, at most 100 times each.
pub fn sample_dataset(system: &DcopfSystem, n_samples: usize, fluctuation: f64, seed: u64) -> Result<DcopfDataset> {
    if !(0.0..1.0).contains(&fluctuation) {
        return Err(Error::InvalidConfig(alloc::format!("fluctuation {fluctuation}")));
    }
    let red: ReducedProblem = reduce(Arc::new(system.to_lincon()?))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut accepted = None;
        for _ in 0..RESAMPLE_TRIES {
            let load = Vector::from_fn(system.n_load, |j, _| {
                let f = if fluctuation > 0.0 {
                    rng.random_range(1.0 - fluctuation..=1.0 + fluctuation)
                } else {
                    1.0
                };
                system.base_load[j] * f
            });
            if find_interior_artificial(&red, &system.to_pu(&load), DEFAULT_BIG_M).is_ok() {
                accepted = Some(load);
                break;
            }
        }
        samples.push(accepted.ok_or(Error::EmptyInterior { margin: 0.0 })?);
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng);
    let n_train = n_samples / 2;
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(DcopfDataset {
        base_load: system.base_load.clone(),
        samples,
        train_idx,
        test_idx,
    })
}
