//! Interior-point finders for the reduced feasible set `{u : a_red u + off(x) <= 0}`.
//!
//! * [`find_interior_artificial`] solves `min M u_a  s.t.  a_red u + off(x) <= u_a 1`.
//! * [`find_interior_bfs_average`] averages the vertices obtained from every
//!   basis of the slack system; the basis enumeration depends only on the
//!   problem and is cached in [`BfsIndexSets`].
//! * [`find_interior_two_phase`] runs a learned gauge-map model on the
//!   artificial problem itself.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Dyn, LU};

use crate::error::{Error, Result};
use crate::gauge::{build_shifted, BALL_TOL};
use crate::linalg::{binomial, inf_norm, select_independent_columns, take_columns, take_rows, Combinations, PIVOT_TOL};
use crate::lp::{solve_lp, LpStatus, StandardFormLP};
use crate::problem::{check_len, LinConProblem, LinearObjective};
use crate::reduction::{reduce, ReducedProblem};
use crate::{Matrix, Vector};

pub const DEFAULT_BIG_M: f64 = 1e4;
/// Margins at or above this count as touching the boundary.
pub const EMPTY_INTERIOR_TOL: f64 = 1e-9;
/// Slack components above this are accepted as basic feasible.
pub const BFS_ACCEPT_TOL: f64 = -1e-10;
pub const DEFAULT_ENUMERATION_CAP: usize = 20_000;
/// Vertices closer than this (infinity norm) are merged before averaging.
const VERTEX_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteriorMethod {
    ArtificialLp,
    BfsAverage,
    TwoPhase,
}

impl InteriorMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InteriorMethod::ArtificialLp => "artificial_lp",
            InteriorMethod::BfsAverage => "bfs_average",
            InteriorMethod::TwoPhase => "two_phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorResult {
    pub point: Vector,
    /// Largest signed slack at `point`; negative means strictly interior.
    pub margin: f64,
    pub method: InteriorMethod,
}

/// `max_j (a_red point + off(x))_j`, or `-inf` without rows.
pub fn verify_interior(red: &ReducedProblem, x: &Vector, point: &Vector) -> Result<f64> {
    check_len("point", red.n_indep(), point.len())?;
    check_len("x", red.n_inp(), x.len())?;
    Ok(red.slack(point, x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Solves the artificial LP with cost `big_m * u_a` over free `(u, u_a)`.
pub fn find_interior_artificial(red: &ReducedProblem, x: &Vector, big_m: f64) -> Result<InteriorResult> {
    if !(big_m > 0.0) {
        return Err(Error::InvalidConfig(String::from("big_m must be positive")));
    }
    check_len("x", red.n_inp(), x.len())?;
    let n = red.n_indep();
    let m = red.n_ineq();
    let mut a = Matrix::zeros(m, n + 1);
    a.columns_mut(0, n).copy_from(&red.a_red);
    a.column_mut(n).fill(-1.0);
    let mut cost = Vector::zeros(n + 1);
    cost[n] = big_m;
    let lp = StandardFormLP::new(cost, a, -red.offset(x)).with_bounds(vec![(f64::NEG_INFINITY, f64::INFINITY); n + 1]);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(Error::Unbounded),
        // u_a can always absorb every violation.
        LpStatus::Infeasible => return Err(Error::Numerical(String::from("artificial LP reported infeasible"))),
    }
    let point = sol.solution.rows(0, n).into_owned();
    let margin = verify_interior(red, x, &point)?;
    if sol.solution[n] >= -EMPTY_INTERIOR_TOL || margin >= -EMPTY_INTERIOR_TOL {
        return Err(Error::EmptyInterior { margin });
    }
    Ok(InteriorResult {
        point,
        margin,
        method: InteriorMethod::ArtificialLp,
    })
}

/// One basis of the slack system: `z_S = coef x + constant`, other slacks zero.
#[derive(Debug, Clone)]
struct BasisSolve {
    columns: Vec<usize>,
    coef: Matrix,
    constant: Vector,
}

/// Basis enumeration of `a_red u + B x + b + z = 0, z >= 0`, independent of `x`.
///
/// With `n` independent rows `I` of `a_red`, `u = -A_I^{-1}(B_I x + b_I + z_I)`
/// and the remaining system is `A_hat z + A_hat (B x + b) = 0` with
/// `A_hat = I - a_red A_I^{-1} E_I`.
#[derive(Debug, Clone)]
pub struct BfsIndexSets {
    /// Rows of `a_red` whose slacks pin `u`.
    pub pivot_rows: Vec<usize>,
    /// `rank(A_hat)`, the size of every index set.
    pub rank: usize,
    bases: Vec<BasisSolve>,
    pivot_lu: LU<f64, Dyn, Dyn>,
    b_mat: Matrix,
    b_vec: Vector,
}

impl BfsIndexSets {
    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        self.bases.iter().map(|b| b.columns.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// `u = -A_I^{-1}(B_I x + b_I + z_I)`.
    fn recover(&self, z: &Vector, x: &Vector) -> Result<Vector> {
        let rhs = Vector::from_iterator(
            self.pivot_rows.len(),
            self.pivot_rows
                .iter()
                .map(|&r| self.b_mat.row(r).dot(&x.transpose()) + self.b_vec[r] + z[r]),
        );
        self.pivot_lu
            .solve(&rhs)
            .map(|u| -u)
            .ok_or_else(|| Error::Numerical(String::from("singular pivot block")))
    }
}

pub fn build_bfs_structures(red: &ReducedProblem, cap: usize) -> Result<BfsIndexSets> {
    let n = red.n_indep();
    let m = red.n_ineq();
    let a = &red.a_red;
    let rows = select_independent_columns(&a.transpose(), PIVOT_TOL);
    if rows.rank < n {
        return Err(Error::RankDeficient {
            rank: rows.rank,
            required: n,
        });
    }
    let mut pivot_rows = rows.selected.clone();
    pivot_rows.sort_unstable();
    let pivot = take_rows(a, &pivot_rows);
    let pivot_lu = pivot.clone().lu();
    // a_red A_I^{-1}, then scatter its columns to the pivot rows.
    let solved = pivot_lu
        .solve(&Matrix::identity(n, n))
        .ok_or_else(|| Error::Numerical(String::from("singular pivot block")))?;
    let mixing = a * solved;
    let mut a_hat = Matrix::identity(m, m);
    for (k, &r) in pivot_rows.iter().enumerate() {
        for i in 0..m {
            a_hat[(i, r)] -= mixing[(i, k)];
        }
    }
    let b_hat = &a_hat * &red.b_mat_red;
    let b_vec_hat = &a_hat * &red.b_vec_red;

    let hat_rows = select_independent_columns(&a_hat.transpose(), PIVOT_TOL);
    let rank = hat_rows.rank;
    let mut kept = hat_rows.selected.clone();
    kept.sort_unstable();
    let a_kept = take_rows(&a_hat, &kept);
    let b_kept = take_rows(&b_hat, &kept);
    let bv_kept = Vector::from_iterator(rank, kept.iter().map(|&i| b_vec_hat[i]));

    let subsets = binomial(m, rank);
    if subsets > cap as u128 {
        return Err(Error::EnumerationCap { subsets, cap });
    }
    let mut bases = Vec::new();
    for cols in Combinations::new(m, rank) {
        if rank == 0 {
            bases.push(BasisSolve {
                columns: cols,
                coef: Matrix::zeros(0, red.n_inp()),
                constant: Vector::zeros(0),
            });
            continue;
        }
        let sub = take_columns(&a_kept, &cols);
        if select_independent_columns(&sub, PIVOT_TOL).rank < rank {
            continue;
        }
        let lu = sub.lu();
        let (Some(coef), Some(constant)) = (lu.solve(&b_kept), lu.solve(&bv_kept)) else {
            continue;
        };
        bases.push(BasisSolve {
            columns: cols,
            coef: -coef,
            constant: -constant,
        });
    }
    Ok(BfsIndexSets {
        pivot_rows,
        rank,
        bases,
        pivot_lu,
        b_mat: red.b_mat_red.clone(),
        b_vec: red.b_vec_red.clone(),
    })
}

/// Mean of the distinct vertices reachable from the cached bases at `x`.
pub fn find_interior_bfs_average(red: &ReducedProblem, sets: &BfsIndexSets, x: &Vector) -> Result<InteriorResult> {
    check_len("x", red.n_inp(), x.len())?;
    let m = red.n_ineq();
    let mut vertices: Vec<Vector> = Vec::new();
    for basis in &sets.bases {
        let z_s = &basis.coef * x + &basis.constant;
        if z_s.iter().any(|&v| v < BFS_ACCEPT_TOL) {
            continue;
        }
        let mut z = Vector::zeros(m);
        for (k, &c) in basis.columns.iter().enumerate() {
            z[c] = z_s[k].max(0.0);
        }
        let u = sets.recover(&z, x)?;
        if !vertices
            .iter()
            .any(|v| inf_norm(&(v - &u)) <= VERTEX_MERGE_TOL * (1.0 + inf_norm(&u)))
        {
            vertices.push(u);
        }
    }
    if vertices.is_empty() {
        return Err(Error::Infeasible);
    }
    let count = vertices.len() as f64;
    let point = vertices.iter().fold(Vector::zeros(red.n_indep()), |acc, v| acc + v) / count;
    let margin = verify_interior(red, x, &point)?;
    if margin >= BFS_ACCEPT_TOL {
        return Err(Error::EmptyInterior { margin });
    }
    Ok(InteriorResult {
        point,
        margin,
        method: InteriorMethod::BfsAverage,
    })
}

/// Predicts a direction in the unit ball for the phase-I problem.
pub trait DirectionModel {
    fn direction(&self, x: &Vector, u_o: &Vector) -> Result<Vector>;
}

/// The artificial problem `min u_a` over `(u, u_a)` with rows
/// `a_red u - u_a + off(x) <= 0` and `u_a <= cap`, posed as a problem
/// with no equalities and the same inputs.
#[derive(Debug, Clone)]
pub struct Phase1Problem {
    pub reduced: ReducedProblem,
    pub cap: f64,
    n: usize,
}

impl Phase1Problem {
    pub fn new(red: &ReducedProblem, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidConfig(String::from("phase-I cap must be positive")));
        }
        let n = red.n_indep();
        let m = red.n_ineq();
        let mut a = Matrix::zeros(m + 1, n + 1);
        a.view_mut((0, 0), (m, n)).copy_from(&red.a_red);
        for i in 0..m {
            a[(i, n)] = -1.0;
        }
        a[(m, n)] = 1.0;
        let mut b_mat = Matrix::zeros(m + 1, red.n_inp());
        b_mat.rows_mut(0, m).copy_from(&red.b_mat_red);
        let mut b_vec = Vector::zeros(m + 1);
        b_vec.rows_mut(0, m).copy_from(&red.b_vec_red);
        b_vec[m] = -cap;
        let mut c = Vector::zeros(n + 1);
        c[n] = 1.0;
        let problem =
            LinConProblem::new(n + 1, red.n_inp(), Arc::new(LinearObjective { c })).with_inequalities(a, b_mat, b_vec);
        Ok(Self {
            reduced: reduce(Arc::new(problem))?,
            cap,
            n,
        })
    }

    /// Cap large enough for the anchor of every listed input.
    pub fn for_inputs<'a>(red: &ReducedProblem, xs: impl IntoIterator<Item = &'a Vector>) -> Result<Self> {
        let mut widest: f64 = 0.0;
        for x in xs {
            check_len("x", red.n_inp(), x.len())?;
            widest = widest.max(red.offset(x).norm());
        }
        Self::new(red, 2.0 * (widest + 1.0))
    }

    /// `[0; ||off(x)||_2 + 1]`, strictly inside every row.
    pub fn anchor(&self, x: &Vector) -> Result<Vector> {
        let off = self.reduced.offset(x);
        let m = off.len() - 1;
        let level = off.rows(0, m).norm() + 1.0;
        if level >= self.cap {
            return Err(Error::InvalidConfig(alloc::format!(
                "phase-I anchor {level} not below cap {}",
                self.cap
            )));
        }
        let mut w = Vector::zeros(self.n + 1);
        w[self.n] = level;
        Ok(w)
    }

    pub fn n_indep(&self) -> usize {
        self.n
    }
}

/// Maps the model's direction through the phase-I gauge map and reads off
/// `(u, u_a)`. A non-negative `u_a` is a miss.
pub fn find_interior_two_phase(
    red: &ReducedProblem,
    phase1: &Phase1Problem,
    x: &Vector,
    model: &dyn DirectionModel,
) -> Result<InteriorResult> {
    check_len("phase-I dimension", red.n_indep(), phase1.n_indep())?;
    let anchor = phase1.anchor(x)?;
    let poly = build_shifted(&phase1.reduced, x, &anchor)?;
    let v = model.direction(x, &anchor)?;
    let w = poly.map(&v)?;
    let n = phase1.n_indep();
    let u_a = w[n];
    if u_a >= 0.0 {
        return Err(Error::PredictionMiss { u_a });
    }
    let point = w.rows(0, n).into_owned();
    let margin = verify_interior(red, x, &point)?;
    debug_assert!(margin <= u_a + BALL_TOL * (1.0 + u_a.abs()));
    if margin >= 0.0 {
        return Err(Error::PredictionMiss { u_a });
    }
    Ok(InteriorResult {
        point,
        margin,
        method: InteriorMethod::TwoPhase,
    })
}

/// Exact phase-I predictor: the artificial LP optimum pulled back to the ball.
#[derive(Debug, Clone)]
pub struct LpDirection {
    pub phase1: Phase1Problem,
}

impl DirectionModel for LpDirection {
    fn direction(&self, x: &Vector, u_o: &Vector) -> Result<Vector> {
        let red = &self.phase1.reduced;
        let n = red.n_indep();
        let mut cost = Vector::zeros(n);
        cost[n - 1] = 1.0;
        let lp = StandardFormLP::new(cost, red.a_red.clone(), -red.offset(x)).with_bounds(vec![
            (
                f64::NEG_INFINITY,
                f64::INFINITY
            );
            n
        ]);
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Numerical(alloc::format!("phase-I LP is {:?}", sol.status)));
        }
        build_shifted(red, x, u_o)?.inverse(&sol.solution)
    }
}

/// How per-input interior points are obtained for training and inference.
#[derive(Debug, Clone, PartialEq)]
pub enum InteriorStrategy {
    ArtificialLp {
        big_m: f64,
    },
    BfsAverage {
        cap: usize,
    },
    /// One point used for every input; each input is still checked.
    Shared(Vector),
}

impl Default for InteriorStrategy {
    fn default() -> Self {
        InteriorStrategy::ArtificialLp { big_m: DEFAULT_BIG_M }
    }
}

/// One strictly interior point per input, in input order.
pub fn interior_points(red: &ReducedProblem, xs: &[Vector], strategy: &InteriorStrategy) -> Result<Vec<Vector>> {
    match strategy {
        InteriorStrategy::ArtificialLp { big_m } => xs
            .iter()
            .map(|x| find_interior_artificial(red, x, *big_m).map(|r| r.point))
            .collect(),
        InteriorStrategy::BfsAverage { cap } => {
            let sets = build_bfs_structures(red, *cap)?;
            xs.iter()
                .map(|x| find_interior_bfs_average(red, &sets, x).map(|r| r.point))
                .collect()
        }
        InteriorStrategy::Shared(point) => {
            for x in xs {
                build_shifted(red, x, point)?;
            }
            Ok(xs.iter().map(|_| point.clone()).collect())
        }
    }
}
