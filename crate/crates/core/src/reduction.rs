//! Variable elimination.
//!
//! The equalities pin down `N_eq` dependent coordinates of `u` as an affine
//! function of the remaining independent coordinates and of `x`:
//!
//! ```text
//!     u_dep = -(A_dep)^-1 (A_indep u_indep + B_eq x + b_eq)
//! ```
//!
//! Substituting into the inequalities leaves an inequality-only problem over
//! `u_indep`, `A u_indep + B x + b <= 0`, with
//!
//! ```text
//!     A = A_ineq_indep - A_ineq_dep (A_dep)^-1 A_indep
//!     B = B_ineq       - A_ineq_dep (A_dep)^-1 B_eq
//!     b = b_ineq       - A_ineq_dep (A_dep)^-1 b_eq
//! ```
//!
//! The inverse is never formed; every solve goes through the stored LU factors.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{linalg::LU, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{self, take_columns, take_entries, PIVOT_TOL};
use crate::problem::{check_len, LinConProblem};
use crate::{Matrix, Vector};

/// Absolute tolerance on equality residuals of lifted points.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Split of the decision vector into independent and dependent coordinates.
#[derive(Clone)]
pub struct VariablePartition {
    /// Ascending original indices of the free coordinates.
    pub indep_idx: Vec<usize>,
    /// Ascending original indices of the eliminated coordinates.
    pub dep_idx: Vec<usize>,
    dep_lu: LU<f64, Dyn, Dyn>,
    a_eq_indep: Matrix,
}

impl fmt::Debug for VariablePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VariablePartition")
            .field("indep_idx", &self.indep_idx)
            .field("dep_idx", &self.dep_idx)
            .finish()
    }
}

impl VariablePartition {
    pub fn n_indep(&self) -> usize {
        self.indep_idx.len()
    }

    pub fn n_dep(&self) -> usize {
        self.dep_idx.len()
    }

    /// Solves `A_dep y = rhs` with the stored factors.
    pub fn solve_dep(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.dep_idx.is_empty() {
            return Ok(Matrix::zeros(0, rhs.ncols()));
        }
        self.dep_lu
            .solve(rhs)
            .ok_or_else(|| Error::Numerical("singular dependent block".into()))
    }

    fn solve_dep_vec(&self, rhs: &Vector) -> Result<Vector> {
        if self.dep_idx.is_empty() {
            return Ok(Vector::zeros(0));
        }
        self.dep_lu
            .solve(rhs)
            .ok_or_else(|| Error::Numerical("singular dependent block".into()))
    }
}

/// Chooses `N_eq` linearly independent columns of `a_eq` as the dependent block.
///
/// Columns are picked greedily by a column-pivoted QR; ties go to the lowest
/// index, so the result is deterministic.
pub fn partition_variables(problem: &LinConProblem) -> Result<VariablePartition> {
    let n_eq = problem.n_eq();
    let n_opt = problem.n_opt;
    check_len("a_eq columns", n_opt, problem.a_eq.ncols())?;
    let sel = linalg::select_independent_columns(&problem.a_eq, PIVOT_TOL);
    if sel.rank < n_eq {
        return Err(Error::RankDeficient {
            rank: sel.rank,
            required: n_eq,
        });
    }
    let mut dep_idx = sel.selected;
    dep_idx.sort_unstable();
    let indep_idx: Vec<usize> = (0..n_opt).filter(|i| !dep_idx.contains(i)).collect();
    let a_dep = take_columns(&problem.a_eq, &dep_idx);
    let dep_lu = a_dep.lu();
    if n_eq > 0 {
        let u = dep_lu.u();
        let min_pivot = (0..n_eq).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > PIVOT_TOL) {
            return Err(Error::RankDeficient {
                rank: 0,
                required: n_eq,
            });
        }
    }
    Ok(VariablePartition {
        a_eq_indep: take_columns(&problem.a_eq, &indep_idx),
        indep_idx,
        dep_idx,
        dep_lu,
    })
}

/// The inequality-only problem over `u_indep`, with the data to lift back.
#[derive(Clone)]
pub struct ReducedProblem {
    pub a_red: Matrix,
    pub b_mat_red: Matrix,
    pub b_vec_red: Vector,
    pub partition: VariablePartition,
    pub parent: Arc<LinConProblem>,
    // (A_dep)^-1 A_indep, used for gradient pull-back.
    elimination: Matrix,
}

impl fmt::Debug for ReducedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedProblem")
            .field("a_red", &self.a_red)
            .field("b_mat_red", &self.b_mat_red)
            .field("b_vec_red", &self.b_vec_red)
            .field("partition", &self.partition)
            .finish()
    }
}

/// Eliminates the equalities of a validated problem.
pub fn reduce(problem: Arc<LinConProblem>) -> Result<ReducedProblem> {
    problem.validate().into_result()?;
    let partition = partition_variables(&problem)?;
    let p = &*problem;
    let elimination = partition.solve_dep(&partition.a_eq_indep)?;
    let elim_b_mat = partition.solve_dep(&p.b_mat_eq)?;
    let elim_b_vec = partition.solve_dep_vec(&p.b_vec_eq)?;

    let ineq_indep = take_columns(&p.a_ineq, &partition.indep_idx);
    let ineq_dep = take_columns(&p.a_ineq, &partition.dep_idx);
    let a_red = &ineq_indep - &ineq_dep * &elimination;
    let b_mat_red = &p.b_mat_ineq - &ineq_dep * &elim_b_mat;
    let b_vec_red = &p.b_vec_ineq - &ineq_dep * &elim_b_vec;

    let red = ReducedProblem {
        a_red,
        b_mat_red,
        b_vec_red,
        partition,
        elimination,
        parent: problem.clone(),
    };
    red.verify_closed_form()?;
    Ok(red)
}

impl ReducedProblem {
    pub fn n_indep(&self) -> usize {
        self.partition.n_indep()
    }

    pub fn n_ineq(&self) -> usize {
        self.a_red.nrows()
    }

    pub fn n_inp(&self) -> usize {
        self.parent.n_inp
    }

    /// `A_ineq N`, where `N` is the linear part of the lift, must equal `a_red`.
    fn verify_closed_form(&self) -> Result<()> {
        let direct = &self.parent.a_ineq * self.lift_basis();
        let scale = 1.0 + linalg::inf_norm(&Vector::from_iterator(direct.len(), direct.iter().copied()));
        let diff = (&direct - &self.a_red).amax();
        if diff > 1e-9 * scale {
            return Err(Error::Numerical(alloc::format!(
                "reduced matrix disagrees with direct computation by {diff:e}"
            )));
        }
        Ok(())
    }

    /// Linear part `N` of the lift: `lift(u, x) = N u + lift(0, x)`.
    pub fn lift_basis(&self) -> Matrix {
        let n = self.parent.n_opt;
        let k = self.n_indep();
        let mut basis = Matrix::zeros(n, k);
        for (col, &i) in self.partition.indep_idx.iter().enumerate() {
            basis[(i, col)] = 1.0;
        }
        for (row, &i) in self.partition.dep_idx.iter().enumerate() {
            for col in 0..k {
                basis[(i, col)] = -self.elimination[(row, col)];
            }
        }
        basis
    }

    /// `a_red u + b_mat_red x + b_vec_red`; feasible rows are `<= 0`.
    pub fn slack(&self, u_indep: &Vector, x: &Vector) -> Vector {
        &self.a_red * u_indep + &self.b_mat_red * x + &self.b_vec_red
    }

    /// `b_mat_red x + b_vec_red`, the constant part of [`Self::slack`].
    pub fn offset(&self, x: &Vector) -> Vector {
        &self.b_mat_red * x + &self.b_vec_red
    }

    fn check(&self, u_indep: &Vector, x: &Vector) -> Result<()> {
        check_len("u_indep", self.n_indep(), u_indep.len())?;
        check_len("x", self.n_inp(), x.len())
    }

    /// Dependent coordinates implied by the equalities.
    pub fn reconstruct_dependent(&self, u_indep: &Vector, x: &Vector) -> Result<Vector> {
        self.check(u_indep, x)?;
        let p = &*self.parent;
        let rhs = &self.partition.a_eq_indep * u_indep + &p.b_mat_eq * x + &p.b_vec_eq;
        Ok(-self.partition.solve_dep_vec(&rhs)?)
    }

    /// Full decision vector with entries placed at their original indices.
    pub fn lift(&self, u_indep: &Vector, x: &Vector) -> Result<Vector> {
        let dep = self.reconstruct_dependent(u_indep, x)?;
        let mut full = Vector::zeros(self.parent.n_opt);
        for (k, &i) in self.partition.indep_idx.iter().enumerate() {
            full[i] = u_indep[k];
        }
        for (k, &i) in self.partition.dep_idx.iter().enumerate() {
            full[i] = dep[k];
        }
        Ok(full)
    }

    /// Independent coordinates of a full vector.
    pub fn restrict(&self, u_full: &Vector) -> Result<Vector> {
        check_len("u", self.parent.n_opt, u_full.len())?;
        Ok(take_entries(u_full, &self.partition.indep_idx))
    }

    /// Chain rule through the lift: `g_indep - ((A_dep)^-1 A_indep)' g_dep`.
    pub fn pull_back_gradient(&self, g_full: &Vector) -> Vector {
        let g_ind = take_entries(g_full, &self.partition.indep_idx);
        let g_dep = take_entries(g_full, &self.partition.dep_idx);
        g_ind - self.elimination.tr_mul(&g_dep)
    }

    /// Objective value at the lifted point and its gradient in `u_indep`.
    pub fn reduced_objective(&self, u_indep: &Vector, x: &Vector) -> Result<(f64, Vector)> {
        let full = self.lift(u_indep, x)?;
        let f = &self.parent.objective;
        Ok((f.value(&full, x), self.pull_back_gradient(&f.gradient(&full, x))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Builtin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    // u1 + u2 - 1 = 0, no inputs.
    fn sum_to_one() -> Arc<LinConProblem> {
        Arc::new(
            LinConProblem::new(2, 0, Arc::new(Builtin::HalfSumSquares)).with_equalities(
                Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
                Matrix::zeros(1, 0),
                dvec(&[-1.0]),
            ),
        )
    }

    #[test]
    fn first_pivot_on_tie() {
        let p = partition_variables(&sum_to_one()).unwrap();
        assert_eq!(p.dep_idx, [0]);
        assert_eq!(p.indep_idx, [1]);
    }

    #[test]
    fn largest_pivot_column_wins() {
        let p = LinConProblem::new(3, 0, Arc::new(Builtin::SumSquares)).with_equalities(
            Matrix::from_row_slice(1, 3, &[0.0, 2.0, 1.0]),
            Matrix::zeros(1, 0),
            dvec(&[0.0]),
        );
        let part = partition_variables(&p).unwrap();
        assert_eq!(part.dep_idx, [1]);
        assert_eq!(part.indep_idx, [0, 2]);
    }

    #[test]
    fn degenerate_block_is_rejected() {
        let p = LinConProblem::new(3, 0, Arc::new(Builtin::SumSquares)).with_equalities(
            Matrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            Matrix::zeros(2, 0),
            dvec(&[0.0, 0.0]),
        );
        assert!(matches!(
            partition_variables(&p),
            Err(Error::RankDeficient { rank: 1, required: 2 })
        ));
    }

    #[test]
    fn reconstruct_single_equality() {
        let red = reduce(sum_to_one()).unwrap();
        let x = Vector::zeros(0);
        let d = red.reconstruct_dependent(&dvec(&[0.25]), &x).unwrap();
        assert!((d[0] - 0.75).abs() < 1e-15);
        let d = red.reconstruct_dependent(&dvec(&[0.0]), &x).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15);
        let full = red.lift(&dvec(&[0.25]), &x).unwrap();
        assert_eq!(full, dvec(&[0.75, 0.25]));
    }

    #[test]
    fn no_equalities_keeps_inequalities() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let b = Matrix::from_row_slice(2, 1, &[0.3, -0.1]);
        let c = dvec(&[-1.0, -2.0]);
        let p =
            LinConProblem::new(2, 1, Arc::new(Builtin::SumSquares)).with_inequalities(a.clone(), b.clone(), c.clone());
        let red = reduce(Arc::new(p)).unwrap();
        assert_eq!(red.a_red, a);
        assert_eq!(red.b_mat_red, b);
        assert_eq!(red.b_vec_red, c);
        let u = dvec(&[0.4, -0.2]);
        let x = dvec(&[1.5]);
        assert_eq!(red.lift(&u, &x).unwrap(), u);
    }

    #[test]
    fn two_generator_balance_reduces_to_interval() {
        // u1 + u2 = x, 0 <= u_i <= 1; eliminating u1 leaves
        // max(0, x - 1) <= u2 <= min(1, x).
        let p = LinConProblem::new(2, 1, Arc::new(Builtin::SumSquares))
            .with_equalities(
                Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
                Matrix::from_row_slice(1, 1, &[-1.0]),
                dvec(&[0.0]),
            )
            .with_inequalities(
                Matrix::from_row_slice(4, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 1.0]),
                Matrix::zeros(4, 1),
                dvec(&[0.0, 0.0, -1.0, -1.0]),
            );
        let red = reduce(Arc::new(p)).unwrap();
        assert_eq!(red.partition.indep_idx, [1]);
        let expected_a = dvec(&[1.0, -1.0, -1.0, 1.0]);
        let expected_b = dvec(&[-1.0, 0.0, 1.0, 0.0]);
        let expected_c = dvec(&[0.0, 0.0, -1.0, -1.0]);
        for j in 0..4 {
            assert!((red.a_red[(j, 0)] - expected_a[j]).abs() < 1e-14);
            assert!((red.b_mat_red[(j, 0)] - expected_b[j]).abs() < 1e-14);
            assert!((red.b_vec_red[j] - expected_c[j]).abs() < 1e-14);
        }
        let x = dvec(&[1.5]);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let off = red.offset(&x);
        for j in 0..4 {
            let a = red.a_red[(j, 0)];
            if a > 0.0 {
                hi = hi.min(-off[j] / a);
            } else {
                lo = lo.max(-off[j] / a);
            }
        }
        assert!((lo - 0.5).abs() < 1e-14);
        assert!((hi - 1.0).abs() < 1e-14);
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, n_eq: usize, n_ineq: usize, n_inp: usize) -> Arc<LinConProblem> {
        let mut int = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-4..=4) as f64);
        let a_eq = int(n_eq, n);
        let b_eq = int(n_eq, n_inp);
        let a_in = int(n_ineq, n);
        let b_in = int(n_ineq, n_inp);
        let c_eq = Vector::from_fn(n_eq, |_, _| rng.random_range(-3.0..3.0));
        let c_in = Vector::from_fn(n_ineq, |_, _| rng.random_range(-3.0..0.0));
        let q = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = &q * q.transpose() + Matrix::identity(n, n);
        let c = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        Arc::new(
            LinConProblem::new(
                n,
                n_inp,
                Arc::new(crate::problem::QuadraticObjective::new(q, c).unwrap()),
            )
            .with_equalities(a_eq, b_eq, c_eq)
            .with_inequalities(a_in, b_in, c_in),
        )
    }

    #[test]
    fn dependent_block_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let p = random_problem(&mut rng, 3, 2, 0, 2);
            let Ok(red) = reduce(p.clone()) else { continue };
            let u_ind = dvec(&[rng.random_range(-2.0..2.0)]);
            let x = dvec(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            // Independent route: solve the square system [A_eq; e_indep'] u = [-(Bx+b); u_ind].
            let mut sys = Matrix::zeros(3, 3);
            sys.rows_mut(0, 2).copy_from(&p.a_eq);
            sys[(2, red.partition.indep_idx[0])] = 1.0;
            let rhs_top = -(&p.b_mat_eq * &x + &p.b_vec_eq);
            let rhs = dvec(&[rhs_top[0], rhs_top[1], u_ind[0]]);
            let oracle = sys.full_piv_lu().solve(&rhs).unwrap();
            let lifted = red.lift(&u_ind, &x).unwrap();
            assert!((lifted - oracle).amax() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn lifted_points_satisfy_equalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 5, 2, 4, 3);
            let Ok(red) = reduce(p.clone()) else { continue };
            let u = Vector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let x = Vector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let full = red.lift(&u, &x).unwrap();
            assert!(p.equality_residual(&full, &x).amax() <= EQUALITY_TOL);
            assert_eq!(red.restrict(&full).unwrap(), u);
        }
    }

    #[test]
    fn reduced_feasibility_matches_full_feasibility() {
        // Rejection-sampling oracle in both directions.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = loop {
            let p = random_problem(&mut rng, 5, 2, 4, 1);
            if reduce(p.clone()).is_ok() {
                break p;
            }
        };
        let red = reduce(p.clone()).unwrap();
        let (mut inside, mut outside) = (0, 0);
        for _ in 0..4000 {
            let u = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let x = dvec(&[rng.random_range(-1.0..1.0)]);
            let red_slack = red.slack(&u, &x);
            let full = red.lift(&u, &x).unwrap();
            let full_slack = p.inequality_slack(&full, &x);
            if red_slack.iter().any(|s| s.abs() < 1e-7) {
                continue;
            }
            let red_ok = red_slack.iter().all(|&s| s <= 0.0);
            let full_ok = full_slack.iter().all(|&s| s <= 0.0);
            assert_eq!(red_ok, full_ok);
            if red_ok {
                inside += 1
            } else {
                outside += 1
            }
        }
        assert!(outside > 0);
        let _ = inside;
    }

    #[test]
    fn reduced_objective_chain_rule_by_hand() {
        let red = reduce(sum_to_one()).unwrap();
        let (v, g) = red.reduced_objective(&dvec(&[0.25]), &Vector::zeros(0)).unwrap();
        assert!((v - 0.3125).abs() < 1e-15);
        assert!((g[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn reduced_objective_without_equalities_is_identity_gradient() {
        let p = LinConProblem::new(3, 0, Arc::new(Builtin::HalfSumSquares));
        let red = reduce(Arc::new(p)).unwrap();
        let u = dvec(&[0.1, -0.2, 0.3]);
        let (_, g) = red.reduced_objective(&u, &Vector::zeros(0)).unwrap();
        assert_eq!(g, u);
    }

    #[test]
    fn reduced_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut done = 0;
        while done < 25 {
            let p = random_problem(&mut rng, 5, 2, 0, 2);
            let Ok(red) = reduce(p) else { continue };
            let u = Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let x = Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let (_, g) = red.reduced_objective(&u, &x).unwrap();
            for i in 0..3 {
                let h = 1e-5;
                let mut up = u.clone();
                up[i] += h;
                let mut dn = u.clone();
                dn[i] -= h;
                let fd =
                    (red.reduced_objective(&up, &x).unwrap().0 - red.reduced_objective(&dn, &x).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "fd {fd} vs {}", g[i]);
            }
            done += 1;
        }
    }

    #[test]
    fn partition_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 6, 3, 0, 0);
            let a = partition_variables(&p).map(|q| (q.dep_idx, q.indep_idx));
            let b = partition_variables(&p).map(|q| (q.dep_idx, q.indep_idx));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_wrong_lengths() {
        let red = reduce(sum_to_one()).unwrap();
        assert!(matches!(
            red.lift(&dvec(&[0.1, 0.2]), &Vector::zeros(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
