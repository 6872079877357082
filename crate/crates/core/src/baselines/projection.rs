use alloc::vec::Vec;

use crate::baselines::qp::{solve_qp_from, QpProblem};
use crate::error::Result;
use crate::linalg::{null_space_basis, take_rows};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::{Matrix, Vector};

/// Euclidean projection in the independent block, with the rows that carry
/// a positive multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vector,
    pub active_rows: Vec<usize>,
}

/// `argmin ||u - y||^2` over the reduced set at `x`. Points violating no row
/// by more than rounding are returned unchanged.
pub fn project_onto_polytope(red: &ReducedProblem, x: &Vector, y: &Vector) -> Result<Vector> {
    Ok(project_with_active(red, x, y)?.point)
}

pub fn project_with_active(red: &ReducedProblem, x: &Vector, y: &Vector) -> Result<Projection> {
    check_len("projected point", red.n_indep(), y.len())?;
    let slack = red.slack(y, x);
    let tol = 1e-12 * (1.0 + red.offset(x).amax() + y.amax());
    if slack.iter().all(|&s| s <= tol) {
        return Ok(Projection {
            point: y.clone(),
            active_rows: Vec::new(),
        });
    }
    let n = red.n_indep();
    let qp = QpProblem::new(
        Matrix::identity(n, n) * 2.0,
        y * -2.0,
        red.a_red.clone(),
        -red.offset(x),
    )?;
    let start = qp.feasible_point()?;
    let sol = solve_qp_from(&qp, start)?;
    let active_rows = sol
        .working_set
        .iter()
        .copied()
        .filter(|&i| sol.multipliers[i] > 1e-12)
        .collect();
    Ok(Projection {
        point: sol.u,
        active_rows,
    })
}

impl Projection {
    /// Locally the projection is the orthogonal projector onto the null space
    /// of the active rows; it is symmetric, so it is its own transpose.
    pub fn backward(&self, red: &ReducedProblem, grad_point: &Vector) -> Vector {
        if self.active_rows.is_empty() {
            return grad_point.clone();
        }
        let z = null_space_basis(&take_rows(&red.a_red, &self.active_rows));
        &z * z.tr_mul(grad_point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Builtin, LinConProblem};
    use crate::reduction::reduce;
    use crate::testkit::random_polytope_problem;
    use alloc::sync::Arc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    fn square() -> ReducedProblem {
        let p = LinConProblem::new(2, 0, Arc::new(Builtin::SumSquares)).with_inequalities(
            Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            Matrix::zeros(4, 0),
            Vector::from_element(4, -1.0),
        );
        reduce(Arc::new(p)).unwrap()
    }

    #[test]
    fn box_clip_and_idempotence() {
        let red = square();
        let none = Vector::zeros(0);
        let p = project_onto_polytope(&red, &none, &dvec(&[0.0, 2.0])).unwrap();
        assert!((p - dvec(&[0.0, 1.0])).amax() < 1e-12);
        let inside = dvec(&[0.3, -0.7]);
        assert_eq!(project_onto_polytope(&red, &none, &inside).unwrap(), inside);
    }

    #[test]
    fn variational_inequality_and_non_expansiveness() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let none = Vector::zeros(0);
        for _ in 0..60 {
            let n = rng.random_range(1..=3);
            let red = reduce(Arc::new(random_polytope_problem(&mut rng, n, 8))).unwrap();
            let a = Vector::from_fn(n, |_, _| rng.random_range(-6.0..6.0));
            let b = Vector::from_fn(n, |_, _| rng.random_range(-6.0..6.0));
            let pa = project_onto_polytope(&red, &none, &a).unwrap();
            let pb = project_onto_polytope(&red, &none, &b).unwrap();
            assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-9);
            assert_eq!(project_onto_polytope(&red, &none, &pa).unwrap(), pa);
            for _ in 0..20 {
                // feasible w from a convex combination with the projection of another point
                let t: f64 = rng.random_range(0.0..1.0);
                let w = &pa * t + &pb * (1.0 - t);
                assert!((&pa - &a).dot(&(&w - &pa)) >= -1e-7);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences_off_kinks() {
        let red = square();
        let none = Vector::zeros(0);
        let y = dvec(&[0.4, 2.5]);
        let proj = project_with_active(&red, &none, &y).unwrap();
        assert_eq!(proj.active_rows, [1]);
        let g = dvec(&[0.7, -1.3]);
        let back = proj.backward(&red, &g);
        let h = 1e-6;
        for k in 0..2 {
            let mut yp = y.clone();
            yp[k] += h;
            let mut ym = y.clone();
            ym[k] -= h;
            let fd = (g.dot(&project_onto_polytope(&red, &none, &yp).unwrap())
                - g.dot(&project_onto_polytope(&red, &none, &ym).unwrap()))
                / (2.0 * h);
            assert!((fd - back[k]).abs() < 1e-7);
        }
    }
}
