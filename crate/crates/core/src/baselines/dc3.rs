use alloc::vec::Vec;

use crate::error::Result;
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::Vector;

/// Gradient steps on `1/2 ||max(a_red u + off(x), 0)||^2` in the independent
/// block, keeping the masks of violated rows for backprop.
#[derive(Debug, Clone)]
pub struct Correction {
    pub point: Vector,
    masks: Vec<Vec<bool>>,
    step_size: f64,
}

pub fn correct_independent(
    red: &ReducedProblem,
    x: &Vector,
    start: &Vector,
    step_size: f64,
    iters: usize,
) -> Result<Correction> {
    check_len("u_indep", red.n_indep(), start.len())?;
    let mut u = start.clone();
    let mut masks = Vec::with_capacity(iters);
    for _ in 0..iters {
        let violated = red.slack(&u, x).map(|s| s.max(0.0));
        masks.push(violated.iter().map(|&v| v > 0.0).collect());
        u.axpy(-step_size, &red.a_red.tr_mul(&violated), 1.0);
    }
    Ok(Correction {
        point: u,
        masks,
        step_size,
    })
}

/// Starts from a full vector, completes the equalities, corrects, and lifts.
pub fn dc3_correct(red: &ReducedProblem, x: &Vector, u0: &Vector, step_size: f64, iters: usize) -> Result<Vector> {
    let start = red.restrict(u0)?;
    let c = correct_independent(red, x, &start, step_size, iters)?;
    red.lift(&c.point, x)
}

impl Correction {
    /// Each step has Jacobian `I - eta a' D a`, which is symmetric.
    pub fn backward(&self, red: &ReducedProblem, grad_point: &Vector) -> Vector {
        let mut g = grad_point.clone();
        for mask in self.masks.iter().rev() {
            let mut ag = &red.a_red * &g;
            for (v, &on) in ag.iter_mut().zip(mask) {
                if !on {
                    *v = 0.0;
                }
            }
            g.axpy(-self.step_size, &red.a_red.tr_mul(&ag), 1.0);
        }
        g
    }
}

/// `1/2 ||max(slack, 0)||^2`.
pub fn half_violation(red: &ReducedProblem, x: &Vector, u_indep: &Vector) -> f64 {
    0.5 * red
        .slack(u_indep, x)
        .iter()
        .map(|s| {
            let v = s.max(0.0);
            v * v
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Builtin, LinConProblem};
    use crate::reduction::reduce;
    use crate::testkit::random_polytope_problem;
    use crate::Matrix;
    use alloc::sync::Arc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    fn half_line() -> ReducedProblem {
        let p = LinConProblem::new(1, 0, Arc::new(Builtin::SumSquares)).with_inequalities(
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::zeros(1, 0),
            dvec(&[-1.0]),
        );
        reduce(Arc::new(p)).unwrap()
    }

    #[test]
    fn feasible_start_is_unchanged() {
        let red = half_line();
        let none = Vector::zeros(0);
        let u = dc3_correct(&red, &none, &dvec(&[0.5]), 1e-4, 3).unwrap();
        assert_eq!(u, dvec(&[0.5]));
    }

    #[test]
    fn one_step_moves_by_step_times_violation() {
        let red = half_line();
        let none = Vector::zeros(0);
        let u = dc3_correct(&red, &none, &dvec(&[3.0]), 0.1, 1).unwrap();
        assert!((u[0] - (3.0 - 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn equality_completion_is_applied() {
        // u1 + u2 = 1, u2 <= 0.2
        let p = LinConProblem::new(2, 0, Arc::new(Builtin::SumSquares))
            .with_equalities(
                Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
                Matrix::zeros(1, 0),
                dvec(&[-1.0]),
            )
            .with_inequalities(
                Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
                Matrix::zeros(1, 0),
                dvec(&[-0.2]),
            );
        let red = reduce(Arc::new(p)).unwrap();
        let none = Vector::zeros(0);
        let u = dc3_correct(&red, &none, &dvec(&[5.0, 0.5]), 0.5, 2).unwrap();
        assert!((u[0] + u[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn violation_never_increases_below_inverse_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let none = Vector::zeros(0);
        for _ in 0..50 {
            let n = rng.random_range(1..=4);
            let red = reduce(Arc::new(random_polytope_problem(&mut rng, n, 10))).unwrap();
            let lipschitz = red.a_red.norm_squared();
            let step = 0.9 / lipschitz;
            let mut u = Vector::from_fn(n, |_, _| rng.random_range(-8.0..8.0));
            let mut last = half_violation(&red, &none, &u);
            for _ in 0..30 {
                u = correct_independent(&red, &none, &u, step, 1).unwrap().point;
                let now = half_violation(&red, &none, &u);
                assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let none = Vector::zeros(0);
        let red = reduce(Arc::new(random_polytope_problem(&mut rng, 3, 9))).unwrap();
        let start = dvec(&[4.0, -3.5, 5.0]);
        let c = correct_independent(&red, &none, &start, 0.05, 4).unwrap();
        let g = dvec(&[0.3, -1.0, 0.8]);
        let back = c.backward(&red, &g);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = start.clone();
            p[k] += h;
            let mut m = start.clone();
            m[k] -= h;
            let fp = g.dot(&correct_independent(&red, &none, &p, 0.05, 4).unwrap().point);
            let fm = g.dot(&correct_independent(&red, &none, &m, 0.05, 4).unwrap().point);
            assert!(((fp - fm) / (2.0 * h) - back[k]).abs() < 1e-6);
        }
    }
}
