//! Primal active-set method for convex quadratic programs
//! `min 1/2 u'Qu + c'u  s.t.  A u <= b`.
//!
//! Each iteration solves the equality-constrained subproblem on the working
//! set in a null-space basis. Zero-curvature directions of the reduced
//! Hessian are followed as rays until a constraint blocks them.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::null_space_basis;
use crate::lp::{solve_lp, LpStatus, StandardFormLP};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::{Matrix, Vector};

/// Smallest eigenvalue tolerated for a positive semidefinite `Q`.
pub const PSD_FLOOR: f64 = -1e-9;
pub const KKT_TOL: f64 = 1e-7;
/// Rows with slack above `-ACTIVE_TOL` count as active.
const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: Matrix,
    pub c: Vector,
    pub a: Matrix,
    pub b: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vector,
    /// One multiplier per row of `a`; zero off the final working set.
    pub multipliers: Vector,
    /// Working set at termination, in insertion order.
    pub working_set: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpProblem {
    /// Checks shapes, symmetrises `q` and rejects indefinite matrices.
    pub fn new(q: Matrix, c: Vector, a: Matrix, b: Vector) -> Result<Self> {
        let n = c.len();
        check_len("qp hessian rows", n, q.nrows())?;
        check_len("qp hessian cols", n, q.ncols())?;
        check_len("qp constraint cols", n, a.ncols())?;
        check_len("qp rhs", a.nrows(), b.len())?;
        let q = (&q + q.transpose()) * 0.5;
        if n > 0 {
            let min_eigenvalue = SymmetricEigen::new(q.clone()).eigenvalues.min();
            if min_eigenvalue < PSD_FLOOR {
                return Err(Error::NotPsd { min_eigenvalue });
            }
        }
        Ok(Self { q, c, a, b })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, u: &Vector) -> f64 {
        0.5 * u.dot(&(&self.q * u)) + self.c.dot(u)
    }

    /// Largest of stationarity, primal, dual and complementarity violations.
    pub fn kkt_residual(&self, u: &Vector, multipliers: &Vector) -> f64 {
        let stationarity = (&self.q * u + &self.c + self.a.tr_mul(multipliers)).amax();
        let slack = &self.a * u - &self.b;
        let mut worst = stationarity;
        for i in 0..slack.len() {
            worst = worst
                .max(slack[i].max(0.0))
                .max((-multipliers[i]).max(0.0))
                .max((multipliers[i] * slack[i]).abs());
        }
        worst
    }

    /// Any feasible point, from a phase-I LP.
    pub fn feasible_point(&self) -> Result<Vector> {
        let n = self.dim();
        let lp = StandardFormLP::new(Vector::zeros(n), self.a.clone(), self.b.clone()).with_bounds(vec![
            (
                f64::NEG_INFINITY,
                f64::INFINITY
            );
            n
        ]);
        let r = solve_lp(&lp)?;
        match r.status {
            LpStatus::Optimal => Ok(r.solution),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Numerical(String::from("feasibility LP unbounded"))),
        }
    }
}

pub fn solve_qp(qp: &QpProblem) -> Result<QpSolution> {
    let start = qp.feasible_point()?;
    solve_qp_from(qp, start)
}

/// Active-set iterations from a feasible `start`.
pub fn solve_qp_from(qp: &QpProblem, start: Vector) -> Result<QpSolution> {
    let n = qp.dim();
    let m = qp.a.nrows();
    check_len("qp start", n, start.len())?;
    let row_norms: Vec<f64> = (0..m).map(|i| qp.a.row(i).norm()).collect();
    let scale = 1.0 + qp.b.amax().max(start.amax());
    let violation = (&qp.a * &start - &qp.b).iter().fold(0.0_f64, |w, &v| w.max(v));
    if violation > ACTIVE_TOL * scale {
        return Err(Error::InvalidConfig(alloc::format!(
            "qp start violates a row by {violation:e}"
        )));
    }
    let curvature_tol = 1e-10 * (1.0 + qp.q.amax());
    let mut u = start;
    let mut working: Vec<usize> = Vec::new();
    {
        let slack = &qp.a * &u - &qp.b;
        for i in 0..m {
            if slack[i] >= -ACTIVE_TOL * scale && row_norms[i] > 0.0 {
                let z = null_space_basis(&rows_of(&qp.a, &working));
                if (z.tr_mul(&qp.a.row(i).transpose())).norm() > 1e-9 * row_norms[i] {
                    working.push(i);
                }
            }
        }
    }
    let cap = 500 + 50 * (m + n);
    for iteration in 0..cap {
        let g = &qp.q * &u + &qp.c;
        let aw = rows_of(&qp.a, &working);
        let z = null_space_basis(&aw);
        let (p, ray) = if z.ncols() == 0 {
            (Vector::zeros(n), false)
        } else {
            let h = z.tr_mul(&(&qp.q * &z));
            let r = z.tr_mul(&g);
            let eig = SymmetricEigen::new(h);
            let mut flat = Vector::zeros(z.ncols());
            let mut curved = Vector::zeros(z.ncols());
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                let vk = eig.eigenvectors.column(k);
                let coef = vk.dot(&r);
                if lam <= curvature_tol {
                    flat.axpy(coef, &vk, 1.0);
                } else {
                    curved.axpy(coef / lam, &vk, 1.0);
                }
            }
            if flat.norm() > 1e-12 * (1.0 + g.norm()) {
                (-(&z * flat), true)
            } else {
                (-(&z * curved), false)
            }
        };
        if !ray && p.amax() <= 1e-12 * (1.0 + u.amax()) {
            let lambda_w = if working.is_empty() {
                Vector::zeros(0)
            } else {
                let gram = &aw * aw.transpose();
                gram.lu()
                    .solve(&(-(&aw * &g)))
                    .ok_or_else(|| Error::Numerical(String::from("dependent working set")))?
            };
            match crate::linalg::argmax(lambda_w.iter().map(|l| -l)) {
                Some((k, neg)) if -neg < -1e-10 * (1.0 + g.amax()) => {
                    working.remove(k);
                }
                _ => {
                    let mut multipliers = Vector::zeros(m);
                    for (k, &i) in working.iter().enumerate() {
                        multipliers[i] = lambda_w[k].max(0.0);
                    }
                    let kkt_residual = qp.kkt_residual(&u, &multipliers);
                    return Ok(QpSolution {
                        u,
                        multipliers,
                        working_set: working,
                        kkt_residual,
                        iterations: iteration,
                    });
                }
            }
            continue;
        }
        let mut step = if ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        let pnorm = p.norm();
        for (i, &row_norm) in row_norms.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = qp.a.row(i).dot(&p.transpose());
            if ap > 1e-12 * row_norm * pnorm {
                let room = (qp.b[i] - qp.a.row(i).dot(&u.transpose())).max(0.0);
                let ratio = room / ap;
                if ratio < step {
                    step = ratio;
                    blocking = Some(i);
                }
            }
        }
        if !step.is_finite() {
            return Err(Error::Unbounded);
        }
        u.axpy(step, &p, 1.0);
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::Numerical(alloc::format!(
        "active-set iteration cap {cap} reached"
    )))
}

fn rows_of(a: &Matrix, idx: &[usize]) -> Matrix {
    crate::linalg::take_rows(a, idx)
}

/// The objective over the reduced set at `x` as a QP in the independent block.
/// Requires an objective with a constant Hessian.
pub fn reduced_qp(red: &ReducedProblem, x: &Vector) -> Result<QpProblem> {
    let objective = &red.parent.objective;
    let hessian = objective.hessian().ok_or(Error::NotQuadratic)?;
    let basis = red.lift_basis();
    let anchor = red.lift(&Vector::zeros(red.n_indep()), x)?;
    let q = basis.tr_mul(&(&hessian * &basis));
    let c = red.pull_back_gradient(&objective.gradient(&anchor, x));
    QpProblem::new(q, c, red.a_red.clone(), -red.offset(x))
}

/// Full-space optimum at `x` for a quadratic objective.
pub fn reference_optimum(red: &ReducedProblem, x: &Vector) -> Result<Vector> {
    let sol = solve_qp(&reduced_qp(red, x)?)?;
    red.lift(&sol.u, x)
}
