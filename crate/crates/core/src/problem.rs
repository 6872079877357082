//! Linearly constrained problems, objectives and the two evaluation metrics.
//!
//! A problem has the form
//!
//! ```text
//!     min  f(u, x)
//!     s.t. A_eq u + B_eq x + b_eq = 0
//!          A_ineq u + B_ineq x + b_ineq <= 0
//! ```
//!
//! where `u` (length `n_opt`) is the decision vector and `x` (length `n_inp`)
//! the input that varies between instances.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, PIVOT_TOL};
use crate::{Matrix, Vector};

/// Objective contract: a value and its gradient with respect to `u`.
pub trait Objective: Send + Sync {
    fn value(&self, u: &Vector, x: &Vector) -> f64;

    fn gradient(&self, u: &Vector, x: &Vector) -> Vector;

    /// Constant Hessian in `u` when the objective is quadratic in `u`.
    fn hessian(&self) -> Option<Matrix> {
        None
    }

    fn name(&self) -> &str;
}

/// `f(u) = 1/2 u'Qu + c'u`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub q: Matrix,
    pub c: Vector,
}

impl QuadraticObjective {
    pub fn new(q: Matrix, c: Vector) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != c.len() {
            return Err(Error::DimensionMismatch {
                context: "quadratic objective",
                expected: c.len(),
                found: q.nrows(),
            });
        }
        Ok(Self { q, c })
    }
}

impl Objective for QuadraticObjective {
    fn value(&self, u: &Vector, _x: &Vector) -> f64 {
        0.5 * u.dot(&(&self.q * u)) + self.c.dot(u)
    }

    fn gradient(&self, u: &Vector, _x: &Vector) -> Vector {
        // symmetric part, so a non-symmetric Q still gets the right gradient
        0.5 * (&self.q * u + self.q.tr_mul(u)) + &self.c
    }

    fn hessian(&self) -> Option<Matrix> {
        Some(0.5 * (&self.q + self.q.transpose()))
    }

    fn name(&self) -> &str {
        "quadratic"
    }
}

/// `f(u) = c'u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective {
    pub c: Vector,
}

impl Objective for LinearObjective {
    fn value(&self, u: &Vector, _x: &Vector) -> f64 {
        self.c.dot(u)
    }

    fn gradient(&self, _u: &Vector, _x: &Vector) -> Vector {
        self.c.clone()
    }

    fn hessian(&self) -> Option<Matrix> {
        Some(Matrix::zeros(self.c.len(), self.c.len()))
    }

    fn name(&self) -> &str {
        "linear"
    }
}

/// Named objectives that need no parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `||u||^2`
    SumSquares,
    /// `||u||^2 / 2`
    HalfSumSquares,
    /// `sum_i u_i^2 + 0.3 sin(5 u_i)`, a smooth non-convex test function.
    Rippled,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sum_squares" => Some(Self::SumSquares),
            "half_sum_squares" => Some(Self::HalfSumSquares),
            "rippled" => Some(Self::Rippled),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SumSquares => "sum_squares",
            Self::HalfSumSquares => "half_sum_squares",
            Self::Rippled => "rippled",
        }
    }
}

impl Objective for Builtin {
    fn value(&self, u: &Vector, _x: &Vector) -> f64 {
        match self {
            Self::SumSquares => u.norm_squared(),
            Self::HalfSumSquares => 0.5 * u.norm_squared(),
            Self::Rippled => u.iter().map(|&a| a * a + 0.3 * libm::sin(5.0 * a)).sum(),
        }
    }

    fn gradient(&self, u: &Vector, _x: &Vector) -> Vector {
        match self {
            Self::SumSquares => 2.0 * u,
            Self::HalfSumSquares => u.clone(),
            Self::Rippled => u.map(|a| 2.0 * a + 1.5 * libm::cos(5.0 * a)),
        }
    }

    fn hessian(&self) -> Option<Matrix> {
        None
    }

    fn name(&self) -> &str {
        self.as_str()
    }
}

pub type ObjectiveHandle = Arc<dyn Objective>;

/// The full problem. Blocks with no rows are stored as `0 x n` matrices.
#[derive(Clone)]
pub struct LinConProblem {
    pub n_opt: usize,
    pub n_inp: usize,
    pub a_eq: Matrix,
    pub b_mat_eq: Matrix,
    pub b_vec_eq: Vector,
    pub a_ineq: Matrix,
    pub b_mat_ineq: Matrix,
    pub b_vec_ineq: Vector,
    pub objective: ObjectiveHandle,
}

impl fmt::Debug for LinConProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinConProblem")
            .field("n_opt", &self.n_opt)
            .field("n_inp", &self.n_inp)
            .field("n_eq", &self.n_eq())
            .field("n_ineq", &self.n_ineq())
            .field("objective", &self.objective.name())
            .finish()
    }
}

impl LinConProblem {
    /// A problem with no constraints yet.
    pub fn new(n_opt: usize, n_inp: usize, objective: ObjectiveHandle) -> Self {
        Self {
            n_opt,
            n_inp,
            a_eq: Matrix::zeros(0, n_opt),
            b_mat_eq: Matrix::zeros(0, n_inp),
            b_vec_eq: Vector::zeros(0),
            a_ineq: Matrix::zeros(0, n_opt),
            b_mat_ineq: Matrix::zeros(0, n_inp),
            b_vec_ineq: Vector::zeros(0),
            objective,
        }
    }

    pub fn with_equalities(mut self, a: Matrix, b_mat: Matrix, b_vec: Vector) -> Self {
        self.a_eq = a;
        self.b_mat_eq = b_mat;
        self.b_vec_eq = b_vec;
        self
    }

    pub fn with_inequalities(mut self, a: Matrix, b_mat: Matrix, b_vec: Vector) -> Self {
        self.a_ineq = a;
        self.b_mat_ineq = b_mat;
        self.b_vec_ineq = b_vec;
        self
    }

    pub fn n_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn n_ineq(&self) -> usize {
        self.a_ineq.nrows()
    }

    pub fn equality_residual(&self, u: &Vector, x: &Vector) -> Vector {
        &self.a_eq * u + &self.b_mat_eq * x + &self.b_vec_eq
    }

    /// `A_ineq u + B_ineq x + b_ineq`; feasible rows are `<= 0`.
    pub fn inequality_slack(&self, u: &Vector, x: &Vector) -> Vector {
        &self.a_ineq * u + &self.b_mat_ineq * x + &self.b_vec_ineq
    }

    pub fn check_point(&self, u: &Vector, x: &Vector) -> Result<()> {
        check_len("u", self.n_opt, u.len())?;
        check_len("x", self.n_inp, x.len())
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    DimensionMismatch {
        block: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// `N_eq >= N_opt`: the equalities leave no freedom.
    NotUnderdetermined {
        n_eq: usize,
        n_opt: usize,
    },
    RankDeficient {
        rank: usize,
        n_eq: usize,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DimensionMismatch { block, expected, found } => write!(
                f,
                "{block}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Finding::NotUnderdetermined { n_eq, n_opt } => {
                write!(f, "N_eq = {n_eq} is not below N_opt = {n_opt}")
            }
            Finding::RankDeficient { rank, n_eq } => {
                write!(f, "a_eq has rank {rank} < N_eq = {n_eq}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Numerical rank of `a_eq`, when its shape allowed the check.
    pub rank: Option<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        if let [Finding::RankDeficient { rank, n_eq }] = self.findings.as_slice() {
            return Err(Error::RankDeficient {
                rank: *rank,
                required: *n_eq,
            });
        }
        let msg: Vec<String> = self.findings.iter().map(|f| format!("{f}")).collect();
        Err(Error::InvalidProblem(msg.join("; ")))
    }
}

/// Checks block shapes, under-determinedness and the rank of `a_eq`.
pub fn validate(p: &LinConProblem) -> ValidationReport {
    let mut findings = Vec::new();
    let n_eq = p.a_eq.nrows();
    let n_ineq = p.a_ineq.nrows();
    let mut shape = |block, m: (usize, usize), expected: (usize, usize)| {
        if m != expected {
            findings.push(Finding::DimensionMismatch {
                block,
                expected,
                found: m,
            });
        }
    };
    shape("a_eq", p.a_eq.shape(), (n_eq, p.n_opt));
    shape("b_mat_eq", p.b_mat_eq.shape(), (n_eq, p.n_inp));
    shape("b_vec_eq", (p.b_vec_eq.len(), 1), (n_eq, 1));
    shape("a_ineq", p.a_ineq.shape(), (n_ineq, p.n_opt));
    shape("b_mat_ineq", p.b_mat_ineq.shape(), (n_ineq, p.n_inp));
    shape("b_vec_ineq", (p.b_vec_ineq.len(), 1), (n_ineq, 1));
    if n_eq >= p.n_opt {
        findings.push(Finding::NotUnderdetermined { n_eq, n_opt: p.n_opt });
    }
    let rank = linalg::select_independent_columns(&p.a_eq, PIVOT_TOL).rank;
    if rank < n_eq {
        findings.push(Finding::RankDeficient { rank, n_eq });
    }
    ValidationReport {
        findings,
        rank: Some(rank),
    }
}

/// Per-instance violation: `||max(ineq, 0)||_1 + ||eq residual||_1`.
pub fn instance_violation(p: &LinConProblem, u: &Vector, x: &Vector) -> Result<f64> {
    p.check_point(u, x)?;
    let ineq: f64 = p.inequality_slack(u, x).iter().map(|s| s.max(0.0)).sum();
    let eq = linalg::l1_norm(&p.equality_residual(u, x));
    Ok(ineq + eq)
}

/// Mean per-instance violation over a batch of `(u, x)` pairs.
pub fn feasibility_gap<'a, I>(p: &LinConProblem, pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a Vector, &'a Vector)>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for (u, x) in pairs {
        total += instance_violation(p, u, x)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(total / n as f64)
}

/// `||u - u*||_1 / ||u*||_1` for one instance.
pub fn relative_l1_gap(predicted: &Vector, reference: &Vector) -> Result<f64> {
    check_len("optimality gap", reference.len(), predicted.len())?;
    let denom = linalg::l1_norm(reference);
    if denom == 0.0 {
        return Err(Error::ZeroReference { index: 0 });
    }
    Ok(linalg::l1_norm(&(predicted - reference)) / denom)
}

/// Mean relative l1 distance to the reference optima.
pub fn optimality_gap(predicted: &[Vector], reference: &[Vector]) -> Result<f64> {
    check_len("optimality gap batch", reference.len(), predicted.len())?;
    if predicted.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for (i, (p, r)) in predicted.iter().zip(reference).enumerate() {
        total += relative_l1_gap(p, r).map_err(|e| match e {
            Error::ZeroReference { .. } => Error::ZeroReference { index: i },
            other => other,
        })?;
    }
    Ok(total / predicted.len() as f64)
}

/// Evaluation summary for one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub optimality_gap: f64,
    pub feasibility_gap: f64,
    /// Seconds.
    pub mean_time_per_instance: f64,
}

impl MetricsReport {
    pub fn is_valid(&self) -> bool {
        [self.optimality_gap, self.feasibility_gap, self.mean_time_per_instance]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}
