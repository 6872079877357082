//! Small dense helpers shared by the solvers.

use alloc::vec::Vec;

use crate::{Matrix, Vector};

/// Absolute pivot tolerance used for every rank decision.
pub const PIVOT_TOL: f64 = 1e-10;

/// Columns picked by a column-pivoted Householder QR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSelection {
    /// Original indices of the pivot columns, in pivot order.
    pub selected: Vec<usize>,
    pub rank: usize,
}

/// Greedy column selection by largest residual norm (Businger-Golub pivoting).
///
/// Norms within a relative 1e-12 of each other count as ties, and the
/// smallest original column index wins a tie. Stops once the largest
/// residual column norm is at or below `tol`.
pub fn select_independent_columns(m: &Matrix, tol: f64) -> ColumnSelection {
    let (rows, cols) = m.shape();
    let mut work = m.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best: Option<(usize, f64)> = None;
        for j in k..cols {
            let norm = residual_norm(&work, k, j);
            best = match best {
                None => Some((j, norm)),
                Some((bj, bn)) => {
                    let scale = bn.max(norm).max(1.0);
                    let larger = norm > bn + 1e-12 * scale;
                    let tie_earlier = (norm - bn).abs() <= 1e-12 * scale && perm[j] < perm[bj];
                    if larger || tie_earlier {
                        Some((j, norm))
                    } else {
                        Some((bj, bn))
                    }
                }
            };
        }
        let (j, norm) = match best {
            Some(b) => b,
            None => break,
        };
        if norm <= tol {
            break;
        }
        work.swap_columns(k, j);
        perm.swap(k, j);
        householder_step(&mut work, k, norm);
        rank += 1;
    }
    ColumnSelection {
        selected: perm[..rank].to_vec(),
        rank,
    }
}

fn residual_norm(work: &Matrix, k: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for i in k..work.nrows() {
        s += work[(i, j)] * work[(i, j)];
    }
    libm::sqrt(s)
}

// Reflect rows k.. so that column k becomes (±norm, 0, ..., 0).
fn householder_step(work: &mut Matrix, k: usize, norm: f64) {
    let rows = work.nrows();
    let alpha = if work[(k, k)] >= 0.0 { -norm } else { norm };
    let mut v: Vec<f64> = (k..rows).map(|i| work[(i, k)]).collect();
    v[0] -= alpha;
    let vnorm2: f64 = v.iter().map(|a| a * a).sum();
    if vnorm2 <= f64::MIN_POSITIVE {
        return;
    }
    for j in k..work.ncols() {
        let dot: f64 = (k..rows).map(|i| v[i - k] * work[(i, j)]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            work[(i, j)] -= f * v[i - k];
        }
    }
}

/// Numerical rank with the default pivot tolerance.
pub fn rank(m: &Matrix) -> usize {
    select_independent_columns(m, PIVOT_TOL).rank
}

/// Gathers the listed columns into a new matrix.
pub fn take_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Gathers the listed rows into a new matrix.
pub fn take_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

pub fn take_entries(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_fn(idx.len(), |i, _| v[idx[i]])
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
}

pub fn l1_norm(v: &Vector) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

/// Orthonormal basis (as columns) of `{p : rows p = 0}`.
///
/// Gram-Schmidt with one re-orthogonalisation: the row space is built first,
/// then unit vectors fill the complement.
pub fn null_space_basis(rows: &Matrix) -> Matrix {
    let n = rows.ncols();
    let mut basis: Vec<Vector> = Vec::with_capacity(n);
    let push = |basis: &mut Vec<Vector>, mut v: Vector, tol: f64| -> bool {
        for _ in 0..2 {
            for q in basis.iter() {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / norm);
            true
        } else {
            false
        }
    };
    for r in 0..rows.nrows() {
        let row = rows.row(r).transpose();
        let scale = row.norm();
        if scale > 0.0 {
            push(&mut basis, row / scale, 1e-10);
        }
    }
    let row_space = basis.len();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        push(&mut basis, e, 1e-8);
    }
    let k = basis.len() - row_space;
    Matrix::from_fn(n, k, |i, j| basis[row_space + j][i])
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Number of k-subsets of an n-set, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographic k-combinations of 0..n.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
