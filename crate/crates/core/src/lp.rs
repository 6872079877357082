//! Dense two-phase simplex.
//!
//! Problems are stated as `min c'x` subject to rows `a_i x {<=, =, >=} b_i`
//! and per-variable bounds that may be infinite. Internally every variable is
//! shifted, reflected or split into non-negative parts, slacks and
//! artificials are appended, and a dense tableau is pivoted with Dantzig
//! pricing. After [`BLAND_AFTER`] degenerate pivots the solver switches to
//! Bland's rule, which cannot cycle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::problem::check_len;
use crate::{Matrix, Vector};

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const PIVOT_TOL: f64 = 1e-10;
/// Entering threshold on reduced costs.
const PRICING_TOL: f64 = 1e-9;
/// Degenerate pivots tolerated before switching to Bland's rule.
pub const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// `min c'x  s.t.  a x (senses) b,  lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLP {
    pub cost: Vector,
    pub a: Matrix,
    pub b: Vector,
    pub senses: Vec<RowSense>,
    pub bounds: Vec<(f64, f64)>,
}

impl StandardFormLP {
    /// `a x <= b`, `x >= 0`.
    pub fn new(cost: Vector, a: Matrix, b: Vector) -> Self {
        let m = a.nrows();
        let n = cost.len();
        Self {
            cost,
            a,
            b,
            senses: vec![RowSense::Le; m],
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn with_senses(mut self, senses: Vec<RowSense>) -> Self {
        self.senses = senses;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = bounds;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.cost.len();
        let m = self.a.nrows();
        check_len("lp columns", n, self.a.ncols())?;
        check_len("lp rhs", m, self.b.len())?;
        check_len("lp senses", m, self.senses.len())?;
        check_len("lp bounds", n, self.bounds.len())?;
        for &(lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidConfig("bad variable bound".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Values of the original variables (zeros unless optimal).
    pub solution: Vector,
    pub objective: f64,
    /// Basic columns of the internal standard form, by row.
    pub basis: Vec<usize>,
    /// Row duals of the internal standard form (original row orientation;
    /// bound rows follow the constraint rows).
    pub duals: Vector,
    /// `b'y` reconstructed from the final basis; equals `objective` at optimum.
    pub dual_objective: f64,
    /// Smallest reduced cost of the final tableau.
    pub min_reduced_cost: f64,
    pub pivots: usize,
}

// How an original variable is expressed through internal non-negative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, offset: f64 },
    Reflect { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

struct Internal {
    a: Matrix,
    b: Vector,
    cost: Vector,
    cost_offset: f64,
    n_total: usize,
    artificial_start: usize,
    row_sign: Vec<f64>,
    maps: Vec<VarMap>,
    initial_basis: Vec<usize>,
}

fn build_internal(lp: &StandardFormLP) -> Internal {
    let n = lp.cost.len();
    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift {
                col: n_struct,
                offset: lo,
            });
            if hi.is_finite() {
                bound_rows.push((n_struct, hi - lo));
            }
            n_struct += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Reflect {
                col: n_struct,
                offset: hi,
            });
            n_struct += 1;
        } else {
            maps.push(VarMap::Split {
                pos: n_struct,
                neg: n_struct + 1,
            });
            n_struct += 2;
        }
    }
    let m_orig = lp.a.nrows();
    let m = m_orig + bound_rows.len();
    let mut senses: Vec<RowSense> = lp.senses.clone();
    senses.extend(core::iter::repeat_n(RowSense::Le, bound_rows.len()));
    let n_slack = senses.iter().filter(|s| **s != RowSense::Eq).count();
    let slack_start = n_struct;
    let artificial_start = slack_start + n_slack;

    let mut a = Matrix::zeros(m, artificial_start + m);
    let mut b = Vector::zeros(m);
    let mut cost = Vector::zeros(artificial_start + m);
    let mut cost_offset = 0.0;
    for (j, map) in maps.iter().enumerate() {
        let c = lp.cost[j];
        match *map {
            VarMap::Shift { col, offset } => {
                cost[col] += c;
                cost_offset += c * offset;
            }
            VarMap::Reflect { col, offset } => {
                cost[col] -= c;
                cost_offset += c * offset;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }
    for i in 0..m_orig {
        let mut rhs = lp.b[i];
        for (j, map) in maps.iter().enumerate() {
            let aij = lp.a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shift { col, offset } => {
                    a[(i, col)] += aij;
                    rhs -= aij * offset;
                }
                VarMap::Reflect { col, offset } => {
                    a[(i, col)] -= aij;
                    rhs -= aij * offset;
                }
                VarMap::Split { pos, neg } => {
                    a[(i, pos)] += aij;
                    a[(i, neg)] -= aij;
                }
            }
        }
        b[i] = rhs;
    }
    for (k, &(col, width)) in bound_rows.iter().enumerate() {
        a[(m_orig + k, col)] = 1.0;
        b[m_orig + k] = width;
    }
    let mut slack_of_row = vec![None; m];
    let mut next = slack_start;
    for (i, s) in senses.iter().enumerate() {
        match s {
            RowSense::Le => {
                a[(i, next)] = 1.0;
                slack_of_row[i] = Some(next);
                next += 1;
            }
            RowSense::Ge => {
                a[(i, next)] = -1.0;
                slack_of_row[i] = Some(next);
                next += 1;
            }
            RowSense::Eq => {}
        }
    }
    let mut row_sign = vec![1.0; m];
    for i in 0..m {
        if b[i] < 0.0 {
            row_sign[i] = -1.0;
            b[i] = -b[i];
            for j in 0..artificial_start {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }
    // A slack with coefficient +1 after the sign fix can start basic;
    // every other row gets its artificial.
    let mut initial_basis = Vec::with_capacity(m);
    for i in 0..m {
        a[(i, artificial_start + i)] = 1.0;
        match slack_of_row[i] {
            Some(s) if a[(i, s)] > 0.0 => initial_basis.push(s),
            _ => initial_basis.push(artificial_start + i),
        }
    }
    Internal {
        a,
        b,
        cost,
        cost_offset,
        n_total: artificial_start + m,
        artificial_start,
        row_sign,
        maps,
        initial_basis,
    }
}

struct Tableau {
    t: Matrix,
    rhs: Vector,
    basis: Vec<usize>,
    reduced: Vector,
    objective: f64,
    rows: Vec<usize>,
    pivots: usize,
    degenerate: usize,
    bland_pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn set_cost(&mut self, cost: &Vector) {
        let mut reduced = cost.clone();
        let mut obj = 0.0;
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                reduced -= self.t.row(r).transpose() * cb;
                obj += cb * self.rhs[r];
            }
        }
        self.reduced = reduced;
        self.objective = obj;
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.t[(r, col)];
        let mut prow = self.t.row(r).clone_owned();
        prow /= p;
        let prhs = self.rhs[r] / p;
        for i in 0..self.t.nrows() {
            if i == r {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                let mut row = self.t.row_mut(i);
                row -= &prow * f;
                self.rhs[i] -= f * prhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-13 {
                    self.rhs[i] = 0.0;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for j in 0..self.reduced.len() {
                self.reduced[j] -= f * prow[j];
            }
            self.objective += f * prhs;
            self.reduced[col] = 0.0;
        }
        self.t.set_row(r, &prow);
        self.t[(r, col)] = 1.0;
        self.rhs[r] = prhs;
        self.basis[r] = col;
        self.pivots += 1;
    }

    fn run(&mut self, allowed: usize) -> Result<Outcome> {
        let m = self.t.nrows();
        let bland_cap = 10 * (m + allowed);
        let hard_cap = 50_000 + 100 * (m + allowed);
        loop {
            let bland = self.degenerate >= BLAND_AFTER;
            if bland {
                if self.bland_pivots > bland_cap {
                    return Err(Error::Numerical(
                        "simplex iteration cap reached under Bland's rule".into(),
                    ));
                }
            } else if self.pivots > hard_cap {
                return Err(Error::Numerical("simplex iteration cap reached".into()));
            }
            let entering = if bland {
                (0..allowed).find(|&j| self.reduced[j] < -PRICING_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..allowed {
                    let d = self.reduced[j];
                    if d < -PRICING_TOL && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.t[(r, col)];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[r] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                        let better = if tie {
                            if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                a > self.t[(br, col)]
                            }
                        } else {
                            ratio < bratio
                        };
                        if better {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if ratio <= 1e-12 {
                self.degenerate += 1;
            }
            if bland {
                self.bland_pivots += 1;
            }
            self.pivot(r, col);
        }
    }

    fn drop_row(&mut self, r: usize) {
        self.t = self.t.clone().remove_row(r);
        self.rhs = self.rhs.clone().remove_row(r);
        self.basis.remove(r);
        self.rows.remove(r);
    }
}

/// Solves the LP. Infeasible and unbounded problems are reported through
/// [`LpResult::status`]; only numerical trouble is an error.
pub fn solve_lp(lp: &StandardFormLP) -> Result<LpResult> {
    lp.check()?;
    let int = build_internal(lp);
    let m = int.a.nrows();
    let art = int.artificial_start;
    let mut tab = Tableau {
        t: int.a.clone(),
        rhs: int.b.clone(),
        basis: int.initial_basis.clone(),
        reduced: Vector::zeros(int.n_total),
        objective: 0.0,
        rows: (0..m).collect(),
        pivots: 0,
        degenerate: 0,
        bland_pivots: 0,
    };

    // Phase I: minimise the sum of artificials.
    let mut phase1_cost = Vector::zeros(int.n_total);
    for j in art..int.n_total {
        phase1_cost[j] = 1.0;
    }
    tab.set_cost(&phase1_cost);
    tab.run(int.n_total)?;
    let scale = 1.0 + int.b.amax();
    let n_orig = lp.cost.len();
    let empty = |status| LpResult {
        status,
        solution: Vector::zeros(n_orig),
        objective: 0.0,
        basis: Vec::new(),
        duals: Vector::zeros(m),
        dual_objective: 0.0,
        min_reduced_cost: 0.0,
        pivots: 0,
    };
    if tab.objective > FEASIBILITY_TOL * scale {
        let mut res = empty(LpStatus::Infeasible);
        res.pivots = tab.pivots;
        return Ok(res);
    }
    // Drive zero-level artificials out of the basis, dropping redundant rows.
    let mut r = 0;
    while r < tab.basis.len() {
        if tab.basis[r] >= art {
            let col = (0..art)
                .filter(|&j| tab.t[(r, j)].abs() > PIVOT_TOL)
                .max_by(|&a, &b| tab.t[(r, a)].abs().total_cmp(&tab.t[(r, b)].abs()));
            match col {
                Some(j) => {
                    tab.pivot(r, j);
                    r += 1;
                }
                None => tab.drop_row(r),
            }
        } else {
            r += 1;
        }
    }

    // Phase II on structural and slack columns only.
    tab.degenerate = 0;
    tab.bland_pivots = 0;
    tab.set_cost(&int.cost);
    let outcome = tab.run(art)?;
    if let Outcome::Unbounded = outcome {
        let mut res = empty(LpStatus::Unbounded);
        res.pivots = tab.pivots;
        return Ok(res);
    }

    let mut y = Vector::zeros(int.n_total);
    for (r, &bj) in tab.basis.iter().enumerate() {
        y[bj] = tab.rhs[r].max(0.0);
    }
    let solution = Vector::from_iterator(
        n_orig,
        int.maps.iter().map(|map| match *map {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Reflect { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        }),
    );
    let objective = lp.cost.dot(&solution);

    // Duals from B' w = c_B on the kept rows, computed from the original data.
    let k = tab.rows.len();
    let bmat = Matrix::from_fn(k, k, |i, j| int.a[(tab.rows[i], tab.basis[j])]);
    let cb = Vector::from_fn(k, |j, _| int.cost[tab.basis[j]]);
    let w = if k == 0 {
        Vector::zeros(0)
    } else {
        bmat.transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::Numerical("singular final basis".into()))?
    };
    let mut duals = Vector::zeros(m);
    let mut dual_objective = int.cost_offset;
    for (i, &row) in tab.rows.iter().enumerate() {
        duals[row] = w[i] * int.row_sign[row];
        dual_objective += w[i] * int.b[row];
    }
    let min_reduced_cost = (0..art).map(|j| tab.reduced[j]).fold(0.0_f64, f64::min);
    Ok(LpResult {
        status: LpStatus::Optimal,
        solution,
        objective,
        basis: tab.basis.clone(),
        duals,
        dual_objective,
        min_reduced_cost,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Combinations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    #[test]
    fn one_dimensional_maximum() {
        let lp = StandardFormLP::new(dvec(&[-1.0]), Matrix::from_row_slice(1, 1, &[1.0]), dvec(&[1.0]));
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.solution[0] - 1.0).abs() < 1e-12);
        assert!((r.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let lp = StandardFormLP::new(dvec(&[1.0]), Matrix::from_row_slice(1, 1, &[1.0]), dvec(&[-1.0]));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn simplex_triangle_vertex() {
        // vertices (0,0), (1,0), (0,1): objective values 0, -1, -1
        let lp = StandardFormLP::new(
            dvec(&[-1.0, -1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            dvec(&[1.0]),
        );
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective + 1.0).abs() < 1e-12);
        assert!((r.solution.sum() - 1.0).abs() < 1e-12);
        assert!(r.solution.iter().any(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn unbounded_is_reported() {
        let lp = StandardFormLP::new(
            dvec(&[-1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[-1.0, 1.0]),
            dvec(&[1.0]),
        );
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_equalities_and_ge_rows() {
        // min x + 2y  s.t. x + y = 1, x - y >= -3, -5 <= x <= 4, y free.
        // Substituting y = 1 - x gives min 2 - x, so x sits at its upper bound.
        let lp = StandardFormLP::new(
            dvec(&[1.0, 2.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]),
            dvec(&[1.0, -3.0]),
        )
        .with_senses(vec![RowSense::Eq, RowSense::Ge])
        .with_bounds(vec![(-5.0, 4.0), (f64::NEG_INFINITY, f64::INFINITY)]);
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.solution[0] - 4.0).abs() < 1e-10);
        assert!((r.solution[1] + 3.0).abs() < 1e-10);
        assert!((r.objective + 2.0).abs() < 1e-10);
        assert!((r.objective - r.dual_objective).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let lp = StandardFormLP::new(
            dvec(&[1.0, 1.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            dvec(&[1.0, 2.0]),
        )
        .with_senses(vec![RowSense::Eq, RowSense::Eq]);
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example for the textbook pivot rule.
        let lp = StandardFormLP::new(
            dvec(&[-0.75, 150.0, -0.02, 6.0]),
            Matrix::from_row_slice(
                3,
                4,
                &[0.25, -60.0, -0.04, 9.0, 0.5, -90.0, -0.02, 3.0, 0.0, 0.0, 1.0, 0.0],
            ),
            dvec(&[0.0, 0.0, 1.0]),
        );
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9);
    }

    // Brute force over every choice of n tight constraints among the rows and
    // the sign constraints x >= 0.
    fn vertex_enumeration(c: &Vector, a: &Matrix, b: &Vector) -> Option<f64> {
        let (m, n) = a.shape();
        let mut all = Matrix::zeros(m + n, n);
        all.rows_mut(0, m).copy_from(a);
        let mut rhs = Vector::zeros(m + n);
        rhs.rows_mut(0, m).copy_from(b);
        for i in 0..n {
            all[(m + i, i)] = -1.0;
        }
        let mut best: Option<f64> = None;
        for set in Combinations::new(m + n, n) {
            let sub = Matrix::from_fn(n, n, |i, j| all[(set[i], j)]);
            let sr = Vector::from_fn(n, |i, _| rhs[set[i]]);
            let lu = sub.full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            let Some(x) = lu.solve(&sr) else { continue };
            if (&all * &x - &rhs).iter().all(|&s| s <= 1e-9) {
                let v = c.dot(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    #[test]
    fn matches_vertex_enumeration_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=6);
            let mut a = Matrix::from_fn(m + n, n, |_, _| rng.random_range(-3..=3) as f64);
            let mut b = Vector::from_fn(m + n, |_, _| rng.random_range(-2.0..6.0));
            for i in 0..n {
                // box rows keep everything bounded
                a.row_mut(m + i).fill(0.0);
                a[(m + i, i)] = 1.0;
                b[m + i] = 5.0;
            }
            let c = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let r = solve_lp(&StandardFormLP::new(c.clone(), a.clone(), b.clone())).unwrap();
            match vertex_enumeration(&c, &a, &b) {
                Some(best) => {
                    assert_eq!(r.status, LpStatus::Optimal);
                    assert!((r.objective - best).abs() < 1e-7, "{} vs {}", r.objective, best);
                    assert!((r.objective - r.dual_objective).abs() < 1e-7);
                    assert!(r.min_reduced_cost >= -1e-8);
                    assert!((&a * &r.solution - &b).iter().all(|&s| s <= 1e-8));
                    assert!(r.solution.iter().all(|&s| s >= -1e-8));
                }
                None => assert_eq!(r.status, LpStatus::Infeasible),
            }
        }
    }
}
