//! Random instance generators shared by tests, benches and the self-test.

use alloc::sync::Arc;

use rand::Rng;

use crate::gauge::ShiftedPolytope;
use crate::problem::{Builtin, LinConProblem, ObjectiveHandle};
use crate::{Matrix, Vector};

/// A bounded polytope in `n` dimensions with the origin strictly inside:
/// an axis box of random half-widths plus up to `n + 2` random cuts.
pub fn random_shifted_polytope<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ShiftedPolytope {
    let extra = rng.random_range(0..=n + 2);
    let (f, g) = random_rows(rng, n, extra);
    let u_o = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    ShiftedPolytope::new(f, g, u_o).expect("offsets are positive")
}

fn random_rows<R: Rng + ?Sized>(rng: &mut R, n: usize, extra: usize) -> (Matrix, Vector) {
    let m = 2 * n + extra;
    let mut f = Matrix::zeros(m, n);
    let mut g = Vector::zeros(m);
    for i in 0..n {
        f[(i, i)] = 1.0;
        f[(n + i, i)] = -1.0;
        g[i] = rng.random_range(0.2..3.0);
        g[n + i] = rng.random_range(0.2..3.0);
    }
    for j in 2 * n..m {
        for i in 0..n {
            f[(j, i)] = rng.random_range(-1.0..1.0);
        }
        g[j] = rng.random_range(0.1..2.0);
    }
    (f, g)
}

/// A uniformly random point of the infinity-norm ball; with `boundary`, one
/// coordinate is pushed to +-1.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, n: usize, boundary: bool) -> Vector {
    let mut v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    if boundary && n > 0 {
        let k = rng.random_range(0..n);
        v[k] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    v
}

/// Inequality-only problem `{u : A u + b <= 0}` in `n <= 4` dimensions with at
/// most `max_rows` rows, bounded and with a nonempty interior around a random
/// centre. No inputs.
pub fn random_polytope_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, max_rows: usize) -> LinConProblem {
    let extra = max_rows.saturating_sub(2 * n);
    let extra = if extra == 0 { 0 } else { rng.random_range(0..=extra) };
    let (f, g) = random_rows(rng, n, extra);
    let centre = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    // F (u - c) <= g  <=>  F u - (F c + g) <= 0
    let b = -(&f * &centre + g);
    let objective: ObjectiveHandle = Arc::new(Builtin::SumSquares);
    LinConProblem::new(n, 0, objective).with_inequalities(f, Matrix::zeros(b.len(), 0), b)
}
