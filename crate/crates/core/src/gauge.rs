//! Minkowski gauges and the gauge map from the infinity-norm unit ball onto a
//! polytope.
//!
//! For a polytope `C = {c : F c <= g}` with `g > 0` (origin strictly inside),
//! the gauge is `phi_C(c) = max_j F_j c / g_j`. The unit ball has gauge
//! `||c||_inf`. The gauge map
//!
//! ```text
//!     T(v) = (||v||_inf / phi_C(v)) v + u_o
//! ```
//!
//! carries the ball onto the shifted polytope, boundary to boundary, since
//! `phi_C(T(v) - u_o) = ||v||_inf`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{argmax, inf_norm};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::{Matrix, Vector};

/// Offsets at or below this are treated as touching the boundary.
pub const INTERIOR_TOL: f64 = 1e-12;
/// Slack allowed on `||v||_inf <= 1` and on feasibility checks.
pub const BALL_TOL: f64 = 1e-9;
/// Below this infinity norm a vector is treated as the origin.
pub const ORIGIN_TOL: f64 = 1e-12;

/// `{w : F w <= g}` with `g > 0`, plus the shift `u_o` back to the original set.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPolytope {
    pub f_rows: Matrix,
    pub g_offsets: Vector,
    pub u_o: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeEvaluation {
    pub value: f64,
    /// Row (or coordinate, for the ball) attaining the max; lowest index on ties.
    pub active_row: usize,
}

/// Body whose gauge is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Body<'a> {
    UnitBall,
    Polytope(&'a ShiftedPolytope),
}

/// Gauge of the infinity-norm unit ball.
pub fn linf_gauge(c: &Vector) -> GaugeEvaluation {
    match argmax(c.iter().map(|a| a.abs())) {
        Some((i, v)) => GaugeEvaluation {
            value: v,
            active_row: i,
        },
        None => GaugeEvaluation {
            value: 0.0,
            active_row: 0,
        },
    }
}

pub fn minkowski_gauge(body: Body<'_>, c: &Vector) -> GaugeEvaluation {
    match body {
        Body::UnitBall => linf_gauge(c),
        Body::Polytope(p) => p.gauge(c),
    }
}

/// Shifts the reduced feasible set at `x` by the interior point `u_o`.
pub fn build_shifted(red: &ReducedProblem, x: &Vector, u_o: &Vector) -> Result<ShiftedPolytope> {
    check_len("u_o", red.n_indep(), u_o.len())?;
    check_len("x", red.n_inp(), x.len())?;
    let g = -red.slack(u_o, x);
    ShiftedPolytope::new(red.a_red.clone(), g, u_o.clone())
}

impl ShiftedPolytope {
    pub fn new(f_rows: Matrix, g_offsets: Vector, u_o: Vector) -> Result<Self> {
        check_len("polytope offsets", f_rows.nrows(), g_offsets.len())?;
        check_len("polytope shift", f_rows.ncols(), u_o.len())?;
        for (row, &offset) in g_offsets.iter().enumerate() {
            if !(offset > INTERIOR_TOL) {
                return Err(Error::NotInterior { row, offset });
            }
        }
        Ok(Self { f_rows, g_offsets, u_o })
    }

    pub fn dim(&self) -> usize {
        self.f_rows.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.f_rows.nrows()
    }

    /// `max_j F_j c / g_j`, clamped below at zero.
    pub fn gauge(&self, c: &Vector) -> GaugeEvaluation {
        let fc = &self.f_rows * c;
        match argmax(fc.iter().zip(self.g_offsets.iter()).map(|(a, g)| a / g)) {
            Some((j, v)) => GaugeEvaluation {
                value: v.max(0.0),
                active_row: j,
            },
            None => GaugeEvaluation {
                value: 0.0,
                active_row: 0,
            },
        }
    }

    fn check_ball(&self, v: &Vector) -> Result<f64> {
        check_len("ball point", self.dim(), v.len())?;
        let norm = inf_norm(v);
        if !(norm <= 1.0 + BALL_TOL) {
            return Err(Error::OutsideBall { norm });
        }
        Ok(norm)
    }

    /// Gauge map from the unit ball into the original (unshifted) polytope.
    ///
    /// The origin maps to `u_o`.
    pub fn map(&self, v: &Vector) -> Result<Vector> {
        let norm = self.check_ball(v)?;
        if norm < ORIGIN_TOL {
            return Ok(self.u_o.clone());
        }
        let phi = self.gauge(v).value;
        if phi <= 0.0 {
            return Err(Error::Unbounded);
        }
        Ok(v * (norm / phi) + &self.u_o)
    }

    /// Inverse gauge map: a point of the polytope back to the unit ball.
    pub fn inverse(&self, u: &Vector) -> Result<Vector> {
        check_len("polytope point", self.dim(), u.len())?;
        let w = u - &self.u_o;
        let eval = self.gauge(&w);
        if eval.value > 1.0 + BALL_TOL {
            return Err(Error::OutsidePolytope {
                row: eval.active_row,
                violation: (eval.value - 1.0) * self.g_offsets[eval.active_row],
            });
        }
        let norm = inf_norm(&w);
        if norm < ORIGIN_TOL {
            return Ok(Vector::zeros(self.dim()));
        }
        Ok(w * (eval.value / norm))
    }

    /// Scale `s` with `s B` the largest scaled unit ball inside the polytope:
    /// `min_j g_j / ||F_j||_1`. This is the smallest value the map's radial
    /// ratio takes and is used as the Jacobian at the origin.
    pub fn zero_direction_scale(&self) -> f64 {
        (0..self.n_rows())
            .map(|j| {
                let l1: f64 = self.f_rows.row(j).iter().map(|a| a.abs()).sum();
                if l1 > 0.0 {
                    self.g_offsets[j] / l1
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    // Radial ratio r(v) = ||v||_inf / phi(v) and its gradient on the active pieces.
    fn ratio_and_gradient(&self, v: &Vector) -> Result<(f64, Vector)> {
        let ball = linf_gauge(v);
        let k = ball.active_row;
        let sign = if v[k] >= 0.0 { 1.0 } else { -1.0 };
        let eval = self.gauge(v);
        let phi = eval.value;
        if phi <= 0.0 {
            return Err(Error::Unbounded);
        }
        let j = eval.active_row;
        let g_j = self.g_offsets[j];
        let mut grad = Vector::from_iterator(
            self.dim(),
            self.f_rows.row(j).iter().map(|&f| -ball.value * f / (g_j * phi * phi)),
        );
        grad[k] += sign / phi;
        Ok((ball.value / phi, grad))
    }

    /// Jacobian of [`Self::map`] at `v`, taken on the active pieces of both gauges.
    ///
    /// At the origin the map is not differentiable; the returned matrix is
    /// `zero_direction_scale() * I`.
    pub fn jacobian(&self, v: &Vector) -> Result<Matrix> {
        let norm = self.check_ball(v)?;
        let n = self.dim();
        if norm < ORIGIN_TOL {
            return Ok(Matrix::identity(n, n) * self.zero_direction_scale());
        }
        let (r, grad) = self.ratio_and_gradient(v)?;
        Ok(Matrix::identity(n, n) * r + v * grad.transpose())
    }

    /// `J(v)' y` without forming `J`.
    pub fn vjp(&self, v: &Vector, y: &Vector) -> Result<Vector> {
        let norm = self.check_ball(v)?;
        check_len("upstream gradient", self.dim(), y.len())?;
        if norm < ORIGIN_TOL {
            return Ok(y * self.zero_direction_scale());
        }
        let (r, grad) = self.ratio_and_gradient(v)?;
        Ok(y * r + grad * v.dot(y))
    }

    /// Largest `F w - g` over rows for a point of the original space.
    pub fn max_violation(&self, u: &Vector) -> f64 {
        let fw = &self.f_rows * (u - &self.u_o);
        (fw - &self.g_offsets).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rows whose slack is within `tol` of zero at `u`.
    pub fn tight_rows(&self, u: &Vector, tol: f64) -> Vec<usize> {
        let fw = &self.f_rows * (u - &self.u_o);
        (0..self.n_rows())
            .filter(|&j| (fw[j] - self.g_offsets[j]).abs() <= tol * self.g_offsets[j].max(1.0))
            .collect()
    }
}

/// True when neither gauge's argmax is within `gap` (relative) of a tie at `v`,
/// i.e. the map is smooth in a neighbourhood.
pub fn is_untied(poly: &ShiftedPolytope, v: &Vector, gap: f64) -> bool {
    fn second_gap(values: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &a in values {
            if a > best {
                second = best;
                best = a;
            } else if a > second {
                second = a;
            }
        }
        best - second
    }
    let abs: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    let fv = &poly.f_rows * v;
    let ratios: Vec<f64> = fv.iter().zip(poly.g_offsets.iter()).map(|(a, g)| a / g).collect();
    let scale_b = inf_norm(v).max(f64::MIN_POSITIVE);
    let scale_s = poly.gauge(v).value.max(f64::MIN_POSITIVE);
    (abs.len() < 2 || second_gap(&abs) > gap * scale_b) && (ratios.len() < 2 || second_gap(&ratios) > gap * scale_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Builtin, LinConProblem};
    use crate::reduction::reduce;
    use crate::testkit;
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    fn interval(lo: f64, hi: f64) -> ReducedProblem {
        let p = LinConProblem::new(1, 0, Arc::new(Builtin::SumSquares)).with_inequalities(
            Matrix::from_row_slice(2, 1, &[-1.0, 1.0]),
            Matrix::zeros(2, 0),
            dvec(&[lo, -hi]),
        );
        reduce(Arc::new(p)).unwrap()
    }

    fn triangle() -> ShiftedPolytope {
        // -u1 <= 0, -u2 <= 0, u1 + u2 <= 1, shifted by (1/3, 1/3)
        let p = LinConProblem::new(2, 0, Arc::new(Builtin::SumSquares)).with_inequalities(
            Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            Matrix::zeros(3, 0),
            dvec(&[0.0, 0.0, -1.0]),
        );
        let red = reduce(Arc::new(p)).unwrap();
        build_shifted(&red, &Vector::zeros(0), &dvec(&[1.0 / 3.0, 1.0 / 3.0])).unwrap()
    }

    fn scaled_box(n: usize, half_width: f64) -> ShiftedPolytope {
        let mut f = Matrix::zeros(2 * n, n);
        for i in 0..n {
            f[(i, i)] = 1.0;
            f[(n + i, i)] = -1.0;
        }
        ShiftedPolytope::new(f, Vector::from_element(2 * n, half_width), Vector::zeros(n)).unwrap()
    }

    #[test]
    fn build_shifted_offsets() {
        let p = build_shifted(&interval(-1.0, 1.0), &Vector::zeros(0), &dvec(&[0.0])).unwrap();
        assert_eq!(p.g_offsets, dvec(&[1.0, 1.0]));
        let p = build_shifted(&interval(0.0, 2.0), &Vector::zeros(0), &dvec(&[0.5])).unwrap();
        assert_eq!(p.g_offsets, dvec(&[0.5, 1.5]));
        let err = build_shifted(&interval(0.0, 2.0), &Vector::zeros(0), &dvec(&[2.0])).unwrap_err();
        assert_eq!(err, Error::NotInterior { row: 1, offset: 0.0 });
    }

    #[test]
    fn gauge_examples() {
        let g = minkowski_gauge(Body::UnitBall, &dvec(&[0.5, -0.25]));
        assert_eq!(g.value, 0.5);
        assert_eq!(g.active_row, 0);
        let tri = triangle();
        for j in 0..3 {
            assert!((tri.g_offsets[j] - 1.0 / 3.0).abs() < 1e-15);
        }
        let g = minkowski_gauge(Body::Polytope(&tri), &dvec(&[1.0 / 6.0, 1.0 / 6.0]));
        assert!((g.value - 1.0).abs() < 1e-14);
        assert_eq!(g.active_row, 2);
        assert_eq!(tri.gauge(&dvec(&[0.0, 0.0])).value, 0.0);
    }

    #[test]
    fn gauge_map_examples() {
        let tri = triangle();
        assert_eq!(tri.map(&dvec(&[0.0, 0.0])).unwrap(), tri.u_o);
        let bx = scaled_box(2, 2.0);
        let out = bx.map(&dvec(&[0.5, 0.0])).unwrap();
        assert!((out - dvec(&[1.0, 0.0])).amax() < 1e-15);
        assert!(matches!(bx.map(&dvec(&[1.1, 0.0])), Err(Error::OutsideBall { .. })));
    }

    #[test]
    fn boundary_maps_to_boundary() {
        let tri = triangle();
        for v in [dvec(&[1.0, 0.3]), dvec(&[-0.2, -1.0]), dvec(&[1.0, 1.0])] {
            let u = tri.map(&v).unwrap();
            assert!(tri.max_violation(&u).abs() < 1e-9, "{u}");
            let back = tri.inverse(&u).unwrap();
            assert!((inf_norm(&back) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_of_center_and_outside() {
        let tri = triangle();
        assert_eq!(tri.inverse(&tri.u_o).unwrap(), dvec(&[0.0, 0.0]));
        assert!(matches!(
            tri.inverse(&dvec(&[1.0, 1.0])),
            Err(Error::OutsidePolytope { row: 2, .. })
        ));
    }

    #[test]
    fn jacobian_of_identity_and_scaled_ball() {
        let unit = scaled_box(3, 1.0);
        let v = dvec(&[0.3, -0.7, 0.1]);
        assert!((unit.jacobian(&v).unwrap() - Matrix::identity(3, 3)).amax() < 1e-14);
        let twice = scaled_box(3, 2.0);
        assert!((twice.jacobian(&v).unwrap() - Matrix::identity(3, 3) * 2.0).amax() < 1e-14);
        assert!((twice.jacobian(&Vector::zeros(3)).unwrap() - Matrix::identity(3, 3) * 2.0).amax() < 1e-14);
    }

    #[test]
    fn unbounded_direction_is_an_error() {
        // half-line u <= 1
        let p = ShiftedPolytope::new(Matrix::from_row_slice(1, 1, &[1.0]), dvec(&[1.0]), dvec(&[0.0])).unwrap();
        assert_eq!(p.map(&dvec(&[-0.5])), Err(Error::Unbounded));
        assert!((p.map(&dvec(&[0.5])).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    fn fd_jacobian(poly: &ShiftedPolytope, v: &Vector) -> Matrix {
        let n = v.len();
        let h = 1e-7;
        let mut j = Matrix::zeros(n, n);
        for c in 0..n {
            let mut up = v.clone();
            up[c] += h;
            let mut dn = v.clone();
            dn[c] -= h;
            let col = (poly.map(&up).unwrap() - poly.map(&dn).unwrap()) / (2.0 * h);
            j.set_column(c, &col);
        }
        j
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn map_output_is_feasible(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = testkit::random_shifted_polytope(&mut rng, 1 + (seed % 4) as usize);
            let v = testkit::random_ball_point(&mut rng, poly.dim(), seed % 3 == 0);
            let u = poly.map(&v).unwrap();
            prop_assert!(poly.max_violation(&u) <= 1e-9);
        }

        #[test]
        fn inverse_undoes_map(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = testkit::random_shifted_polytope(&mut rng, 1 + (seed % 4) as usize);
            let v = testkit::random_ball_point(&mut rng, poly.dim(), seed % 2 == 0);
            prop_assume!(inf_norm(&v) > ORIGIN_TOL);
            let back = poly.inverse(&poly.map(&v).unwrap()).unwrap();
            prop_assert!((back - &v).amax() <= 1e-9);
        }

        #[test]
        fn map_is_positively_homogeneous(seed in any::<u64>(), alpha in 0.01f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = testkit::random_shifted_polytope(&mut rng, 1 + (seed % 4) as usize);
            let v = testkit::random_ball_point(&mut rng, poly.dim(), false);
            prop_assume!(is_untied(&poly, &v, 1e-6));
            let lhs = poly.map(&(&v * alpha)).unwrap() - &poly.u_o;
            let rhs = (poly.map(&v).unwrap() - &poly.u_o) * alpha;
            prop_assert!((lhs - rhs).amax() <= 1e-9 * (1.0 + inf_norm(&poly.u_o)));
        }

        #[test]
        fn jacobian_matches_central_differences(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = testkit::random_shifted_polytope(&mut rng, 1 + (seed % 4) as usize);
            let v = testkit::random_ball_point(&mut rng, poly.dim(), false) * 0.95;
            prop_assume!(is_untied(&poly, &v, 1e-4));
            let j = poly.jacobian(&v).unwrap();
            let fd = fd_jacobian(&poly, &v);
            let scale = fd.amax().max(1.0);
            prop_assert!((&j - &fd).amax() <= 1e-5 * scale, "{} vs {}", j, fd);
            let y = Vector::from_fn(poly.dim(), |_, _| rng.random_range(-1.0..1.0));
            prop_assert!((poly.vjp(&v, &y).unwrap() - j.tr_mul(&y)).amax() <= 1e-12 * scale);
        }
    }
}
