use alloc::vec::Vec;

use crate::error::Result;
use crate::gauge::{build_shifted, ShiftedPolytope};
use crate::interior::DirectionModel;
use crate::neural::mlp::{MlpModel, MlpTrace};
use crate::problem::check_len;
use crate::reduction::ReducedProblem;
use crate::Vector;

/// Network input `[x; u_o]`.
pub fn network_input(x: &Vector, u_o: &Vector) -> Vector {
    let mut v = Vec::with_capacity(x.len() + u_o.len());
    v.extend_from_slice(x.as_slice());
    v.extend_from_slice(u_o.as_slice());
    Vector::from_vec(v)
}

impl DirectionModel for MlpModel {
    fn direction(&self, x: &Vector, u_o: &Vector) -> Result<Vector> {
        self.forward(&network_input(x, u_o))
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub mlp: MlpTrace,
    pub polytope: ShiftedPolytope,
    pub u_indep: Vector,
}

impl PipelineTrace {
    pub fn direction(&self) -> &Vector {
        self.mlp.output()
    }
}

fn check_model(model: &MlpModel, red: &ReducedProblem) -> Result<()> {
    check_len("network input", red.n_inp() + red.n_indep(), model.n_in())?;
    check_len("network output", red.n_indep(), model.n_out())
}

/// Network, gauge map onto the reduced set at `x`, then lift to the full vector.
pub fn pipeline_forward(
    model: &MlpModel,
    red: &ReducedProblem,
    x: &Vector,
    u_o: &Vector,
) -> Result<(Vector, PipelineTrace)> {
    check_model(model, red)?;
    let polytope = build_shifted(red, x, u_o)?;
    let mlp = model.forward_trace(&network_input(x, u_o))?;
    let u_indep = polytope.map(mlp.output())?;
    let full = red.lift(&u_indep, x)?;
    Ok((full, PipelineTrace { mlp, polytope, u_indep }))
}

/// Inference only, no trace.
pub fn pipeline_infer(model: &MlpModel, red: &ReducedProblem, x: &Vector, u_o: &Vector) -> Result<Vector> {
    check_model(model, red)?;
    let polytope = build_shifted(red, x, u_o)?;
    let v = model.forward(&network_input(x, u_o))?;
    red.lift(&polytope.map(&v)?, x)
}

/// Parameter gradient for an upstream gradient on the independent block.
pub fn pipeline_backward(model: &MlpModel, trace: &PipelineTrace, grad_u_indep: &Vector) -> Result<Vector> {
    let grad_v = trace.polytope.vjp(trace.direction(), grad_u_indep)?;
    model.backward(&trace.mlp, &grad_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::OutputActivation;
    use crate::problem::{feasibility_gap, Builtin, LinConProblem};
    use crate::reduction::reduce;
    use crate::Matrix;
    use alloc::sync::Arc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> Vector {
        Vector::from_row_slice(v)
    }

    // [-2, 1] with one dummy input
    fn skewed_interval() -> ReducedProblem {
        let p = LinConProblem::new(1, 1, Arc::new(Builtin::SumSquares)).with_inequalities(
            Matrix::from_row_slice(2, 1, &[1.0, -1.0]),
            Matrix::zeros(2, 1),
            dvec(&[-1.0, -2.0]),
        );
        reduce(Arc::new(p)).unwrap()
    }

    // u1 + u2 + u3 = x1, 0 <= u <= 1 + x2
    fn simplex_slice() -> ReducedProblem {
        let mut a = Matrix::zeros(6, 3);
        let mut b = Matrix::zeros(6, 2);
        let mut c = Vector::zeros(6);
        for i in 0..3 {
            a[(i, i)] = -1.0;
            a[(3 + i, i)] = 1.0;
            b[(3 + i, 1)] = -1.0;
            c[3 + i] = -1.0;
        }
        let p = LinConProblem::new(3, 2, Arc::new(Builtin::SumSquares))
            .with_equalities(
                Matrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
                Matrix::from_row_slice(1, 2, &[-1.0, 0.0]),
                dvec(&[0.0]),
            )
            .with_inequalities(a, b, c);
        reduce(Arc::new(p)).unwrap()
    }

    #[test]
    fn zero_model_returns_interior_point() {
        let red = simplex_slice();
        let m = MlpModel::zeros(&[4, 16, 2], OutputActivation::Tanh).unwrap();
        let x = dvec(&[1.5, 0.2]);
        let u_o = dvec(&[0.5, 0.5]);
        let (full, _) = pipeline_forward(&m, &red, &x, &u_o).unwrap();
        assert!((full - red.lift(&u_o, &x).unwrap()).amax() < 1e-15);
    }

    #[test]
    fn random_weights_stay_feasible() {
        let red = simplex_slice();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..300 {
            let mut m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, seed).unwrap();
            if seed % 3 == 0 {
                // saturating weights push outputs onto the ball boundary
                let p = m.params() * 50.0;
                m.set_params(&p).unwrap();
            }
            let x = dvec(&[rng.random_range(1.0..2.0), rng.random_range(0.0..0.5)]);
            let u_o = dvec(&[x[0] / 3.0, x[0] / 3.0]);
            let (full, _) = pipeline_forward(&m, &red, &x, &u_o).unwrap();
            assert!(feasibility_gap(&red.parent, [(&full, &x)]).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn single_layer_gradient_by_hand() {
        // v = tanh(w . [x, u_o] + b); on [-2, 1] the map is v for v > 0, 2v for v < 0.
        let red = skewed_interval();
        let mut m = MlpModel::zeros(&[2, 1], OutputActivation::Tanh).unwrap();
        m.set_params(&dvec(&[0.4, 0.0, -0.1])).unwrap();
        let x = dvec(&[0.5]);
        let u_o = dvec(&[0.0]);
        let (full, trace) = pipeline_forward(&m, &red, &x, &u_o).unwrap();
        let v = libm::tanh(0.4 * 0.5 - 0.1);
        assert!((full[0] - v).abs() < 1e-15);
        let g = pipeline_backward(&m, &trace, &dvec(&[1.0])).unwrap();
        let dv = 1.0 - v * v;
        assert!((g - dvec(&[dv * 0.5, 0.0, dv])).amax() < 1e-14);

        m.set_params(&dvec(&[-0.4, 0.0, -0.1])).unwrap();
        let (full, trace) = pipeline_forward(&m, &red, &x, &u_o).unwrap();
        let v = libm::tanh(-0.3);
        assert!((full[0] - 2.0 * v).abs() < 1e-15);
        let g = pipeline_backward(&m, &trace, &dvec(&[1.0])).unwrap();
        let dv = 2.0 * (1.0 - v * v);
        assert!((g - dvec(&[dv * 0.5, 0.0, dv])).amax() < 1e-14);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let red = simplex_slice();
        let m = MlpModel::new(&[4, 16, 2], OutputActivation::Tanh, 2).unwrap();
        let (_, trace) = pipeline_forward(&m, &red, &dvec(&[1.5, 0.1]), &dvec(&[0.5, 0.5])).unwrap();
        let g = pipeline_backward(&m, &trace, &Vector::zeros(2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let red = simplex_slice();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for seed in 0..40 {
            let mut m = MlpModel::new(&[4, 8, 2], OutputActivation::Tanh, seed).unwrap();
            let x = dvec(&[rng.random_range(1.0..2.0), rng.random_range(0.0..0.5)]);
            let u_o = dvec(&[x[0] / 3.0, x[0] / 3.0]);
            let (_, trace) = pipeline_forward(&m, &red, &x, &u_o).unwrap();
            if !crate::gauge::is_untied(&trace.polytope, trace.direction(), 1e-4) {
                continue;
            }
            let up = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let g = pipeline_backward(&m, &trace, &up).unwrap();
            let p = m.params();
            let h = 1e-6;
            let mut fd = Vector::zeros(p.len());
            for k in 0..p.len() {
                let mut q = p.clone();
                q[k] += h;
                m.set_params(&q).unwrap();
                let fp = up.dot(&red.restrict(&pipeline_infer(&m, &red, &x, &u_o).unwrap()).unwrap());
                q[k] -= 2.0 * h;
                m.set_params(&q).unwrap();
                let fm = up.dot(&red.restrict(&pipeline_infer(&m, &red, &x, &u_o).unwrap()).unwrap());
                fd[k] = (fp - fm) / (2.0 * h);
            }
            m.set_params(&p).unwrap();
            let err = (&fd - &g).amax();
            assert!(err <= 1e-4 * (1.0 + fd.amax()), "seed {seed}: {err}");
            checked += 1;
        }
        assert!(checked >= 20);
    }

    #[test]
    fn boundary_interior_point_is_rejected() {
        let red = skewed_interval();
        let m = MlpModel::zeros(&[2, 1], OutputActivation::Tanh).unwrap();
        let err = pipeline_forward(&m, &red, &dvec(&[0.0]), &dvec(&[1.0])).unwrap_err();
        assert!(matches!(err, crate::Error::NotInterior { row: 0, .. }));
    }
}
