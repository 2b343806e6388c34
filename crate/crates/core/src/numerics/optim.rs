use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real = f32> {
    pub first_moment: Matrix<T>,
    pub second_moment: Matrix<T>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            first_moment: Matrix::zeros(rows, cols),
            second_moment: Matrix::zeros(rows, cols),
            step_count: 0,
        }
    }

    pub fn for_param(param: &Matrix<T>) -> Self {
        Self::new(param.rows(), param.cols())
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step<T: Real>(
    param: &mut Matrix<T>,
    grad: &Matrix<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    for other in [grad, &state.first_moment, &state.second_moment] {
        if other.shape() != param.shape() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: param.shape(),
                right: other.shape(),
            });
        }
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::domain(
            "adam_step",
            format!("learning rate {lr} must be > 0"),
        ));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = T::from_f64_lossy(ADAM_BETA1);
    let b2 = T::from_f64_lossy(ADAM_BETA2);
    let one = T::one();
    let correction1 = T::from_f64_lossy(1.0 - ADAM_BETA1.powi(t));
    let correction2 = T::from_f64_lossy(1.0 - ADAM_BETA2.powi(t));
    let lr = T::from_f64_lossy(lr);
    let eps = T::from_f64_lossy(ADAM_EPSILON);

    let m = state.first_moment.as_mut_slice();
    let v = state.second_moment.as_mut_slice();
    for (((p, &g), m), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Global L2 norm over every entry of every matrix.
pub fn global_norm<T: Real>(grads: &[&mut Matrix<T>]) -> f64 {
    grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt()
}

/// Rescales all gradients together so their global L2 norm is at most
/// `max_norm`. Returns the norm measured before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut [&mut Matrix<T>], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = T::from_f64_lossy(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale_in_place(scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_grad_is_noop_on_fresh_state() {
        let mut p = Matrix::<f32>::from_vec(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let before = p.clone();
        let g = Matrix::zeros(2, 2);
        let mut st = AdamState::for_param(&p);
        adam_step(&mut p, &g, &mut st, 0.1).unwrap();
        assert_eq!(p, before);
        assert!(st.first_moment.as_slice().iter().all(|&x| x == 0.0));
        assert!(st.second_moment.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g|+eps) = 0.1·1/(1+1e-8)
        let mut p = Matrix::<f64>::zeros(1, 1);
        let g = Matrix::filled(1, 1, 1.0);
        let mut st = AdamState::for_param(&p);
        adam_step(&mut p, &g, &mut st, 0.1).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-12, "{}", p.get(0, 0));
    }

    #[test]
    fn adam_is_deterministic() {
        let g = Matrix::<f32>::from_vec(1, 3, vec![0.3, -0.1, 2.0]).unwrap();
        let run = || {
            let mut p = Matrix::<f32>::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
            let mut st = AdamState::for_param(&p);
            adam_step(&mut p, &g, &mut st, 0.01).unwrap();
            adam_step(&mut p, &g, &mut st, 0.01).unwrap();
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut p = Matrix::<f32>::zeros(2, 2);
        let g = Matrix::zeros(2, 3);
        let mut st = AdamState::for_param(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, 0.1),
            Err(Error::Dimension { .. })
        ));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut a = Matrix::<f64>::from_rows(&[[0.12, 0.16]]).unwrap();
        let before = a.clone();
        let norm = clip_grad_norm(&mut [&mut a], 0.3);
        assert!((norm - 0.2).abs() < 1e-12);
        assert_eq!(a, before);
    }

    #[test]
    fn clip_hand_example() {
        let mut a = Matrix::<f64>::from_rows(&[[3.0, 4.0]]).unwrap();
        clip_grad_norm(&mut [&mut a], 0.3);
        assert!((a.get(0, 0) - 0.18).abs() < 1e-12);
        assert!((a.get(0, 1) - 0.24).abs() < 1e-12);
    }

    fn matrices() -> impl Strategy<Value = Vec<Matrix<f64>>> {
        prop::collection::vec(
            (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
                prop::collection::vec(-50.0f64..50.0, r * c)
                    .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
            }),
            1..4,
        )
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_max(mut gs in matrices(), max in 0.01f64..10.0) {
            let mut refs: Vec<&mut Matrix<f64>> = gs.iter_mut().collect();
            clip_grad_norm(&mut refs, max);
            prop_assert!(global_norm(&refs) <= max + 1e-9);
        }

        #[test]
        fn clipping_is_idempotent(mut gs in matrices(), max in 0.01f64..10.0) {
            let mut refs: Vec<&mut Matrix<f64>> = gs.iter_mut().collect();
            clip_grad_norm(&mut refs, max);
            let once: Vec<Matrix<f64>> = refs.iter().map(|m| (**m).clone()).collect();
            clip_grad_norm(&mut refs, max);
            for (a, b) in once.iter().zip(refs.iter()) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }

        #[test]
        fn zero_grad_never_moves_params(
            data in prop::collection::vec(-10.0f32..10.0, 6),
            lr in 1e-5f64..1.0,
            steps in 1usize..5,
        ) {
            let mut p = Matrix::from_vec(2, 3, data).unwrap();
            let before = p.clone();
            let g = Matrix::zeros(2, 3);
            let mut st = AdamState::for_param(&p);
            for _ in 0..steps {
                adam_step(&mut p, &g, &mut st, lr).unwrap();
            }
            prop_assert_eq!(p, before);
            prop_assert_eq!(st.step_count, steps as u64);
        }
    }
}
