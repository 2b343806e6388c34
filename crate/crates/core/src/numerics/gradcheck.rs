use crate::numerics::{Matrix, Real};

/// Central-difference gradient of a scalar function of a matrix.
pub fn finite_diff_grad<T: Real>(mut f: impl FnMut(&Matrix<T>) -> T, at: &Matrix<T>, eps: T) -> Matrix<T> {
    assert!(eps > T::zero(), "eps must be positive");
    let mut x = at.clone();
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    let two_eps = eps + eps;
    for i in 0..at.len() {
        let orig = x.as_slice()[i];
        x.as_mut_slice()[i] = orig + eps;
        let up = f(&x);
        x.as_mut_slice()[i] = orig - eps;
        let down = f(&x);
        x.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (up - down) / two_eps;
    }
    grad
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`: norm-wise relative error.
pub fn relative_error<T: Real>(a: &Matrix<T>, b: &Matrix<T>, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / a.frobenius_norm().max(b.frobenius_norm()).max(floor)
}
