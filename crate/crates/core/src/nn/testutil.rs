use crate::nn::Tensor;

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let h = 1e-5;
    let mut probe = x.clone();
    let mut grad = x.zeros_like();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

pub fn max_rel_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub fn assert_grad_close(analytic: &Tensor, numeric: &Tensor, tol: f64) {
    assert_eq!(analytic.shape(), numeric.shape());
    let err = max_rel_error(analytic, numeric);
    assert!(err < tol, "max relative error {err:e} >= {tol:e}");
}

/// Loss `sum(out * weights)`: its gradient with respect to `out` is `weights`.
pub fn dot(out: &Tensor, weights: &Tensor) -> f64 {
    out.data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}
