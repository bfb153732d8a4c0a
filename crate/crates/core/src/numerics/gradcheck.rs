/// Central finite differences: `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`
/// per coordinate. The oracle every analytic gradient in this crate is
/// checked against.
pub fn finite_diff_gradient<F>(mut f: F, theta: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// True when `analytic` and `numeric` agree within `rtol` relative error,
/// with `atol` as the floor for near-zero gradients.
pub fn gradients_close(analytic: &[f64], numeric: &[f64], rtol: f64, atol: f64) -> bool {
    analytic.len() == numeric.len()
        && analytic
            .iter()
            .zip(numeric)
            .all(|(&a, &n)| (a - n).abs() <= atol + rtol * a.abs().max(n.abs()))
}

/// Largest relative error between two gradient vectors, with an absolute
/// floor so zero gradients compare cleanly.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
