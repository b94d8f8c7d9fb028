//! Central finite differences for checking analytic gradients.

/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every coordinate `i` in `coords`.
pub fn central_difference<F>(mut f: F, x: &[f64], coords: &[usize], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let hi = f(&probe);
            probe[i] = orig - eps;
            let lo = f(&probe);
            probe[i] = orig;
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}

/// Symmetric relative error with a tiny absolute floor so two near-zero
/// values compare as equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-10 {
        return 0.0;
    }
    (a - b).abs() / scale
}
