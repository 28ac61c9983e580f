use alloc::vec::Vec;

use crate::{Error, Result};

/// Central-difference gradient `(f(p + eps·eᵢ) − f(p − eps·eᵢ)) / (2·eps)`.
pub fn finite_diff_grad<F>(mut f: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let up = f(&p);
        p[i] = orig - eps;
        let down = f(&p);
        p[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteEvaluation(i));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// `|a − b| / max(|a|, |b|, floor)` componentwise maximum.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn constant_function() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, 2.0, 3.0], 1e-5).unwrap();
        assert_eq!(g, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_reports_coordinate() {
        let err = finite_diff_grad(|p| if p[1] > 1.0 { f64::NAN } else { 0.0 }, &[0.0, 1.0], 1e-3).unwrap_err();
        assert_eq!(err, Error::NonFiniteEvaluation(1));
    }
}
