use nalgebra::{Cholesky, DMatrix};

use crate::error::{CesarError, Result};

/// Ridge regression `argmin_B ‖Y − X·B‖² + λ‖B‖²` through the normal equations.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(CesarError::Config(format!(
            "{} regressor rows for {} targets",
            x.nrows(),
            y.nrows()
        )));
    }
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = x.tr_mul(y);
    let singular = || {
        CesarError::Numeric(if lambda == 0.0 {
            "normal matrix is singular; use a positive ridge penalty".into()
        } else {
            "normal matrix is not positive definite".into()
        })
    };
    let diag_max = gram.diagonal().amax();
    let chol = Cholesky::new(gram).ok_or_else(singular)?;
    let pivot_min = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if pivot_min * pivot_min <= 1e-13 * diag_max {
        return Err(singular());
    }
    let b = chol.solve(&rhs);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(CesarError::Numeric("readout coefficients are not finite".into()));
    }
    Ok(b)
}

/// Mean squared residual per entry.
pub fn residual_variance(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    (y - x * b).norm_squared() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn objective(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> f64 {
        (y - x * b).norm_squared() + lambda * b.norm_squared()
    }

    #[test]
    fn exact_linear_targets_are_recovered() {
        let x = random(40, 5, 1);
        let truth = random(5, 3, 2);
        let y = &x * &truth;
        let b = fit_ridge(&x, &y, 0.0).unwrap();
        assert!((&y - &x * &b).amax() < 1e-8);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let x = random(30, 4, 3);
        let y = random(30, 2, 4);
        let b = fit_ridge(&x, &y, 1e14).unwrap();
        assert!(b.amax() < 1e-12);
    }

    #[test]
    fn matches_lu_normal_equations() {
        let x = random(100, 10, 5);
        let y = random(100, 3, 6);
        let b = fit_ridge(&x, &y, 0.1).unwrap();
        let gram = x.transpose() * &x + DMatrix::identity(10, 10) * 0.1;
        let oracle = gram.lu().solve(&(x.transpose() * &y)).unwrap();
        assert!((&b - &oracle).amax() < 1e-10);
    }

    #[test]
    fn fitted_coefficients_are_a_local_minimum() {
        let x = random(25, 4, 7);
        let y = random(25, 2, 8);
        let b = fit_ridge(&x, &y, 0.01).unwrap();
        let base = objective(&x, &y, &b, 0.01);
        for i in 0..4 {
            for j in 0..2 {
                for d in [-1e-3, 1e-3] {
                    let mut p = b.clone();
                    p[(i, j)] += d;
                    assert!(objective(&x, &y, &p, 0.01) >= base);
                }
            }
        }
    }

    #[test]
    fn singular_system_without_ridge_errors() {
        let mut x = random(10, 3, 9);
        let c = x.column(0).clone_owned();
        x.set_column(1, &c);
        let y = random(10, 1, 10);
        let err = fit_ridge(&x, &y, 0.0).unwrap_err();
        assert!(err.to_string().contains("ridge"));
    }
}
