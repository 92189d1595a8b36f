use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Empirical orthogonal functions of a state matrix (rows are time points).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eof {
    /// Column means removed before projection.
    pub mean: Vec<f64>,
    /// Leading directions as columns, `n × r`.
    pub basis: DMatrix<f64>,
    /// All singular values of the centered matrix, descending.
    pub singular_values: Vec<f64>,
    /// Set when the input had no variance; projections are then zero.
    pub degenerate: bool,
}

impl Eof {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Fraction of the centered sum of squares carried by the retained directions.
    pub fn captured_variance(&self) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 0.0;
        }
        let kept: f64 = self.singular_values.iter().take(self.rank()).map(|s| s * s).sum();
        kept / total
    }

    /// Sum of squared discarded singular values.
    pub fn tail_energy(&self) -> f64 {
        self.singular_values.iter().skip(self.rank()).map(|s| s * s).sum()
    }

    pub fn project_into(&self, h: &[f64], out: &mut [f64]) {
        debug_assert_eq!(h.len(), self.input_dim());
        for (c, o) in out.iter_mut().enumerate() {
            let col = self.basis.column(c);
            *o = h.iter().zip(&self.mean).zip(col.iter()).map(|((x, m), b)| (x - m) * b).sum();
        }
    }

    pub fn project(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rank()];
        self.project_into(h, &mut out);
        out
    }

    /// Maps reduced coordinates back to the original space, mean included.
    pub fn back_project(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in coords.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis.column(c).iter()) {
                *o += w * b;
            }
        }
        out
    }
}

/// Fits `reduced` EOFs to `states` (`T × n`) and returns them with the projected
/// states (`T × reduced`).
///
/// The basis comes from the eigendecomposition of the `n × n` cross-product of
/// the centered states; its eigenvalues are the squared singular values.
pub fn eof_reduce(states: &DMatrix<f64>, reduced: usize) -> Result<(Eof, DMatrix<f64>)> {
    let (t, n) = states.shape();
    if reduced == 0 || reduced > n {
        return config_err(format!("reduced size must lie in 1..={n}, got {reduced}"));
    }
    if t < reduced {
        return config_err(format!("{t} rows cannot support {reduced} directions"));
    }
    let mean: Vec<f64> = (0..n).map(|j| states.column(j).mean()).collect();
    let mut centered = states.clone();
    for (j, m) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-m);
    }
    if centered.amax() <= 1e-12 * states.amax() {
        log::warn!("EOF reduction of constant states; projections are zero");
        let eof = Eof {
            mean,
            basis: DMatrix::zeros(n, reduced),
            singular_values: vec![0.0; n],
            degenerate: true,
        };
        return Ok((eof, DMatrix::zeros(t, reduced)));
    }
    let gram = centered.tr_mul(&centered);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let singular_values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let mut basis = DMatrix::zeros(n, reduced);
    for (c, &i) in order.iter().take(reduced).enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // Sign convention: largest-magnitude loading positive.
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        basis.set_column(c, &v);
    }
    let reduced_states = &centered * &basis;
    Ok((
        Eof {
            mean,
            basis,
            singular_values,
            degenerate: false,
        },
        reduced_states,
    ))
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

    #[test]
    fn full_basis_reproduces_centered_states() {
        let s = random(20, 6, 1);
        let (eof, red) = eof_reduce(&s, 6).unwrap();
        for r in 0..20 {
            let coords: Vec<f64> = red.row(r).iter().copied().collect();
            let back = eof.back_project(&coords);
            for c in 0..6 {
                assert!((back[c] - s[(r, c)]).abs() < 1e-10);
            }
        }
        assert!((eof.captured_variance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_is_fully_captured() {
        let u: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let v = [1.0, -2.0, 0.5, 3.0];
        let s = DMatrix::from_fn(15, 4, |i, j| u[i] * v[j] + 7.0);
        let (eof, _) = eof_reduce(&s, 1).unwrap();
        assert!((eof.captured_variance() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matches_full_svd() {
        let s = random(50, 8, 3);
        let (eof, red) = eof_reduce(&s, 3).unwrap();
        let mut centered = s.clone();
        for j in 0..8 {
            let m = s.column(j).mean();
            centered.column_mut(j).add_scalar_mut(-m);
        }
        let svd = centered.clone().svd(true, true);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let kept: f64 = sv.iter().take(3).map(|x| x * x).sum();
        assert!((eof.captured_variance() - kept / total).abs() < 1e-10);
        // Reconstruction residual equals the tail energy.
        let recon = &red * eof.basis.transpose();
        let resid = (&centered - recon).norm_squared();
        assert!((resid - eof.tail_energy()).abs() < 1e-10 * total);
    }

    #[test]
    fn constant_states_are_flagged() {
        let s = DMatrix::from_element(10, 4, 0.3);
        let (eof, red) = eof_reduce(&s, 2).unwrap();
        assert!(eof.degenerate);
        assert!(red.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bad_sizes_are_rejected() {
        let s = random(5, 4, 0);
        assert!(eof_reduce(&s, 0).is_err());
        assert!(eof_reduce(&s, 5).is_err());
        assert!(eof_reduce(&random(2, 4, 0), 3).is_err());
    }
}
