use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded};

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Spike-and-slab draw: each entry is nonzero with probability `density`,
    /// nonzero values i.i.d. standard normal.
    pub fn spike_and_slab<R: Rng>(rows: usize, cols: usize, density: f64, rng: &mut R) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for _ in 0..rows {
            for c in 0..cols {
                if rng.random_bool(density) {
                    col_idx.push(c);
                    values.push(rng.sample(StandardNormal));
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// `out = scale · (self · x)`.
    pub fn mul_vec_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = scale * acc;
        }
    }
}

/// Largest eigenvalue modulus, from the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Power-iteration estimate of the spectral radius.
///
/// Tracks a two-term recurrence `x_{k+2} ≈ c1·x_{k+1} + c0·x_k` fitted by least
/// squares, which captures a dominant real eigenvalue, a `±λ` pair, or a complex
/// conjugate pair. Returns `None` if the estimate has not settled to relative
/// tolerance `tol` within `max_iter` iterations, after one restart from a shifted
/// start vector.
pub fn power_iteration_radius(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(0.0);
    }
    for attempt in 0..2 {
        let mut x = nalgebra::DVector::from_fn(n, |i, _| 1.0 + ((i + attempt * 7) as f64 * 0.618).fract());
        x /= x.norm();
        let mut prev = f64::NAN;
        let mut stable = 0;
        for _ in 0..max_iter {
            let y = m * &x;
            let ny = y.norm();
            if ny == 0.0 {
                return Some(0.0);
            }
            let y = y / ny;
            let z = m * &y;
            // With v0 = x, v1 = M·x, v2 = M·v1, fit v2 = a·v1 + b·v0; the dominant
            // eigenvalues are roots of λ² = a·λ + b.
            let (yy, xy, xx) = (y.dot(&y), x.dot(&y), x.dot(&x));
            let (zy, zx) = (z.dot(&y), z.dot(&x));
            let det = yy * xx - xy * xy;
            let est = if det.abs() < 1e-14 {
                z.norm()
            } else {
                let a = (zy * xx - zx * xy) / det;
                let b = (zx * yy - zy * xy) / det * ny;
                let disc = a * a + 4.0 * b;
                if disc >= 0.0 {
                    ((a.abs() + disc.sqrt()) / 2.0).max(((a.abs() - disc.sqrt()) / 2.0).abs())
                } else {
                    (-b).sqrt()
                }
            };
            if (est - prev).abs() <= tol * est.abs() {
                stable += 1;
                if stable >= 3 {
                    return Some(est);
                }
            } else {
                stable = 0;
            }
            prev = est;
            x = y;
        }
    }
    None
}

/// One reservoir layer: recurrent and input weights plus the recurrent matrix's
/// spectral radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirLayer {
    pub recurrent: SparseMatrix,
    pub input: SparseMatrix,
    pub spectral_radius: f64,
}

impl ReservoirLayer {
    /// Factor multiplying `W_d` so the effective recurrent matrix has spectral radius `zeta`.
    pub fn recurrent_scale(&self, zeta: f64) -> f64 {
        if self.spectral_radius > 0.0 {
            zeta / self.spectral_radius
        } else {
            0.0
        }
    }
}

/// Samples the `depth` layers of one reservoir. Layer 1 reads `input_dim` values;
/// deeper layers read the `reduced_size` EOF coordinates of the layer below.
pub fn sample_layers(
    depth: usize,
    reservoir_size: usize,
    reduced_size: usize,
    input_dim: usize,
    density_recurrent: f64,
    density_input: f64,
    seed: u64,
) -> Vec<ReservoirLayer> {
    (0..depth)
        .map(|d| {
            let mut rng = seeded(derive_seed(seed, d as u64));
            let recurrent = SparseMatrix::spike_and_slab(reservoir_size, reservoir_size, density_recurrent, &mut rng);
            let in_dim = if d == 0 { input_dim } else { reduced_size };
            let input = SparseMatrix::spike_and_slab(reservoir_size, in_dim, density_input, &mut rng);
            let spectral_radius = spectral_radius(&recurrent.to_dense());
            ReservoirLayer {
                recurrent,
                input,
                spectral_radius,
            }
        })
        .collect()
}
