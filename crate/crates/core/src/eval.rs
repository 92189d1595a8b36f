//! Baselines (persistence, PCA) and the scoring used to compare methods:
//! per-location MSE maps, median/IQR summaries, and interval coverage.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CesarError, Result};
use crate::series::GridSeries;
use crate::tensor::Field3;

/// `horizon` copies of the last frame of `history`.
pub fn persistence_forecast(history: &GridSeries, horizon: usize) -> Result<GridSeries> {
    let Some(last) = history.frames.last() else {
        return config_err("persistence needs at least one frame");
    };
    if horizon == 0 {
        return config_err("forecast horizon must be at least 1");
    }
    history.with_frames(vec![last.clone(); horizon])
}

/// Linear basis of flattened frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal components as columns, `d × r`.
    pub components: DMatrix<f64>,
    /// All singular values of the centered data, descending.
    pub singular_values: Vec<f64>,
}

impl Pca {
    /// Fits `n_components` directions to the rows of `data` (`T × d`).
    ///
    /// Uses the eigendecomposition of whichever of the `T × T` or `d × d`
    /// cross-products is smaller.
    pub fn fit_matrix(data: &DMatrix<f64>, n_components: usize) -> Result<Self> {
        let (t, d) = data.shape();
        if n_components == 0 || n_components > t.min(d) {
            return config_err(format!(
                "{n_components} components requested; at most {} are available",
                t.min(d)
            ));
        }
        let mean: Vec<f64> = (0..d).map(|j| data.column(j).mean()).collect();
        let mut x = data.clone();
        for (j, m) in mean.iter().enumerate() {
            x.column_mut(j).add_scalar_mut(-m);
        }
        let rank = t.min(d);
        let mut components = DMatrix::zeros(d, n_components);
        let singular_values: Vec<f64>;
        if d <= t {
            let eig = SymmetricEigen::new(x.tr_mul(&x));
            let order = descending(&eig.eigenvalues);
            singular_values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
            for (c, &i) in order.iter().take(n_components).enumerate() {
                components.set_column(c, &eig.eigenvectors.column(i));
            }
        } else {
            // Left vectors u_i of X give right vectors v_i = Xᵀu_i / s_i.
            let eig = SymmetricEigen::new(&x * x.transpose());
            let order = descending(&eig.eigenvalues);
            singular_values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
            for (c, &i) in order.iter().take(n_components).enumerate() {
                let s = singular_values[c];
                if s > 1e-12 * singular_values[0].max(f64::MIN_POSITIVE) {
                    let v = x.tr_mul(&eig.eigenvectors.column(i).clone_owned()) / s;
                    components.set_column(c, &v);
                }
            }
        }
        debug_assert_eq!(singular_values.len(), rank);
        Ok(Self {
            mean,
            components,
            singular_values,
        })
    }

    /// Fits on the flattened frames of `data`.
    pub fn fit(data: &GridSeries, n_components: usize) -> Result<Self> {
        let d = data.frames[0].len();
        let m = DMatrix::from_fn(data.len(), d, |t, j| data.frames[t].as_slice()[j]);
        Self::fit_matrix(&m, n_components)
    }

    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    /// Share of the centered sum of squares carried by the retained components.
    pub fn captured_variance(&self) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 1.0;
        }
        let kept: f64 = self.singular_values.iter().take(self.n_components()).map(|s| s * s).sum();
        kept / total
    }

    /// Projection onto the components and back, mean restored.
    pub fn reconstruct_values(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut out = self.mean.clone();
        for c in 0..self.n_components() {
            let col = self.components.column(c);
            let w: f64 = centered.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            for (o, b) in out.iter_mut().zip(col.iter()) {
                *o += w * b;
            }
        }
        out
    }

    pub fn reconstruct(&self, frame: &Field3) -> Result<Field3> {
        if frame.len() != self.mean.len() {
            return config_err(format!(
                "frame has {} values, basis expects {}",
                frame.len(),
                self.mean.len()
            ));
        }
        let (m, n, p) = frame.shape();
        Field3::from_vec(m, n, p, self.reconstruct_values(frame.as_slice()))
    }

    pub fn reconstruct_series(&self, data: &GridSeries) -> Result<GridSeries> {
        let frames = data.frames.iter().map(|f| self.reconstruct(f)).collect::<Result<_>>()?;
        data.with_frames(frames)
    }
}

fn descending(values: &nalgebra::DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn check_same_shape(truth: &GridSeries, pred: &GridSeries) -> Result<()> {
    if truth.dims() != pred.dims() {
        return Err(CesarError::Input(format!(
            "truth has dims {:?}, prediction {:?}",
            truth.dims(),
            pred.dims()
        )));
    }
    Ok(())
}

/// Mean squared error at each grid cell, averaged over time and variables,
/// row-major `m × n`.
pub fn mse_map(truth: &GridSeries, pred: &GridSeries) -> Result<Vec<f64>> {
    check_same_shape(truth, pred)?;
    let (m, n, p) = truth.frame_shape();
    let mut acc = vec![0.0; m * n];
    for (a, b) in truth.frames.iter().zip(&pred.frames) {
        for (cell, (x, y)) in acc.iter_mut().zip(a.as_slice().chunks_exact(p).zip(b.as_slice().chunks_exact(p))) {
            *cell += x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        }
    }
    let denom = (truth.len() * p) as f64;
    Ok(acc.into_iter().map(|v| v / denom).collect())
}

/// Quantile `q` of sorted data with linear interpolation between order
/// statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Median and interquartile range.
pub fn median_iqr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(CesarError::Input("median of an empty set".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)))
}

/// Percentage of values of `truth` inside `[lower, upper]`.
pub fn coverage(lower: &GridSeries, upper: &GridSeries, truth: &GridSeries) -> Result<f64> {
    check_same_shape(truth, lower)?;
    check_same_shape(truth, upper)?;
    let mut inside = 0usize;
    let mut total = 0usize;
    for ((l, u), x) in lower.frames.iter().zip(&upper.frames).zip(&truth.frames) {
        for ((a, b), v) in l.as_slice().iter().zip(u.as_slice()).zip(x.as_slice()) {
            total += 1;
            if a <= v && v <= b {
                inside += 1;
            }
        }
    }
    Ok(100.0 * inside as f64 / total as f64)
}

/// Coverage of the spatially averaged truth by bands of spatially averaged members.
pub fn grand_mean_coverage(members: &[GridSeries], truth: &GridSeries, level: f64) -> Result<f64> {
    if members.len() < 2 {
        return config_err("grand-mean coverage needs at least two members");
    }
    if !(level > 0.0 && level < 1.0) {
        return config_err(format!("level must lie in (0, 1), got {level}"));
    }
    for m in members {
        check_same_shape(truth, m)?;
    }
    let means: Vec<Vec<Vec<f64>>> = members.iter().map(GridSeries::spatial_means).collect();
    let target = truth.spatial_means();
    let tail = (1.0 - level) / 2.0;
    let mut inside = 0usize;
    let mut total = 0usize;
    for (t, row) in target.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let mut draws: Vec<f64> = means.iter().map(|m| m[t][k]).collect();
            draws.sort_by(f64::total_cmp);
            let (lo, hi) = (quantile_sorted(&draws, tail), quantile_sorted(&draws, 1.0 - tail));
            total += 1;
            if lo <= v && v <= hi {
                inside += 1;
            }
        }
    }
    Ok(100.0 * inside as f64 / total as f64)
}

/// One scored quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// Scores keyed by method and metric, with free-form run metadata.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub metadata: Vec<(String, String)>,
}

impl EvalReport {
    pub fn push(&mut self, method: &str, metric: &str, value: f64) {
        self.rows.push(EvalRow {
            method: method.into(),
            metric: metric.into(),
            value,
        });
    }

    /// Adds `median_mse` and `iqr_mse` rows for `method`.
    pub fn push_mse_summary(&mut self, method: &str, per_location: &[f64]) -> Result<()> {
        let (median, iqr) = median_iqr(per_location)?;
        self.push(method, "median_mse", median);
        self.push(method, "iqr_mse", iqr);
        Ok(())
    }

    pub fn get(&self, method: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.metadata {
            writeln!(f, "# {k}: {v}")?;
        }
        writeln!(f, "{:<16} {:<20} {:>14}", "method", "metric", "value")?;
        for r in &self.rows {
            writeln!(f, "{:<16} {:<20} {:>14.6e}", r.method, r.metric, r.value)?;
        }
        Ok(())
    }
}
