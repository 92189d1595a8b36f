use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::EsnConfig;
use super::eof::{eof_reduce, Eof};
use super::readout::{fit_ridge, residual_variance};
use super::reservoir::{sample_layers, ReservoirLayer};
use super::states::{run_layer, step_layer, StepBuffers};
use crate::error::{config_err, CesarError, Result};

/// The `k(·)` map: each reduced coordinate centered and rescaled to the pooled
/// standard deviation of the top-layer states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub target_sd: f64,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>], target_sd: f64) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let sd = (0..dim)
            .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Self { mean, sd, target_sd }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = if self.sd[j] > 0.0 {
                (x[j] - self.mean[j]) / self.sd[j] * self.target_sd
            } else {
                0.0
            };
        }
    }
}

fn pooled_sd(rows: &[Vec<f64>]) -> f64 {
    let count = rows.iter().map(Vec::len).sum::<usize>() as f64;
    if count == 0.0 {
        return 0.0;
    }
    let mean = rows.iter().flatten().sum::<f64>() / count;
    (rows.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt()
}

/// Layer-1 inputs `z_t = (y_{t-1}, ..., y_{t-q})` for `t = q..T`.
pub fn lagged_inputs(latents: &[Vec<f64>], lags: usize) -> Vec<Vec<f64>> {
    (lags..latents.len())
        .map(|t| (1..=lags).flat_map(|l| latents[t - l].iter().copied()).collect())
        .collect()
}

/// One fitted reservoir of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsnMember {
    pub seed: u64,
    #[serde(skip)]
    pub layers: Vec<ReservoirLayer>,
    pub leak_rate: f64,
    pub scaling: Vec<f64>,
    pub lags: usize,
    pub intercept: bool,
    /// `Q(·)` for layers `1..D-1`.
    pub eofs: Vec<Eof>,
    /// `k(·)` for layers `1..D-1`.
    pub standardizers: Vec<Standardizer>,
    /// Readout, `feature_len × latent_dim`.
    pub readout: DMatrix<f64>,
    pub residual_variance: f64,
}

/// Regressors and targets for every row of a training sequence.
pub(crate) struct Design {
    pub features: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl Design {
    pub fn rows(&self, range: Range<usize>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = range.len();
        (
            self.features.rows(range.start, n).clone_owned(),
            self.targets.rows(range.start, n).clone_owned(),
        )
    }
}

pub(crate) fn sample_member_layers(config: &EsnConfig, latent_dim: usize, seed: u64) -> Vec<ReservoirLayer> {
    sample_layers(
        config.depth,
        config.reservoir_size,
        config.reduced_size,
        latent_dim * config.lags,
        config.density_recurrent,
        config.density_input,
        seed,
    )
}

/// Fits a member on `latents` with the reduction maps and readout estimated from
/// `fit_rows` (indices into the lagged sequence). Returns the member and the
/// design over all rows.
pub(crate) fn fit_member(
    config: &EsnConfig,
    layers: Vec<ReservoirLayer>,
    seed: u64,
    latents: &[Vec<f64>],
    leak_rate: f64,
    scaling: &[f64],
    fit_rows: Range<usize>,
) -> Result<(EsnMember, Design)> {
    let inputs = lagged_inputs(latents, config.lags);
    let n = inputs.len();
    if fit_rows.end > n || fit_rows.is_empty() {
        return config_err(format!("cannot fit rows {fit_rows:?} of {n}"));
    }
    let depth = layers.len();
    let mut per_layer = Vec::with_capacity(depth);
    let mut eofs = Vec::with_capacity(depth - 1);
    let mut current = run_layer(&layers[0], &inputs, leak_rate, scaling[0], None)?;
    for d in 1..depth {
        let fit = DMatrix::from_fn(fit_rows.len(), config.reservoir_size, |r, c| current[fit_rows.start + r][c]);
        let (eof, _) = eof_reduce(&fit, config.reduced_size)?;
        let reduced: Vec<Vec<f64>> = current.iter().map(|h| eof.project(h)).collect();
        per_layer.push(reduced.clone());
        eofs.push(eof);
        current = run_layer(&layers[d], &reduced, leak_rate, scaling[d], None)?;
    }
    let target_sd = pooled_sd(&current[fit_rows.clone()]);
    let standardizers: Vec<Standardizer> = per_layer
        .iter()
        .map(|reduced| Standardizer::fit(&reduced[fit_rows.clone()], target_sd))
        .collect();

    let width = config.feature_len();
    let latent_dim = latents[0].len();
    let mut features = DMatrix::zeros(n, width);
    let mut scratch = vec![0.0; config.reduced_size];
    for r in 0..n {
        let mut c = 0;
        for &v in &current[r] {
            features[(r, c)] = v;
            c += 1;
        }
        for (reduced, k) in per_layer.iter().zip(&standardizers) {
            k.apply_into(&reduced[r], &mut scratch);
            for &v in &scratch {
                features[(r, c)] = v;
                c += 1;
            }
        }
        if config.intercept {
            features[(r, c)] = 1.0;
        }
    }
    let targets = DMatrix::from_fn(n, latent_dim, |r, j| latents[r + config.lags][j]);
    let design = Design { features, targets };
    let (x, y) = design.rows(fit_rows);
    let readout = fit_ridge(&x, &y, config.ridge)?;
    let residual_variance = residual_variance(&x, &y, &readout);
    let member = EsnMember {
        seed,
        layers,
        leak_rate,
        scaling: scaling.to_vec(),
        lags: config.lags,
        intercept: config.intercept,
        eofs,
        standardizers,
        readout,
        residual_variance,
    };
    Ok((member, design))
}

/// Per-layer states of a running member.
#[derive(Clone, Debug)]
pub struct MemberState {
    pub layers: Vec<Vec<f64>>,
}

impl EsnMember {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.readout.ncols()
    }

    pub fn reservoir_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.recurrent.rows())
    }

    pub fn zero_state(&self) -> MemberState {
        MemberState {
            layers: vec![vec![0.0; self.reservoir_size()]; self.depth()],
        }
    }

    fn ensure_layers(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(CesarError::Config("reservoir weights have not been regenerated".into()));
        }
        Ok(())
    }

    /// Advances every layer by one input.
    pub fn step(&self, state: &mut MemberState, z: &[f64]) {
        let mut buf = StepBuffers::default();
        let scale0 = self.layers[0].recurrent_scale(self.scaling[0]);
        step_layer(&self.layers[0], self.leak_rate, scale0, &mut state.layers[0], z, &mut buf);
        for d in 1..self.depth() {
            let reduced = self.eofs[d - 1].project(&state.layers[d - 1]);
            let scale = self.layers[d].recurrent_scale(self.scaling[d]);
            step_layer(&self.layers[d], self.leak_rate, scale, &mut state.layers[d], &reduced, &mut buf);
        }
    }

    /// Readout regressors for the current state.
    pub fn features(&self, state: &MemberState) -> Vec<f64> {
        let top = &state.layers[self.depth() - 1];
        let mut out = top.clone();
        for d in 0..self.depth() - 1 {
            let reduced = self.eofs[d].project(&state.layers[d]);
            let mut k = vec![0.0; reduced.len()];
            self.standardizers[d].apply_into(&reduced, &mut k);
            out.extend(k);
        }
        if self.intercept {
            out.push(1.0);
        }
        out
    }

    pub fn predict(&self, state: &MemberState) -> Vec<f64> {
        let f = self.features(state);
        let b = &self.readout;
        (0..b.ncols())
            .map(|j| f.iter().enumerate().map(|(i, x)| x * b[(i, j)]).sum())
            .collect()
    }

    /// Teacher-forced pass through `history`, returning the final state.
    pub fn warm_up(&self, history: &[Vec<f64>]) -> Result<MemberState> {
        self.ensure_layers()?;
        let mut state = self.zero_state();
        for z in lagged_inputs(history, self.lags) {
            self.step(&mut state, &z);
        }
        Ok(state)
    }

    /// Iterative forecast of the `horizon` latent vectors following `history`.
    pub fn forecast(&self, history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
        if horizon == 0 {
            return config_err("forecast horizon must be at least 1");
        }
        if history.len() < self.lags {
            return config_err(format!("history of {} is shorter than {} lags", history.len(), self.lags));
        }
        if let Some(y) = history.iter().find(|y| y.len() != self.latent_dim()) {
            return config_err(format!(
                "history vectors have length {}, model expects {}",
                y.len(),
                self.latent_dim()
            ));
        }
        let mut state = self.warm_up(history)?;
        let mut window: Vec<Vec<f64>> = history[history.len() - self.lags..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let z: Vec<f64> = window.iter().rev().flatten().copied().collect();
            self.step(&mut state, &z);
            let y = self.predict(&state);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(CesarError::Numeric("forecast is not finite".into()));
            }
            window.remove(0);
            window.push(y.clone());
            out.push(y);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn sine_latents(t: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|i| (0..dim).map(|j| (0.3 * i as f64 + j as f64).sin()).collect())
            .collect()
    }

    fn fit(config: &EsnConfig, latents: &[Vec<f64>]) -> (EsnMember, Design) {
        let layers = sample_member_layers(config, latents[0].len(), 3);
        let n = latents.len() - config.lags;
        fit_member(config, layers, 3, latents, config.leak_rate, &config.scaling, config.washout..n).unwrap()
    }

    #[test]
    fn lagged_inputs_order_newest_first() {
        let y = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        assert_eq!(lagged_inputs(&y, 2), vec![vec![2.0, 1.0], vec![3.0, 2.0]]);
    }

    #[test]
    fn stepping_reproduces_training_features() {
        let config = EsnConfig {
            reservoir_size: 20,
            reduced_size: 5,
            lags: 2,
            ..EsnConfig::default()
        }
        .with_depth(2);
        let latents = sine_latents(60, 3);
        let (member, design) = fit(&config, &latents);
        let mut state = member.zero_state();
        for (r, z) in lagged_inputs(&latents, 2).iter().enumerate() {
            member.step(&mut state, z);
            let f = member.features(&state);
            for (c, v) in f.iter().enumerate() {
                assert!((v - design.features[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_step_forecast_is_readout_of_next_state() {
        let config = EsnConfig {
            reservoir_size: 16,
            ..EsnConfig::default()
        };
        let latents = sine_latents(50, 2);
        let (member, _) = fit(&config, &latents);
        let f = member.forecast(&latents, 1).unwrap();
        let mut state = member.warm_up(&latents).unwrap();
        member.step(&mut state, &latents[49]);
        assert_eq!(f[0], member.predict(&state));
    }

    #[test]
    fn identity_dynamics_stay_near_last_value() {
        let mut rng = seeded(4);
        let mut latents = vec![vec![0.5, -0.2]];
        for _ in 1..120 {
            let prev = latents.last().unwrap().clone();
            latents.push(prev.iter().map(|v| v + rng.random_range(-0.01..0.01)).collect());
        }
        let config = EsnConfig {
            reservoir_size: 32,
            ridge: 1e-4,
            ..EsnConfig::default()
        };
        let (member, _) = fit(&config, &latents);
        let forecast = member.forecast(&latents, 10).unwrap();
        let last = latents.last().unwrap();
        let sd = member.residual_variance.sqrt();
        for (s, y) in forecast.iter().enumerate() {
            for (a, b) in y.iter().zip(last) {
                assert!((a - b).abs() <= 3.0 * sd * (s + 1) as f64 + 0.05, "lead {s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let config = EsnConfig {
            reservoir_size: 8,
            ..EsnConfig::default()
        };
        let latents = sine_latents(30, 1);
        let (member, _) = fit(&config, &latents);
        assert!(member.forecast(&latents, 0).is_err());
    }
}
