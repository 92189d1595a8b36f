use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Hyperparameters shared by every reservoir of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsnConfig {
    /// Number of stacked reservoirs `D`.
    pub depth: usize,
    /// Hidden units per reservoir `n_h`.
    pub reservoir_size: usize,
    /// EOF-reduced size `n_h~` of each non-final layer (unused when `depth == 1`).
    pub reduced_size: usize,
    /// Leaking rate `alpha` in (0, 1].
    pub leak_rate: f64,
    /// Spectral scaling `zeta_d` in (0, 1], one per layer.
    pub scaling: Vec<f64>,
    /// Probability that an entry of `W_d` is nonzero.
    pub density_recurrent: f64,
    /// Probability that an entry of `W_d^in` is nonzero.
    pub density_input: f64,
    /// Number of lagged latent vectors `q` in the layer-1 input.
    pub lags: usize,
    /// Leading state rows excluded from readout fitting.
    pub washout: usize,
    pub ridge: f64,
    /// Append a constant column to the readout regressors.
    pub intercept: bool,
    pub ensemble_size: usize,
    /// Pick `leak_rate` and `scaling` by one-step validation before fitting.
    pub tune: bool,
    pub seed: u64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            reservoir_size: 64,
            reduced_size: 16,
            leak_rate: 0.5,
            scaling: vec![0.9],
            density_recurrent: 0.1,
            density_input: 0.1,
            lags: 1,
            washout: 10,
            ridge: 1e-6,
            intercept: true,
            ensemble_size: 100,
            tune: true,
            seed: 0,
        }
    }
}

/// Candidate leaking rates for tuning: 0.1, 0.2, ..., 1.0.
pub fn leak_rate_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// Candidate spectral scalings for tuning: 0.1, 0.2, ..., 0.9.
pub fn scaling_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

impl EsnConfig {
    /// One 64-unit layer.
    pub fn burgers() -> Self {
        Self::default()
    }

    /// One 128-unit layer.
    pub fn wrf() -> Self {
        Self {
            reservoir_size: 128,
            ..Self::default()
        }
    }

    /// Sets the same `zeta` on every layer.
    pub fn with_uniform_scaling(mut self, zeta: f64) -> Self {
        self.scaling = vec![zeta; self.depth];
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        let zeta = self.scaling.first().copied().unwrap_or(0.9);
        self.depth = depth;
        self.scaling = vec![zeta; depth];
        self
    }

    /// Width of the readout regressor row.
    pub fn feature_len(&self) -> usize {
        self.reservoir_size + (self.depth - 1) * self.reduced_size + usize::from(self.intercept)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.reservoir_size == 0 {
            return config_err("reservoir depth and size must be positive");
        }
        if self.depth > 1 && (self.reduced_size == 0 || self.reduced_size > self.reservoir_size) {
            return config_err(format!(
                "reduced size must lie in 1..={}, got {}",
                self.reservoir_size, self.reduced_size
            ));
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return config_err(format!("leaking rate must lie in (0, 1], got {}", self.leak_rate));
        }
        if self.scaling.len() != self.depth {
            return config_err(format!(
                "{} scaling values for {} layers",
                self.scaling.len(),
                self.depth
            ));
        }
        if let Some(z) = self.scaling.iter().find(|z| !(**z > 0.0 && **z <= 1.0)) {
            return config_err(format!("spectral scaling must lie in (0, 1], got {z}"));
        }
        for (name, p) in [
            ("recurrent density", self.density_recurrent),
            ("input density", self.density_input),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return config_err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.lags == 0 {
            return config_err("at least one lag is required");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return config_err("ridge penalty must be a nonnegative finite number");
        }
        if self.ensemble_size == 0 {
            return config_err("ensemble size must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EsnConfig::default().validate().unwrap();
        EsnConfig::wrf().validate().unwrap();
        assert_eq!(EsnConfig::default().density_recurrent, 0.1);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let bad = [
            EsnConfig { leak_rate: 0.0, ..Default::default() },
            EsnConfig { scaling: vec![1.2], ..Default::default() },
            EsnConfig { scaling: vec![0.5, 0.5], ..Default::default() },
            EsnConfig { lags: 0, ..Default::default() },
            EsnConfig { ensemble_size: 0, ..Default::default() },
            EsnConfig::default().with_depth(2).tap_reduced(0),
            EsnConfig::default().with_depth(2).tap_reduced(65),
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    impl EsnConfig {
        fn tap_reduced(mut self, r: usize) -> Self {
            self.reduced_size = r;
            self
        }
    }

    #[test]
    fn grids_match_search_ranges() {
        assert_eq!(leak_rate_grid().len(), 10);
        assert_eq!(scaling_grid().len(), 9);
        assert_eq!(*leak_rate_grid().last().unwrap(), 1.0);
        assert_eq!(*scaling_grid().last().unwrap(), 0.9);
    }
}
