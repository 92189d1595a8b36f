use serde::{Deserialize, Serialize};

use super::config::{leak_rate_grid, scaling_grid, EsnConfig};
use super::member::{fit_member, sample_member_layers, EsnMember};
use crate::error::{config_err, CesarError, Result};
use crate::rng::derive_seed;

/// Members whose validation errors are averaged when tuning `alpha` and `zeta`.
pub const TUNING_MEMBERS: usize = 5;

/// Independently sampled reservoirs sharing one hyperparameter setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsnEnsemble {
    pub config: EsnConfig,
    pub latent_dim: usize,
    /// Leaking rate and scalings actually used (tuned or configured).
    pub leak_rate: f64,
    pub scaling: Vec<f64>,
    /// Mean one-step validation MSE of the chosen setting, when tuned.
    pub validation_mse: Option<f64>,
    pub members: Vec<EsnMember>,
}

/// Seed of ensemble member `index`.
pub fn member_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, index as u64)
}

fn check_latents(config: &EsnConfig, latents: &[Vec<f64>]) -> Result<usize> {
    config.validate()?;
    let dim = latents.first().map_or(0, Vec::len);
    if dim == 0 {
        return config_err("latent sequence is empty");
    }
    if latents.iter().any(|y| y.len() != dim) {
        return config_err("latent vectors differ in length");
    }
    if let Some(t) = latents.iter().position(|y| y.iter().any(|v| !v.is_finite())) {
        return Err(CesarError::Numeric(format!("latent vector {t} is not finite")));
    }
    let usable = latents.len().saturating_sub(config.lags + config.washout);
    if usable < 2 {
        return config_err(format!(
            "{} latent vectors leave no readout rows after {} lags and {} washout",
            latents.len(),
            config.lags,
            config.washout
        ));
    }
    Ok(dim)
}

/// Grid search over leaking rate and a uniform spectral scaling, scoring one-step
/// MSE on the last 10% of the post-washout rows.
pub fn tune(config: &EsnConfig, latents: &[Vec<f64>]) -> Result<(f64, f64, f64)> {
    let dim = check_latents(config, latents)?;
    let rows = latents.len() - config.lags;
    let usable = rows - config.washout;
    let hold = usable.div_ceil(10).max(1);
    if usable <= hold {
        return config_err("too few rows to hold out a validation window");
    }
    let split = rows - hold;
    let count = config.ensemble_size.min(TUNING_MEMBERS);
    let layer_sets: Vec<_> = (0..count)
        .map(|i| sample_member_layers(config, dim, member_seed(config.seed, i)))
        .collect();
    let mut best = (f64::INFINITY, config.leak_rate, config.scaling[0]);
    for &alpha in &leak_rate_grid() {
        for &zeta in &scaling_grid() {
            let scaling = vec![zeta; config.depth];
            let mut total = 0.0;
            for (i, layers) in layer_sets.iter().enumerate() {
                let (member, design) = fit_member(
                    config,
                    layers.clone(),
                    member_seed(config.seed, i),
                    latents,
                    alpha,
                    &scaling,
                    config.washout..split,
                )?;
                let (x, y) = design.rows(split..rows);
                total += (y - x * &member.readout).norm_squared() / (hold * dim) as f64;
            }
            let mse = total / count as f64;
            log::debug!("tuning alpha={alpha} zeta={zeta}: validation mse {mse:.6e}");
            if mse < best.0 {
                best = (mse, alpha, zeta);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(CesarError::Numeric("no finite validation error during tuning".into()));
    }
    Ok((best.1, best.2, best.0))
}

impl EsnEnsemble {
    /// Fits `config.ensemble_size` members to predict `latents[t]` from earlier
    /// vectors, tuning the leaking rate and scaling first when `config.tune` is set.
    pub fn fit(config: &EsnConfig, latents: &[Vec<f64>]) -> Result<Self> {
        let dim = check_latents(config, latents)?;
        let (leak_rate, scaling, validation_mse) = if config.tune {
            let (a, z, mse) = tune(config, latents)?;
            log::info!("tuned leaking rate {a}, spectral scaling {z} (validation mse {mse:.4e})");
            (a, vec![z; config.depth], Some(mse))
        } else {
            (config.leak_rate, config.scaling.clone(), None)
        };
        let rows = latents.len() - config.lags;
        let members = (0..config.ensemble_size)
            .map(|i| {
                let seed = member_seed(config.seed, i);
                let layers = sample_member_layers(config, dim, seed);
                fit_member(config, layers, seed, latents, leak_rate, &scaling, config.washout..rows)
                    .map(|(m, _)| m)
                    .map_err(|e| CesarError::Member {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            latent_dim: dim,
            leak_rate,
            scaling,
            validation_mse,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean training residual variance across members.
    pub fn residual_variance(&self) -> f64 {
        self.members.iter().map(|m| m.residual_variance).sum::<f64>() / self.members.len() as f64
    }

    /// Resamples every member's reservoir weights from its seed.
    pub fn regenerate_layers(&mut self) {
        for m in &mut self.members {
            m.layers = sample_member_layers(&self.config, self.latent_dim, m.seed);
        }
    }

    /// One iterative forecast path per member, in member order.
    pub fn forecast(&self, history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        self.forecast_members(history, horizon, self.members.len())
    }

    /// Paths from the first `count` members.
    pub fn forecast_members(
        &self,
        history: &[Vec<f64>],
        horizon: usize,
        count: usize,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        if count == 0 || count > self.members.len() {
            return config_err(format!("requested {count} of {} members", self.members.len()));
        }
        if history.len() < self.config.lags + self.config.washout {
            return config_err(format!(
                "history of {} is shorter than lags plus washout ({})",
                history.len(),
                self.config.lags + self.config.washout
            ));
        }
        self.members[..count]
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.forecast(history, horizon).map_err(|e| CesarError::Member {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// Fits an ensemble to `history` and forecasts `horizon` steps past its end.
pub fn ensemble_forecast(config: &EsnConfig, history: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if horizon == 0 {
        return config_err("forecast horizon must be at least 1");
    }
    EsnEnsemble::fit(config, history)?.forecast(history, horizon)
}
