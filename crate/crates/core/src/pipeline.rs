//! The two-stage model: a CAE fitted to the training frames, then an ESN ensemble
//! fitted to the sequence of flattened latents. Forecasts run the ensemble
//! forward in latent space and decode each step, optionally through dropout masks.

use serde::{Deserialize, Serialize};

use crate::cae::{train_on_frames, CaeConfig, CaeModel};
use crate::error::{config_err, Result};
use crate::esn::{EsnConfig, EsnEnsemble};
use crate::eval::quantile_sorted;
use crate::rng::{derive_seed, seeded};
use crate::series::{GridSeries, Normalization};
use crate::tensor::Field3;

/// Trained CAE and ESN ensemble with the scaling that maps data into model space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesarModel {
    pub cae: CaeModel,
    pub esn: EsnEnsemble,
    pub norm: Normalization,
    pub train_frames: usize,
    /// Mean squared CAE reconstruction residual over the training frames.
    pub observation_variance: f64,
    /// Mean squared ESN readout residual (latent space).
    pub state_variance: f64,
}

/// Returns `data` min-max scaled, fitting the record on the first `train_frames`
/// frames unless the series already carries one.
fn normalized(data: &GridSeries, train_frames: usize) -> Result<GridSeries> {
    if data.norm.is_some() {
        Ok(data.clone())
    } else {
        data.normalize(train_frames)
    }
}

fn flatten(latent: Field3) -> Vec<f64> {
    latent.into_vec()
}

impl CesarModel {
    /// Flattened latents of already-normalized frames.
    pub fn encode_frames(&self, frames: &[Field3]) -> Result<Vec<Vec<f64>>> {
        frames.iter().map(|f| self.cae.encode(f).map(flatten)).collect()
    }

    pub fn decode_latent(&self, latent: &[f64]) -> Result<Field3> {
        let (m, n, c) = self.cae.latent_shape();
        self.cae.decode(&Field3::from_vec(m, n, c, latent.to_vec())?)
    }

    /// Scales `data` into model space with the stored record, unless it is
    /// already normalized.
    pub fn to_model_space(&self, data: &GridSeries) -> Result<GridSeries> {
        if data.norm.is_some() {
            Ok(data.clone())
        } else {
            data.normalize_with(&self.norm)
        }
    }
}

/// Trains the CAE on frames `0..train_frames` of `data`, then the ESN ensemble on
/// their latents. Raw data is min-max scaled with training-window extrema first.
pub fn train_cesar(
    data: &GridSeries,
    train_frames: usize,
    cae_config: &CaeConfig,
    esn_config: &EsnConfig,
) -> Result<CesarModel> {
    if train_frames == 0 || train_frames > data.len() {
        return config_err(format!(
            "training window of {train_frames} frames is invalid for a series of {}",
            data.len()
        ));
    }
    if train_frames < esn_config.lags + esn_config.washout + 1 {
        return config_err(format!(
            "{train_frames} training frames cannot cover {} lags and {} washout",
            esn_config.lags, esn_config.washout
        ));
    }
    let scaled = normalized(data, train_frames)?;
    let norm = scaled.norm.clone().expect("normalized series carries its record");
    let frames = &scaled.frames[..train_frames];
    log::info!("training CAE on {train_frames} frames");
    let cae = train_on_frames(frames, cae_config)?;
    let mut observation_variance = 0.0;
    let mut latents = Vec::with_capacity(train_frames);
    for f in frames {
        let latent = cae.encode(f)?;
        observation_variance += cae.decode(&latent)?.mean_squared_difference(f)?;
        latents.push(flatten(latent));
    }
    observation_variance /= train_frames as f64;
    log::info!("fitting {} reservoirs on {}-dim latents", esn_config.ensemble_size, latents[0].len());
    let esn = EsnEnsemble::fit(esn_config, &latents)?;
    let state_variance = esn.residual_variance();
    Ok(CesarModel {
        cae,
        esn,
        norm,
        train_frames,
        observation_variance,
        state_variance,
    })
}

/// Where an ensemble member came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberProvenance {
    /// Index of the reservoir draw.
    pub reservoir: usize,
    pub reservoir_seed: u64,
    /// Seed of the decoder dropout mask, absent for deterministic decoding.
    pub dropout_seed: Option<u64>,
}

/// Forecast realizations in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastEnsemble {
    pub horizon: usize,
    pub members: Vec<GridSeries>,
    pub provenance: Vec<MemberProvenance>,
}

/// Forecast settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    pub horizon: usize,
    /// Reservoir draws (ensemble members used, in order).
    pub n_temporal: usize,
    /// Decodes per latent path; 1 means deterministic decoding.
    pub n_spatial: usize,
    pub keep_prob: f64,
    pub seed: u64,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self {
            horizon: 1,
            n_temporal: 1,
            n_spatial: 1,
            keep_prob: 1.0,
            seed: 0,
        }
    }
}

/// Iterative forecast of `options.horizon` frames after the end of `history`.
pub fn forecast(model: &CesarModel, history: &GridSeries, options: &ForecastOptions) -> Result<ForecastEnsemble> {
    if options.horizon == 0 {
        return config_err("forecast horizon must be at least 1");
    }
    if options.n_temporal == 0 || options.n_spatial == 0 {
        return config_err("at least one temporal and one spatial draw are required");
    }
    if !(options.keep_prob > 0.0 && options.keep_prob <= 1.0) {
        return config_err(format!("keep probability must lie in (0, 1], got {}", options.keep_prob));
    }
    let scaled = model.to_model_space(history)?;
    let latents = model.encode_frames(&scaled.frames)?;
    let paths = model.esn.forecast_members(&latents, options.horizon, options.n_temporal)?;
    let template = GridSeries {
        norm: None,
        ..scaled.slice(0..1)?
    };
    let mut members = Vec::with_capacity(options.n_temporal * options.n_spatial);
    let mut provenance = Vec::with_capacity(members.capacity());
    let (lm, ln, lc) = model.cae.latent_shape();
    for (r, path) in paths.iter().enumerate() {
        let latent_fields = path
            .iter()
            .map(|y| Field3::from_vec(lm, ln, lc, y.clone()))
            .collect::<Result<Vec<_>>>()?;
        for s in 0..options.n_spatial {
            let dropout_seed = (options.n_spatial > 1).then(|| derive_seed(options.seed, (r * options.n_spatial + s) as u64));
            let decoder = match dropout_seed {
                Some(seed) => model.cae.with_dropout_mask(options.keep_prob, &mut seeded(seed)),
                None => model.cae.clone(),
            };
            let frames = latent_fields
                .iter()
                .map(|y| decoder.decode(y).map(|x| model.norm.invert(&x)))
                .collect::<Result<Vec<_>>>()?;
            members.push(template.with_frames(frames)?);
            provenance.push(MemberProvenance {
                reservoir: r,
                reservoir_seed: model.esn.members[r].seed,
                dropout_seed,
            });
        }
    }
    Ok(ForecastEnsemble {
        horizon: options.horizon,
        members,
        provenance,
    })
}

impl ForecastEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Pointwise mean of the members.
    pub fn mean(&self) -> Result<GridSeries> {
        self.pointwise(|draws| draws.iter().sum::<f64>() / draws.len() as f64)
    }

    /// Pointwise type-7 quantile `q` of the members.
    pub fn quantile(&self, q: f64) -> Result<GridSeries> {
        self.pointwise(|draws| {
            let mut v = draws.to_vec();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, q)
        })
    }

    fn pointwise(&self, f: impl Fn(&[f64]) -> f64) -> Result<GridSeries> {
        let Some(first) = self.members.first() else {
            return config_err("forecast ensemble is empty");
        };
        let mut draws = vec![0.0; self.members.len()];
        let mut frames = Vec::with_capacity(self.horizon);
        for t in 0..first.len() {
            let mut out = first.frames[t].clone();
            for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
                for (d, m) in draws.iter_mut().zip(&self.members) {
                    *d = m.frames[t].as_slice()[idx];
                }
                *v = f(&draws);
            }
            frames.push(out);
        }
        first.with_frames(frames)
    }
}

/// Pointwise central interval at `level` (e.g. 0.95): quantiles
/// `(1 - level)/2` and `1 - (1 - level)/2` across members.
pub fn interval(ensemble: &ForecastEnsemble, level: f64) -> Result<(GridSeries, GridSeries)> {
    if !(level > 0.0 && level < 1.0) {
        return config_err(format!("interval level must lie in (0, 1), got {level}"));
    }
    if ensemble.len() < 2 {
        return config_err("an interval needs at least two members");
    }
    let tail = (1.0 - level) / 2.0;
    Ok((ensemble.quantile(tail)?, ensemble.quantile(1.0 - tail)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_members(values: &[f64]) -> ForecastEnsemble {
        let members = values
            .iter()
            .map(|&v| GridSeries::new(vec![Field3::filled(1, 1, 1, v)], 1.0, vec!["x".into()]).unwrap())
            .collect();
        ForecastEnsemble {
            horizon: 1,
            members,
            provenance: Vec::new(),
        }
    }

    #[test]
    fn interval_uses_type7_quantiles() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = interval(&constant_members(&values), 0.95).unwrap();
        assert!((lo.frames[0].get(0, 0, 0) - 3.475).abs() < 1e-12);
        assert!((hi.frames[0].get(0, 0, 0) - 97.525).abs() < 1e-12);
    }

    #[test]
    fn identical_members_give_zero_width() {
        let (lo, hi) = interval(&constant_members(&[2.5; 5]), 0.9).unwrap();
        assert_eq!(lo, hi);
    }

    #[test]
    fn intervals_nest() {
        let values: Vec<f64> = (0..37).map(|i| ((i * 17) % 37) as f64).collect();
        let e = constant_members(&values);
        let bands: Vec<_> = [0.8, 0.9, 0.95].iter().map(|&l| interval(&e, l).unwrap()).collect();
        for w in bands.windows(2) {
            assert!(w[1].0.frames[0].get(0, 0, 0) <= w[0].0.frames[0].get(0, 0, 0));
            assert!(w[1].1.frames[0].get(0, 0, 0) >= w[0].1.frames[0].get(0, 0, 0));
        }
    }

    #[test]
    fn bad_levels_are_rejected() {
        let e = constant_members(&[1.0, 2.0]);
        assert!(interval(&e, 0.0).is_err());
        assert!(interval(&e, 1.0).is_err());
        assert!(interval(&constant_members(&[1.0]), 0.5).is_err());
    }
}
