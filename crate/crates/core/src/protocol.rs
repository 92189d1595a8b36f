//! The Burgers simulation study: each seeded dataset is split into a training
//! window and a test window, then scored for reconstruction (CAE vs PCA),
//! iterative forecasting (CESAR vs persistence), and interval coverage.
//!
//! All MSE values are in the simulation's own units (denormalized).

use serde::{Deserialize, Serialize};

use crate::burgers::{simulate, BurgersConfig};
use crate::cae::{reconstruct_with_dropout, CaeConfig};
use crate::error::{config_err, Result};
use crate::esn::EsnConfig;
use crate::eval::{coverage, grand_mean_coverage, median_iqr, mse_map, persistence_forecast, EvalReport, Pca};
use crate::pipeline::{forecast, interval, train_cesar, ForecastEnsemble, ForecastOptions};
use crate::rng::derive_seed;
use crate::series::GridSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub burgers: BurgersConfig,
    pub cae: CaeConfig,
    pub esn: EsnConfig,
    pub train_frames: usize,
    pub horizon: usize,
    /// Reservoir draws for the temporal ensemble.
    pub n_temporal: usize,
    /// Dropout reconstructions per test frame for spatial coverage.
    pub n_dropout: usize,
    pub keep_prob: f64,
    pub levels: Vec<f64>,
    /// PCA baseline size; `None` matches the CAE latent size, capped at
    /// `train_frames - 1`.
    pub pca_components: Option<usize>,
    pub base_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            burgers: BurgersConfig::default(),
            cae: CaeConfig::burgers(),
            esn: EsnConfig::burgers(),
            train_frames: 80,
            horizon: 21,
            n_temporal: 100,
            n_dropout: 100,
            keep_prob: 0.21,
            levels: vec![0.95, 0.90, 0.80],
            pca_components: None,
            base_seed: 2024,
        }
    }
}

impl StudyConfig {
    pub fn dataset_seed(&self, index: usize) -> u64 {
        derive_seed(self.base_seed, index as u64)
    }

    pub fn matched_pca_components(&self) -> usize {
        self.pca_components
            .unwrap_or_else(|| self.cae.latent_len().min(self.train_frames - 1))
    }

    fn validate(&self) -> Result<()> {
        if self.train_frames + self.horizon > self.burgers.steps {
            return config_err(format!(
                "{} training and {} test frames exceed the {} simulated frames",
                self.train_frames, self.horizon, self.burgers.steps
            ));
        }
        if self.n_temporal < 2 || self.n_dropout < 2 {
            return config_err("coverage needs at least two temporal and two dropout members");
        }
        Ok(())
    }
}

/// Coverage percentages at one nominal level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub level: f64,
    pub spatial: f64,
    pub temporal: f64,
    pub grand_mean: f64,
}

/// Scores of one dataset; MSE vectors are per-location maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetScores {
    pub index: usize,
    pub seed: u64,
    pub pca_components: usize,
    pub cae_final_loss: f64,
    pub leak_rate: f64,
    pub scaling: Vec<f64>,
    pub cae_mse: Vec<f64>,
    pub pca_mse: Vec<f64>,
    pub cesar_mse: Vec<f64>,
    pub persistence_mse: Vec<f64>,
    pub coverage: Vec<LevelCoverage>,
}

impl DatasetScores {
    pub fn median(values: &[f64]) -> f64 {
        median_iqr(values).map(|(m, _)| m).unwrap_or(f64::NAN)
    }

    pub fn cae_beats_pca(&self) -> bool {
        Self::median(&self.cae_mse) < Self::median(&self.pca_mse)
    }
}

/// Simulates dataset `index`, trains CESAR on its training window, and scores the test window.
pub fn run_dataset(config: &StudyConfig, index: usize) -> Result<DatasetScores> {
    config.validate()?;
    let seed = config.dataset_seed(index);
    let raw = simulate(&config.burgers, seed)?;
    let (t0, t1) = (config.train_frames, config.train_frames + config.horizon);
    let history = raw.slice(0..t0)?;
    let truth = raw.slice(t0..t1)?;

    let cae_cfg = CaeConfig {
        seed: derive_seed(seed, 1),
        ..config.cae.clone()
    };
    let esn_cfg = EsnConfig {
        seed: derive_seed(seed, 2),
        ensemble_size: config.n_temporal,
        ..config.esn.clone()
    };
    let model = train_cesar(&history, t0, &cae_cfg, &esn_cfg)?;
    let norm = &model.norm;
    let test_scaled = model.to_model_space(&truth)?;
    let physical = |frames| truth.with_frames(frames);

    let cae_recon = test_scaled
        .frames
        .iter()
        .map(|f| model.cae.reconstruct(f).map(|r| norm.invert(&r)))
        .collect::<Result<Vec<_>>>()?;
    let cae_mse = mse_map(&truth, &physical(cae_recon)?)?;

    let pca_components = config.matched_pca_components();
    let pca = Pca::fit(&model.to_model_space(&history)?, pca_components)?;
    let pca_recon = test_scaled
        .frames
        .iter()
        .map(|f| pca.reconstruct(f).map(|r| norm.invert(&r)))
        .collect::<Result<Vec<_>>>()?;
    let pca_mse = mse_map(&truth, &physical(pca_recon)?)?;

    let options = ForecastOptions {
        horizon: config.horizon,
        n_temporal: config.n_temporal,
        n_spatial: 1,
        keep_prob: 1.0,
        seed: derive_seed(seed, 3),
    };
    let temporal = forecast(&model, &history, &options)?;
    let cesar_mse = mse_map(&truth, &temporal.mean()?)?;
    let persistence_mse = mse_map(&truth, &persistence_forecast(&history, config.horizon)?)?;

    let spatial = dropout_ensemble(config, &model, &test_scaled, &truth, derive_seed(seed, 4))?;
    let mut levels = Vec::with_capacity(config.levels.len());
    for &level in &config.levels {
        let (lo, hi) = interval(&spatial, level)?;
        let spatial_cov = coverage(&lo, &hi, &truth)?;
        let (lo, hi) = interval(&temporal, level)?;
        levels.push(LevelCoverage {
            level,
            spatial: spatial_cov,
            temporal: coverage(&lo, &hi, &truth)?,
            grand_mean: grand_mean_coverage(&temporal.members, &truth, level)?,
        });
    }

    Ok(DatasetScores {
        index,
        seed,
        pca_components,
        cae_final_loss: model.cae.loss_history.last().copied().unwrap_or(f64::NAN),
        leak_rate: model.esn.leak_rate,
        scaling: model.esn.scaling.clone(),
        cae_mse,
        pca_mse,
        cesar_mse,
        persistence_mse,
        coverage: levels,
    })
}

/// Dropout reconstructions of the test frames, one member per mask draw.
fn dropout_ensemble(
    config: &StudyConfig,
    model: &crate::pipeline::CesarModel,
    scaled: &GridSeries,
    truth: &GridSeries,
    seed: u64,
) -> Result<ForecastEnsemble> {
    let mut per_frame = Vec::with_capacity(scaled.len());
    for (t, f) in scaled.frames.iter().enumerate() {
        let draws = reconstruct_with_dropout(&model.cae, f, config.keep_prob, config.n_dropout, derive_seed(seed, t as u64))?;
        per_frame.push(draws);
    }
    let members = (0..config.n_dropout)
        .map(|s| truth.with_frames(per_frame.iter().map(|d| model.norm.invert(&d[s])).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastEnsemble {
        horizon: scaled.len(),
        members,
        provenance: Vec::new(),
    })
}

/// Results pooled over datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub datasets: usize,
    pub cae_wins: usize,
    pub cae: (f64, f64),
    pub pca: (f64, f64),
    pub cesar: (f64, f64),
    pub persistence: (f64, f64),
    /// Mean coverage over datasets per level.
    pub coverage: Vec<LevelCoverage>,
}

fn pooled(scores: &[DatasetScores], pick: impl Fn(&DatasetScores) -> &[f64]) -> Result<(f64, f64)> {
    let all: Vec<f64> = scores.iter().flat_map(|s| pick(s).iter().copied()).collect();
    median_iqr(&all)
}

impl StudySummary {
    pub fn from_scores(scores: &[DatasetScores]) -> Result<Self> {
        let Some(first) = scores.first() else {
            return config_err("no datasets to summarize");
        };
        let n = scores.len() as f64;
        let coverage = first
            .coverage
            .iter()
            .enumerate()
            .map(|(i, c)| LevelCoverage {
                level: c.level,
                spatial: scores.iter().map(|s| s.coverage[i].spatial).sum::<f64>() / n,
                temporal: scores.iter().map(|s| s.coverage[i].temporal).sum::<f64>() / n,
                grand_mean: scores.iter().map(|s| s.coverage[i].grand_mean).sum::<f64>() / n,
            })
            .collect();
        Ok(Self {
            datasets: scores.len(),
            cae_wins: scores.iter().filter(|s| s.cae_beats_pca()).count(),
            cae: pooled(scores, |s| &s.cae_mse)?,
            pca: pooled(scores, |s| &s.pca_mse)?,
            cesar: pooled(scores, |s| &s.cesar_mse)?,
            persistence: pooled(scores, |s| &s.persistence_mse)?,
            coverage,
        })
    }

    pub fn report(&self) -> EvalReport {
        let mut r = EvalReport::default();
        r.metadata.push(("datasets".into(), self.datasets.to_string()));
        for (method, (median, iqr)) in [
            ("cae", self.cae),
            ("pca", self.pca),
            ("cesar", self.cesar),
            ("persistence", self.persistence),
        ] {
            r.push(method, "mse_median", median);
            r.push(method, "mse_iqr", iqr);
        }
        for c in &self.coverage {
            let pct = (c.level * 100.0).round();
            r.push("spatial", &format!("coverage_{pct}"), c.spatial);
            r.push("temporal", &format!("coverage_{pct}"), c.temporal);
            r.push("grand_mean", &format!("coverage_{pct}"), c.grand_mean);
        }
        r
    }
}
