use rand::Rng;

use super::config::validate_keep_prob;
use super::model::CaeModel;
use crate::error::{config_err, Result};
use crate::rng::{derive_seed, seeded};
use crate::tensor::Field3;

impl CaeModel {
    /// Copy of the model with every weight and bias independently kept with
    /// probability `keep_prob` and zeroed otherwise. Kept values are not rescaled.
    pub fn with_dropout_mask<R: Rng>(&self, keep_prob: f64, rng: &mut R) -> Self {
        let mut masked = self.clone();
        if keep_prob >= 1.0 {
            return masked;
        }
        for bank in masked.banks_mut() {
            let (w, b) = bank.params_mut();
            for v in w.iter_mut().chain(b.iter_mut()) {
                if !rng.random_bool(keep_prob) {
                    *v = 0.0;
                }
            }
        }
        masked
    }

    /// Decodes `latent` through a freshly masked decoder.
    pub fn decode_with_dropout<R: Rng>(&self, latent: &Field3, keep_prob: f64, rng: &mut R) -> Result<Field3> {
        validate_keep_prob(keep_prob)?;
        self.with_dropout_mask(keep_prob, rng).decode(latent)
    }
}

/// `n_samples` encode/decode passes of `x`, each through an independently masked network.
///
/// Sample `s` uses the seed `derive_seed(seed, s)`, so samples can be drawn in any order.
pub fn reconstruct_with_dropout(
    model: &CaeModel,
    x: &Field3,
    keep_prob: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Field3>> {
    validate_keep_prob(keep_prob)?;
    if n_samples == 0 {
        return config_err("at least one dropout sample is required");
    }
    if keep_prob >= 1.0 {
        let r = model.reconstruct(x)?;
        return Ok(vec![r; n_samples]);
    }
    (0..n_samples)
        .map(|s| {
            let mut rng = seeded(derive_seed(seed, s as u64));
            model.with_dropout_mask(keep_prob, &mut rng).reconstruct(x)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cae::CaeConfig;

    fn model() -> CaeModel {
        CaeModel::initialize(CaeConfig {
            input_height: 8,
            input_width: 8,
            input_channels: 2,
            filters: vec![4, 6],
            seed: 3,
            ..CaeConfig::burgers()
        })
        .unwrap()
    }

    #[test]
    fn keep_all_equals_deterministic_reconstruction() {
        let m = model();
        let x = Field3::filled(8, 8, 2, 0.4);
        let det = m.reconstruct(&x).unwrap();
        for s in reconstruct_with_dropout(&m, &x, 1.0, 4, 99).unwrap() {
            assert_eq!(s, det);
        }
    }

    #[test]
    fn samples_differ_and_are_reproducible() {
        let m = model();
        let x = Field3::filled(8, 8, 2, 0.4);
        let a = reconstruct_with_dropout(&m, &x, 0.5, 3, 7).unwrap();
        let b = reconstruct_with_dropout(&m, &x, 0.5, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn invalid_keep_prob_is_rejected() {
        let m = model();
        let x = Field3::filled(8, 8, 2, 0.4);
        assert!(reconstruct_with_dropout(&m, &x, 0.0, 3, 7).is_err());
        assert!(reconstruct_with_dropout(&m, &x, -0.1, 3, 7).is_err());
        assert!(reconstruct_with_dropout(&m, &x, 1.5, 3, 7).is_err());
        assert!(reconstruct_with_dropout(&m, &x, 0.5, 0, 7).is_err());
    }

    #[test]
    fn mask_density_matches_keep_probability() {
        let m = model();
        let keep = 0.21;
        let mut rng = seeded(123);
        let mut kept = 0usize;
        let mut total = 0usize;
        while total < 100_000 {
            let masked = m.with_dropout_mask(keep, &mut rng);
            for (orig, msk) in m.banks().zip(masked.banks()) {
                for (o, v) in orig.weights().iter().zip(msk.weights()) {
                    if *o != 0.0 {
                        total += 1;
                        kept += usize::from(*v != 0.0);
                    }
                }
            }
        }
        let n = total as f64;
        let sd = (n * keep * (1.0 - keep)).sqrt();
        assert!((kept as f64 - n * keep).abs() <= 3.0 * sd, "{kept} of {total}");
    }
}
