use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::tensor::activation::DEFAULT_LEAKY_SLOPE;
use crate::tensor::ActivationKind;

/// Architecture and training settings of the convolutional autoencoder.
///
/// `batch_size` and `keep_prob` are distinct quantities: the first is the number of
/// frames per gradient step, the second the Bernoulli keep probability of each
/// weight when sampling dropout reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    /// Encoder filter counts `F^(1..L)`; the decoder uses them in reverse.
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub leaky_slope: f64,
    pub final_activation: ActivationKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub keep_prob: f64,
    pub seed: u64,
}

impl CaeConfig {
    /// 64x64 two-component Burgers fields, L = 3, F = {16, 32, 64}, 500 epochs, batch 2.
    pub fn burgers() -> Self {
        Self {
            input_height: 64,
            input_width: 64,
            input_channels: 2,
            filters: vec![16, 32, 64],
            kernel: 3,
            stride: 2,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            final_activation: ActivationKind::Sigmoid,
            epochs: 500,
            batch_size: 2,
            learning_rate: 1e-3,
            keep_prob: 0.21,
            seed: 0,
        }
    }

    /// 256x256 single-variable wind fields, F = {32, 64, 128}, 1000 epochs, batch 10.
    pub fn wrf() -> Self {
        Self {
            input_height: 256,
            input_width: 256,
            input_channels: 1,
            filters: vec![32, 64, 128],
            epochs: 1000,
            batch_size: 10,
            keep_prob: 0.3,
            ..Self::burgers()
        }
    }

    pub fn depth(&self) -> usize {
        self.filters.len()
    }

    /// Decoder output channel counts: the encoder counts reversed.
    pub fn decoder_filters(&self) -> Vec<usize> {
        self.filters.iter().rev().copied().collect()
    }

    pub fn encoder_activation(&self) -> ActivationKind {
        ActivationKind::LeakyRelu {
            slope: self.leaky_slope,
        }
    }

    /// `(height, width, channels)` of the latent map.
    pub fn latent_shape(&self) -> (usize, usize, usize) {
        let f = self.stride.pow(self.depth() as u32);
        (
            self.input_height / f,
            self.input_width / f,
            *self.filters.last().unwrap_or(&0),
        )
    }

    pub fn latent_len(&self) -> usize {
        let (h, w, c) = self.latent_shape();
        h * w * c
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.input_height, self.input_width, self.input_channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters.is_empty() || self.filters.contains(&0) {
            return config_err("encoder filter counts must be a non-empty list of positive integers");
        }
        if self.kernel == 0 || self.stride == 0 {
            return config_err("kernel size and stride must be positive");
        }
        if self.input_height == 0 || self.input_width == 0 || self.input_channels == 0 {
            return config_err("input dimensions must be positive");
        }
        let f = self
            .stride
            .checked_pow(self.depth() as u32)
            .ok_or_else(|| crate::error::CesarError::Config("stride^depth overflows".into()))?;
        if self.input_height % f != 0 || self.input_width % f != 0 {
            return config_err(format!(
                "input {}x{} is not divisible by stride^depth = {f}",
                self.input_height, self.input_width
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return config_err(format!("LeakyReLU slope must lie in (0, 1), got {}", self.leaky_slope));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return config_err("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config_err("learning rate must be positive");
        }
        validate_keep_prob(self.keep_prob)
    }
}

pub(crate) fn validate_keep_prob(keep_prob: f64) -> Result<()> {
    if keep_prob > 0.0 && keep_prob <= 1.0 {
        Ok(())
    } else {
        config_err(format!("keep probability must lie in (0, 1], got {keep_prob}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_latents() {
        let b = CaeConfig::burgers();
        b.validate().unwrap();
        assert_eq!(b.latent_shape(), (8, 8, 64));
        assert_eq!(b.decoder_filters(), vec![64, 32, 16]);
        let w = CaeConfig::wrf();
        w.validate().unwrap();
        assert_eq!(w.latent_shape(), (32, 32, 128));
    }

    #[test]
    fn indivisible_input_is_rejected() {
        let mut c = CaeConfig::burgers();
        c.input_height = 60;
        assert!(c.validate().is_err());
        let mut c = CaeConfig::burgers();
        c.keep_prob = 0.0;
        assert!(c.validate().is_err());
    }
}
