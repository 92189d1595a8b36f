use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Square convolution filters `w[a][b][f_in][f_out]` plus one bias per output channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl FilterBank {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel,
            in_channels,
            out_channels,
            weights: vec![0.0; kernel * kernel * in_channels * out_channels],
            biases: vec![0.0; out_channels],
        }
    }

    pub fn from_parts(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if kernel == 0 || in_channels == 0 || out_channels == 0 {
            return config_err("filter bank dimensions must be positive");
        }
        if weights.len() != kernel * kernel * in_channels * out_channels {
            return config_err(format!(
                "filter bank ({kernel}, {kernel}, {in_channels}, {out_channels}) needs {} weights, got {}",
                kernel * kernel * in_channels * out_channels,
                weights.len()
            ));
        }
        if biases.len() != out_channels {
            return config_err(format!(
                "filter bank needs {out_channels} biases, got {}",
                biases.len()
            ));
        }
        Ok(Self {
            kernel,
            in_channels,
            out_channels,
            weights,
            biases,
        })
    }

    /// Uniform on `±sqrt(6 / (k·k·(F_in + F_out)))`, biases zero.
    pub fn glorot_uniform<R: Rng + ?Sized>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (kernel * kernel * (in_channels + out_channels)) as f64).sqrt();
        let mut bank = Self::zeros(kernel, in_channels, out_channels);
        for w in bank.weights.iter_mut() {
            *w = rng.random_range(-limit..limit);
        }
        bank
    }

    #[inline]
    pub fn kernel(&self) -> usize {
        self.kernel
    }

    #[inline]
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    #[inline]
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    #[inline]
    pub fn weight_index(&self, a: usize, b: usize, f_in: usize, f_out: usize) -> usize {
        ((a * self.kernel + b) * self.in_channels + f_in) * self.out_channels + f_out
    }

    #[inline]
    pub fn weight(&self, a: usize, b: usize, f_in: usize, f_out: usize) -> f64 {
        self.weights[self.weight_index(a, b, f_in, f_out)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Mutable weights and biases at once, for optimizer updates.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn same_shape(&self, other: &FilterBank) -> bool {
        self.kernel == other.kernel
            && self.in_channels == other.in_channels
            && self.out_channels == other.out_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_respects_fan_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bank = FilterBank::glorot_uniform(3, 16, 32, &mut rng);
        let limit = (6.0f64 / (9.0 * 48.0)).sqrt();
        assert!(bank.weights().iter().all(|w| w.abs() <= limit));
        assert!(bank.biases().iter().all(|&b| b == 0.0));
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(bank, FilterBank::glorot_uniform(3, 16, 32, &mut rng2));
    }

    #[test]
    fn from_parts_validates() {
        assert!(FilterBank::from_parts(3, 1, 1, vec![0.0; 8], vec![0.0]).is_err());
        assert!(FilterBank::from_parts(3, 1, 1, vec![0.0; 9], vec![]).is_err());
        assert!(FilterBank::from_parts(3, 1, 1, vec![0.0; 9], vec![0.0]).is_ok());
    }
}
