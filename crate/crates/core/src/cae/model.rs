use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::CaeConfig;
use crate::error::{config_err, Result};
use crate::rng::seeded;
use crate::tensor::conv::{backward_traced, forward_traced, LayerKind, LayerTrace};
use crate::tensor::{ActivationKind, Field3, FilterBank};

/// A convolutional autoencoder: `L` strided convolutions down to the latent map,
/// `L` transposed convolutions back up, and a stride-1 output layer mapping
/// `F^(1)` channels to the data's variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeModel {
    pub config: CaeConfig,
    pub encoder: Vec<FilterBank>,
    pub decoder: Vec<FilterBank>,
    pub output: FilterBank,
    pub loss_history: Vec<f64>,
}

/// One layer in evaluation order.
#[derive(Clone, Copy)]
struct Stage {
    kind: LayerKind,
    stride: usize,
    activation: ActivationKind,
}

impl CaeModel {
    /// Fan-scaled uniform initialization drawn from `config.seed`.
    pub fn initialize(config: CaeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed);
        Ok(Self::initialize_with(config, &mut rng))
    }

    pub(crate) fn initialize_with<R: Rng>(config: CaeConfig, rng: &mut R) -> Self {
        let k = config.kernel;
        let mut encoder = Vec::with_capacity(config.depth());
        let mut prev = config.input_channels;
        for &f in &config.filters {
            encoder.push(FilterBank::glorot_uniform(k, prev, f, rng));
            prev = f;
        }
        let mut decoder = Vec::with_capacity(config.depth());
        for f in config.decoder_filters() {
            decoder.push(FilterBank::glorot_uniform(k, prev, f, rng));
            prev = f;
        }
        let output = FilterBank::glorot_uniform(k, prev, config.input_channels, rng);
        Self {
            config,
            encoder,
            decoder,
            output,
            loss_history: Vec::new(),
        }
    }

    /// All-zero weights and biases.
    pub fn zeros(config: CaeConfig) -> Result<Self> {
        config.validate()?;
        let mut m = Self::initialize_with(config, &mut seeded(0));
        for bank in m.banks_mut() {
            bank.weights_mut().fill(0.0);
            bank.biases_mut().fill(0.0);
        }
        Ok(m)
    }

    pub fn latent_shape(&self) -> (usize, usize, usize) {
        self.config.latent_shape()
    }

    /// Banks in declaration order: encoder, decoder, output.
    pub fn banks(&self) -> impl Iterator<Item = &FilterBank> {
        self.encoder.iter().chain(&self.decoder).chain(std::iter::once(&self.output))
    }

    pub fn banks_mut(&mut self) -> impl Iterator<Item = &mut FilterBank> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(std::iter::once(&mut self.output))
    }

    pub fn param_count(&self) -> usize {
        self.banks().map(FilterBank::param_count).sum()
    }

    fn stages(&self) -> Vec<Stage> {
        let act = self.config.encoder_activation();
        let stride = self.config.stride;
        let mut s = Vec::with_capacity(2 * self.config.depth() + 1);
        s.extend(self.encoder.iter().map(|_| Stage {
            kind: LayerKind::Conv,
            stride,
            activation: act,
        }));
        s.extend(self.decoder.iter().map(|_| Stage {
            kind: LayerKind::Deconv,
            stride,
            activation: act,
        }));
        s.push(Stage {
            kind: LayerKind::Conv,
            stride: 1,
            activation: self.config.final_activation,
        });
        s
    }

    fn check_input(&self, x: &Field3) -> Result<()> {
        if x.shape() != self.config.input_shape() {
            return config_err(format!(
                "input shape {:?} does not match the configured {:?}",
                x.shape(),
                self.config.input_shape()
            ));
        }
        Ok(())
    }

    fn check_latent(&self, y: &Field3) -> Result<()> {
        if y.shape() != self.latent_shape() {
            return config_err(format!(
                "latent shape {:?} does not match the configured {:?}",
                y.shape(),
                self.latent_shape()
            ));
        }
        Ok(())
    }

    /// Maps a field to its latent feature map `Y^(L)`.
    pub fn encode(&self, x: &Field3) -> Result<Field3> {
        self.check_input(x)?;
        let stages = self.stages();
        let mut h = x.clone();
        for (bank, st) in self.encoder.iter().zip(&stages) {
            h = forward_traced(st.kind, &h, bank, st.stride, st.activation)?.output;
        }
        Ok(h)
    }

    /// Reconstructs a field from a latent map.
    pub fn decode(&self, y: &Field3) -> Result<Field3> {
        self.check_latent(y)?;
        let stages = self.stages();
        let depth = self.config.depth();
        let mut h = y.clone();
        for (bank, st) in self
            .decoder
            .iter()
            .chain(std::iter::once(&self.output))
            .zip(&stages[depth..])
        {
            h = forward_traced(st.kind, &h, bank, st.stride, st.activation)?.output;
        }
        Ok(h)
    }

    pub fn reconstruct(&self, x: &Field3) -> Result<Field3> {
        self.decode(&self.encode(x)?)
    }

    /// Mean squared reconstruction error of one frame and its parameter gradients,
    /// in bank declaration order.
    pub fn loss_and_gradients(&self, x: &Field3) -> Result<(f64, Vec<FilterBank>)> {
        self.check_input(x)?;
        let stages = self.stages();
        let banks: Vec<&FilterBank> = self.banks().collect();
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(banks.len());
        for (i, (bank, st)) in banks.iter().zip(&stages).enumerate() {
            let input = if i == 0 { x } else { &traces[i - 1].output };
            let t = forward_traced(st.kind, input, bank, st.stride, st.activation)?;
            traces.push(t);
        }
        let recon = &traces.last().expect("at least one layer").output;
        let n = x.len() as f64;
        let mut loss = 0.0;
        let mut upstream = Field3::zeros(x.height(), x.width(), x.channels());
        for ((g, &r), &t) in upstream
            .as_mut_slice()
            .iter_mut()
            .zip(recon.as_slice())
            .zip(x.as_slice())
        {
            let d = r - t;
            loss += d * d;
            *g = 2.0 * d / n;
        }
        loss /= n;

        let mut grads: Vec<Option<FilterBank>> = vec![None; banks.len()];
        for i in (0..banks.len()).rev() {
            let st = stages[i];
            let (gi, gf) = backward_traced(&traces[i], banks[i], st.activation, &upstream, i > 0)?;
            grads[i] = Some(gf);
            if let Some(gi) = gi {
                upstream = gi;
            }
        }
        Ok((loss, grads.into_iter().map(|g| g.expect("filled")).collect()))
    }
}
