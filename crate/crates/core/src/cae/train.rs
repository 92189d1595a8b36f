use log::debug;
use rand::seq::SliceRandom;

use super::config::CaeConfig;
use super::model::CaeModel;
use crate::error::{config_err, CesarError, Result};
use crate::rng::{derive_seed, seeded};
use crate::series::GridSeries;
use crate::tensor::{AdamConfig, AdamState, Field3, FilterBank};

/// Trains an autoencoder on every frame of `data`, treating frames as independent samples.
pub fn train_cae(data: &GridSeries, config: &CaeConfig) -> Result<CaeModel> {
    train_on_frames(&data.frames, config)
}

/// Minibatch ADAM on the mean squared reconstruction error.
///
/// Each epoch visits the frames in a freshly shuffled order; the final batch may be
/// short. The recorded loss of an epoch is the mean per-frame loss evaluated before
/// each frame's update.
pub fn train_on_frames(frames: &[Field3], config: &CaeConfig) -> Result<CaeModel> {
    config.validate()?;
    if frames.len() < config.batch_size {
        return config_err(format!(
            "{} training frames are fewer than the batch size {}",
            frames.len(),
            config.batch_size
        ));
    }
    let mut model = CaeModel::initialize(config.clone())?;
    let sizes: Vec<usize> = model
        .banks()
        .flat_map(|b| [b.weights().len(), b.biases().len()])
        .collect();
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(config.learning_rate), &sizes)?;
    let mut shuffle_rng = seeded(derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..frames.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = batch_gradients(&model, frames, batch)?;
            if !loss.is_finite() {
                return Err(CesarError::Divergence { epoch, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            apply_update(&mut model, &grads, &mut adam)?;
        }
        let mean = epoch_loss / frames.len() as f64;
        if !mean.is_finite() {
            return Err(CesarError::Divergence { epoch, loss: mean });
        }
        if epoch == 1 || epoch % 50 == 0 || epoch == config.epochs {
            debug!("cae epoch {epoch}: loss {mean:.3e}");
        }
        model.loss_history.push(mean);
    }
    Ok(model)
}

/// Mean loss over the batch and the matching mean gradient.
fn batch_gradients(model: &CaeModel, frames: &[Field3], batch: &[usize]) -> Result<(f64, Vec<FilterBank>)> {
    let mut total_loss = 0.0;
    let mut acc: Option<Vec<FilterBank>> = None;
    for &i in batch {
        let (loss, grads) = model.loss_and_gradients(&frames[i])?;
        total_loss += loss;
        match acc.as_mut() {
            None => acc = Some(grads),
            Some(sum) => {
                for (s, g) in sum.iter_mut().zip(&grads) {
                    for (a, b) in s.weights_mut().iter_mut().zip(g.weights()) {
                        *a += b;
                    }
                    for (a, b) in s.biases_mut().iter_mut().zip(g.biases()) {
                        *a += b;
                    }
                }
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = acc.expect("batch is non-empty");
    if batch.len() > 1 {
        for g in grads.iter_mut() {
            g.weights_mut().iter_mut().for_each(|v| *v *= scale);
            g.biases_mut().iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok((total_loss * scale, grads))
}

fn apply_update(model: &mut CaeModel, grads: &[FilterBank], adam: &mut AdamState) -> Result<()> {
    let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * grads.len());
    for bank in model.banks_mut() {
        let (w, b) = bank.params_mut();
        params.push(w);
        params.push(b);
    }
    let g: Vec<&[f64]> = grads.iter().flat_map(|b| [b.weights(), b.biases()]).collect();
    adam.update(&mut params, &g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(epochs: usize) -> CaeConfig {
        CaeConfig {
            input_height: 8,
            input_width: 8,
            input_channels: 1,
            filters: vec![4, 8],
            epochs,
            batch_size: 2,
            learning_rate: 1e-2,
            seed: 17,
            ..CaeConfig::burgers()
        }
    }

    fn wave_frames(n: usize) -> Vec<Field3> {
        (0..n)
            .map(|t| {
                let mut f = Field3::zeros(8, 8, 1);
                for i in 0..8 {
                    for j in 0..8 {
                        let v = 0.5 + 0.4 * ((i as f64 + t as f64 * 0.3) * 0.7).sin() * (j as f64 * 0.5).cos();
                        f.set(i, j, 0, v);
                    }
                }
                f
            })
            .collect()
    }

    #[test]
    fn constant_field_is_learned_quickly() {
        let frames = vec![Field3::filled(8, 8, 1, 0.62); 4];
        let model = train_on_frames(&frames, &tiny_config(50)).unwrap();
        let last = *model.loss_history.last().unwrap();
        assert_eq!(model.loss_history.len(), 50);
        assert!(last < 1e-4, "final loss {last}");
        assert!(last < model.loss_history[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let frames = wave_frames(5);
        let a = train_on_frames(&frames, &tiny_config(4)).unwrap();
        let b = train_on_frames(&frames, &tiny_config(4)).unwrap();
        assert_eq!(a, b);
        let bits = |m: &CaeModel| -> Vec<u64> { m.banks().flat_map(|b| b.weights().iter().map(|w| w.to_bits())).collect() };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn loss_decreases_on_smooth_fields() {
        let frames = wave_frames(6);
        let model = train_on_frames(&frames, &tiny_config(60)).unwrap();
        let h = &model.loss_history;
        let half = h.len() / 2;
        let first: f64 = h[..half].iter().sum::<f64>() / half as f64;
        let second: f64 = h[half..].iter().sum::<f64>() / (h.len() - half) as f64;
        assert!(second <= first);
    }

    #[test]
    fn too_few_frames_is_rejected() {
        let frames = wave_frames(1);
        assert!(train_on_frames(&frames, &tiny_config(1)).is_err());
    }
}
