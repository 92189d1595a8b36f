use super::eof::Eof;
use super::reservoir::ReservoirLayer;
use crate::error::{CesarError, Result};

/// Scratch buffers for one layer update.
#[derive(Clone, Debug, Default)]
pub(crate) struct StepBuffers {
    recurrent: Vec<f64>,
    input: Vec<f64>,
}

/// `h ← (1−α)·h + α·tanh(scale·W·h + W_in·x)`.
pub(crate) fn step_layer(
    layer: &ReservoirLayer,
    alpha: f64,
    scale: f64,
    h: &mut [f64],
    x: &[f64],
    buf: &mut StepBuffers,
) {
    let n = h.len();
    buf.recurrent.resize(n, 0.0);
    buf.input.resize(n, 0.0);
    layer.recurrent.mul_vec_into(h, scale, &mut buf.recurrent);
    layer.input.mul_vec_into(x, 1.0, &mut buf.input);
    for ((hi, r), u) in h.iter_mut().zip(&buf.recurrent).zip(&buf.input) {
        *hi = (1.0 - alpha) * *hi + alpha * (r + u).tanh();
    }
}

fn check_finite(inputs: &[Vec<f64>]) -> Result<()> {
    if let Some(t) = inputs.iter().position(|z| z.iter().any(|v| !v.is_finite())) {
        return Err(CesarError::Numeric(format!("reservoir input {t} is not finite")));
    }
    Ok(())
}

/// Runs one layer over `inputs` from `h0` (zero when `None`), returning the state
/// after each input.
pub fn run_layer(
    layer: &ReservoirLayer,
    inputs: &[Vec<f64>],
    alpha: f64,
    zeta: f64,
    h0: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>> {
    check_finite(inputs)?;
    let n = layer.recurrent.rows();
    if let Some(z) = inputs.iter().find(|z| z.len() != layer.input.cols()) {
        return Err(CesarError::Config(format!(
            "reservoir expects inputs of length {}, got {}",
            layer.input.cols(),
            z.len()
        )));
    }
    let mut h = match h0 {
        Some(h0) if h0.len() == n => h0.to_vec(),
        Some(h0) => {
            return Err(CesarError::Config(format!(
                "initial state has length {}, reservoir has {n} units",
                h0.len()
            )))
        }
        None => vec![0.0; n],
    };
    let scale = layer.recurrent_scale(zeta);
    let mut buf = StepBuffers::default();
    let mut out = Vec::with_capacity(inputs.len());
    for z in inputs {
        step_layer(layer, alpha, scale, &mut h, z, &mut buf);
        out.push(h.clone());
    }
    Ok(out)
}

/// Runs a stack of layers from zero states. Layer `d > 0` reads `eofs[d-1]`
/// projections of layer `d-1`. Returns one state sequence per layer.
pub fn update_states(
    layers: &[ReservoirLayer],
    eofs: &[Eof],
    inputs: &[Vec<f64>],
    alpha: f64,
    scaling: &[f64],
) -> Result<Vec<Vec<Vec<f64>>>> {
    if eofs.len() + 1 != layers.len() || scaling.len() != layers.len() {
        return Err(CesarError::Config(format!(
            "{} layers need {} reductions and scalings",
            layers.len(),
            layers.len().saturating_sub(1)
        )));
    }
    let mut all = Vec::with_capacity(layers.len());
    let mut current = run_layer(&layers[0], inputs, alpha, scaling[0], None)?;
    for d in 1..layers.len() {
        let reduced: Vec<Vec<f64>> = current.iter().map(|h| eofs[d - 1].project(h)).collect();
        all.push(current);
        current = run_layer(&layers[d], &reduced, alpha, scaling[d], None)?;
    }
    all.push(current);
    Ok(all)
}
