use serde::{Deserialize, Serialize};

/// Slope used on the negative branch of the encoder/decoder LeakyReLU.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    LeakyRelu { slope: f64 },
    Sigmoid,
    Identity,
    Tanh,
    /// Normalizes exponentials across the channel axis of each pixel.
    SoftmaxOverChannels,
}

impl ActivationKind {
    pub fn leaky_relu() -> Self {
        ActivationKind::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn is_pointwise(&self) -> bool {
        !matches!(self, ActivationKind::SoftmaxOverChannels)
    }

    /// Scalar evaluation. Softmax over a single channel is identically 1.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Identity => x,
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::SoftmaxOverChannels => 1.0,
        }
    }

    /// Derivative of a pointwise activation given its input `x` and output `y`.
    #[inline]
    fn derivative(&self, x: f64, y: f64) -> f64 {
        match *self {
            ActivationKind::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Identity => 1.0,
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::SoftmaxOverChannels => unreachable!("softmax is not pointwise"),
        }
    }

    /// Applies the activation to a `[pixel][channel]` buffer of pre-activations.
    pub fn forward(&self, pre: &[f64], channels: usize, out: &mut [f64]) {
        debug_assert_eq!(pre.len(), out.len());
        match self {
            ActivationKind::SoftmaxOverChannels => {
                for (z, y) in pre.chunks_exact(channels).zip(out.chunks_exact_mut(channels)) {
                    softmax(z, y);
                }
            }
            kind => {
                for (y, &z) in out.iter_mut().zip(pre) {
                    *y = kind.apply(z);
                }
            }
        }
    }

    /// Chain rule through the activation: returns dL/dpre given dL/dout.
    pub fn backward(&self, pre: &[f64], out: &[f64], upstream: &[f64], channels: usize) -> Vec<f64> {
        let mut grad = vec![0.0; pre.len()];
        match self {
            ActivationKind::SoftmaxOverChannels => {
                for ((s, g), dz) in out
                    .chunks_exact(channels)
                    .zip(upstream.chunks_exact(channels))
                    .zip(grad.chunks_exact_mut(channels))
                {
                    let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    for c in 0..channels {
                        dz[c] = s[c] * (g[c] - dot);
                    }
                }
            }
            kind => {
                for i in 0..pre.len() {
                    grad[i] = upstream[i] * kind.derivative(pre[i], out[i]);
                }
            }
        }
        grad
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leaky_relu_branches() {
        let g = ActivationKind::leaky_relu();
        assert!((g.apply(-1.0) - (-0.3)).abs() < 1e-15);
        assert_eq!(g.apply(2.0), 2.0);
        assert_eq!(g.apply(0.0), 0.0);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(ActivationKind::Sigmoid.apply(0.0), 0.5);
        assert!(sigmoid(-800.0).is_finite());
        assert!(sigmoid(800.0) == 1.0);
    }

    #[test]
    fn tanh_matches_std() {
        assert_eq!(ActivationKind::Tanh.apply(0.7), 0.7f64.tanh());
    }

    #[test]
    fn softmax_backward_matches_finite_difference() {
        let pre = [0.3, -1.2, 2.0];
        let up = [0.5, -0.25, 1.5];
        let kind = ActivationKind::SoftmaxOverChannels;
        let mut out = [0.0; 3];
        kind.forward(&pre, 3, &mut out);
        let grad = kind.backward(&pre, &out, &up, 3);
        let h = 1e-6;
        for c in 0..3 {
            let mut p = pre;
            let mut m = pre;
            p[c] += h;
            m[c] -= h;
            let (mut yp, mut ym) = ([0.0; 3], [0.0; 3]);
            kind.forward(&p, 3, &mut yp);
            kind.forward(&m, 3, &mut ym);
            let fd: f64 = (0..3).map(|k| up[k] * (yp[k] - ym[k]) / (2.0 * h)).sum();
            assert!((fd - grad[c]).abs() < 1e-9, "{fd} vs {}", grad[c]);
        }
    }

    proptest! {
        #[test]
        fn leaky_relu_with_unit_slope_is_identity(x in -1e6f64..1e6) {
            prop_assert_eq!(ActivationKind::LeakyRelu { slope: 1.0 }.apply(x), x);
        }

        #[test]
        fn softmax_sums_to_one(z in proptest::collection::vec(-50f64..50.0, 1..8)) {
            let mut out = vec![0.0; z.len()];
            ActivationKind::SoftmaxOverChannels.forward(&z, z.len(), &mut out);
            let total: f64 = out.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}
