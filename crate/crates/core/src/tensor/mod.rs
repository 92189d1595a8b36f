//! Dense fields and the differentiable kernels the autoencoder is built from.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod field;
pub mod filter;
pub(crate) mod gemm;

pub use activation::ActivationKind;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{
    conv2d_backward, conv2d_forward, deconv2d_backward, deconv2d_forward, ConvGradients, LayerKind,
};
pub use field::Field3;
pub use filter::FilterBank;
