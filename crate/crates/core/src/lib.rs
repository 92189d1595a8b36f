//! Hierarchical spatio-temporal forecasting: a convolutional autoencoder compresses
//! each gridded frame to a latent map, and an ensemble of deep echo state networks
//! forecasts the latent sequence. Also ships a periodic 2D Burgers' data generator,
//! persistence/PCA baselines with the evaluation metrics, and a wind-power chain.

pub mod burgers;
pub mod cae;
pub mod error;
pub mod esn;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod series;
pub mod tensor;
pub mod wind;

pub use error::{CesarError, Result};
pub use series::{GridSeries, Normalization};
pub use tensor::Field3;
