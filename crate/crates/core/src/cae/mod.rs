//! Convolutional autoencoder: architecture, reconstruction training, and dropout sampling.

mod config;
mod dropout;
mod model;
mod train;

pub use config::CaeConfig;
pub use dropout::reconstruct_with_dropout;
pub use model::CaeModel;
pub use train::{train_cae, train_on_frames};
