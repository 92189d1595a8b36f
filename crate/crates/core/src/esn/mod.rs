//! Deep echo state networks: sparse random reservoirs, leaky tanh state updates,
//! EOF reduction between layers, ridge readouts, and reservoir ensembles.

mod config;
mod ensemble;
mod eof;
mod member;
mod readout;
mod reservoir;
mod states;

pub use config::{leak_rate_grid, scaling_grid, EsnConfig};
pub use ensemble::{ensemble_forecast, member_seed, tune, EsnEnsemble, TUNING_MEMBERS};
pub use eof::{eof_reduce, Eof};
pub use member::{lagged_inputs, EsnMember, MemberState, Standardizer};
pub use readout::{fit_ridge, residual_variance};
pub use reservoir::{power_iteration_radius, sample_layers, spectral_radius, ReservoirLayer, SparseMatrix};
pub use states::{run_layer, update_states};
