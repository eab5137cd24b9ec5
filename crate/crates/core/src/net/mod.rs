//! Equivariant network: configuration, expansion coefficients, filter
//! synthesis, the lifting and joint convolutions, and the forward pass.

mod coeffs;
mod config;
mod conv;
mod model;

pub use coeffs::{aggregate_pairs, fb_norm, filter_bound_a, load_coeffs, normalize_coeffs_a2, save_coeffs, CoeffTensor};
pub use config::{ConfigFile, LayerSpec, NetworkConfig, Nonlinearity, PerLayer};
pub use conv::{
    alpha_taps, correlate_add, group_pool, joint_conv, lifting_conv, synthesize_filters,
    theta_taps, LayerFilters,
};
pub use model::{forward, Model, Network};
