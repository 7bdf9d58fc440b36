//! Differentially private training baselines.

pub mod dp_lr;
pub mod dp_sgd;

pub use dp_lr::{dp_lr_clean, dp_lr_train, noise_scale, output_noise, EPSILON_GRID};
pub use dp_sgd::{approx_epsilon, clip_gradient, dp_sgd_train, DpSgdConfig, DpSgdReport, SIGMA_GRID};
