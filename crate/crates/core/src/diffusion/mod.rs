//! Denoising diffusion over normalized spectral features.

mod edm;
mod gradcheck;
mod loss;
mod network;
mod sampler;
mod train;

pub use edm::{estimate_sigma_data, loss_weight, sigma_schedule, EdmConfig, Preconditioning};
pub use gradcheck::{compare_gradients, gradient_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use loss::{loss, loss_and_grad, loss_from_denoised, LossValue, NoiseDraws};
pub use network::{Denoiser, NetworkConfig};
pub use sampler::{heun_sample, initial_noise, sample, sample_with_schedule};
pub use train::{
    ema_decay_at, evaluate_loss, select_batch, train, AdamState, LossRecord, TrainConfig, TrainState, ADAM_EPS,
    BETA1, BETA2,
};
