//! Beta-VAE branch: encoder, decoder, density-ratio discriminator and the
//! alternating training update.

mod checkpoint;
mod loss;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use loss::{
    adversarial_loss, discriminator_loss_var, kl_divergence, kl_var, reconstruction_loss, reconstruction_nll_var,
    repeat_rows, total_loss, LossBreakdown, LossWeights, DEFAULT_BETA, DEFAULT_LAMBDA_ADV, DEFAULT_LAMBDA_DIS,
};
pub use model::{reparameterize, EncoderOutput, VaeArch, VaeModel, LOG_VAR_BOUND};
pub use train::{discriminator_objective, objective, train_step, GraphState, Objective, StepConfig};
