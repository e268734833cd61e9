//! Masked least-squares training and risk evaluation.

mod fit;
mod grad;
mod loss;
mod mask;
mod optim;

pub use fit::{evaluate_risk, fit, train_lse, FitResult, TrainConfig};
pub use grad::{gradients, loss_and_gradient};
pub use loss::{masked_mse, mse, LossNorm};
pub use mask::{sample_mask, MaskVector};
pub use optim::{Optimizer, OptimizerKind};
