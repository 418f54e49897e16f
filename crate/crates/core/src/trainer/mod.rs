//! Desk-scale training: a bias-free tanh MLP with softmax cross-entropy,
//! synthetic Gaussian-cluster tasks with a rotated fine-tuning shift, AdamW,
//! and the subspace fine-tuning loop.

mod finetune;
mod network;
mod optim;
mod task;

pub use finetune::{
    finetune, finetune_observed, pretrain, EpochStats, StepInfo, TrainConfig, TrainRecord,
};
pub use network::{Batch, Network, NetworkConfig};
pub use optim::{lr_factor, LrSchedule, OptimizerState};
pub use task::{make_task, make_task_with, TaskData, TaskSpec};
