use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::adapters::{Adapter, FullAdapter};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::rng::seeded;
use crate::weightspace::{norm2, WeightVector};

use super::network::{Network, NetworkConfig};
use super::optim::{lr_factor, LrSchedule, OptimizerState};
use super::task::TaskData;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub schedule: LrSchedule,
    /// Drives minibatch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 5e-3,
            weight_decay: 0.1,
            warmup_ratio: 0.06,
            schedule: LrSchedule::Linear,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the restored dev-selected state.
    pub best_epoch: Option<usize>,
}

impl TrainRecord {
    pub fn best(&self) -> Option<&EpochStats> {
        self.best_epoch.map(|i| &self.epochs[i])
    }

    /// `epoch,train_loss,dev_loss,dev_acc` with 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_loss,dev_acc\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.epoch,
                fmt_sig(e.train_loss),
                fmt_sig(e.dev_loss),
                fmt_sig(e.dev_acc)
            );
        }
        out
    }
}

/// Observed once per optimizer step, before the update is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub grad_w_norm: f64,
    pub grad_params_norm: f64,
}

pub fn finetune<A: Adapter>(
    adapter: &mut A,
    network: &Network,
    w0: &[f64],
    task: &TaskData,
    config: &TrainConfig,
) -> Result<TrainRecord> {
    finetune_observed(adapter, network, w0, task, config, |_| {})
}

/// Minibatch AdamW on the adapter's trainable coordinates with
/// `w = w0 + Δw` formed each step. After training the adapter holds the
/// state with the highest dev accuracy (earliest epoch on ties).
pub fn finetune_observed<A: Adapter>(
    adapter: &mut A,
    network: &Network,
    w0: &[f64],
    task: &TaskData,
    config: &TrainConfig,
    mut observer: impl FnMut(&StepInfo),
) -> Result<TrainRecord> {
    let total = network.manifest().total();
    if adapter.total() != total || w0.len() != total {
        return Err(Error::Parameter(format!(
            "adapter covers N={}, base weights have {}, network manifest has N={total}",
            adapter.total(),
            w0.len()
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    if task.train.is_empty() || task.dev.is_empty() {
        return Err(Error::Parameter(
            "task needs non-empty train and dev splits".into(),
        ));
    }
    let mut record = TrainRecord::default();
    if config.epochs == 0 {
        return Ok(record);
    }

    let mut rng = seeded(config.seed);
    let mut opt = OptimizerState::new(adapter.params().len(), config.lr, config.weight_decay);
    let batches_per_epoch = task.train.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let dev = task.dev_batch();
    let mut order = task.train.clone();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = task.batch(chunk);
            let w = adapter.merge(w0)?;
            let (loss, grad_w) = network
                .loss_and_grad(&w, &batch)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {b}: {e}")))?;
            let grad = adapter.pullback_grad(&grad_w)?;
            observer(&StepInfo {
                epoch,
                batch: b,
                loss,
                grad_w_norm: grad_w.norm(),
                grad_params_norm: norm2(&grad),
            });
            opt.lr = config.lr * lr_factor(config.schedule, config.warmup_ratio, step, total_steps);
            opt.adamw_step(adapter.params_mut(), &grad);
            if adapter.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, batch {b}: non-finite parameters after update"
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            step += 1;
        }

        let w = adapter.merge(w0)?;
        let (dev_loss, dev_acc) = network
            .evaluate(&w, &dev)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}, dev evaluation: {e}")))?;
        record.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / task.train.len() as f64,
            dev_loss,
            dev_acc,
        });
        if best.as_ref().is_none_or(|(acc, _)| dev_acc > *acc) {
            best = Some((dev_acc, adapter.params().to_vec()));
            record.best_epoch = Some(epoch);
        }
    }

    if let Some((_, params)) = best {
        adapter.set_params(&params)?;
    }
    Ok(record)
}

/// Full training of every layer from a seeded random initialization.
/// Returns the trained weights over the full manifest (head included).
pub fn pretrain(
    config: &NetworkConfig,
    task: &TaskData,
    init_seed: u64,
    train: &TrainConfig,
) -> Result<(WeightVector, TrainRecord)> {
    let network = Network::new(config.clone());
    let init = config.init_weights(init_seed);
    let mut adapter = FullAdapter::new(init.len());
    let record = finetune(&mut adapter, &network, &init, task, train)?;
    Ok((adapter.merge(&init)?, record))
}
