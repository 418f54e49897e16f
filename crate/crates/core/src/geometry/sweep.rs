use std::fmt::Write as _;

use crate::adapters::{GPartAdapter, GPartMode};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::trainer::{finetune, Network, TaskData, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub d: usize,
    /// Best dev accuracy of each successful repeat.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single run).
    pub std: f64,
    pub failures: Vec<String>,
}

/// Fine-tunes an isometric GPart adapter for every `d` and repeat, keeping
/// all other settings fixed. Repeat `k` uses partition seed
/// `partition_seed + k` and shuffle seed `train.seed + k`. Failed cells are
/// recorded and the sweep continues.
pub fn dim_sweep(
    d_values: &[usize],
    network: &Network,
    w0: &[f64],
    task: &TaskData,
    train: &TrainConfig,
    repeats: usize,
    partition_seed: u64,
) -> Result<Vec<SweepRow>> {
    let total = network.manifest().total();
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    if let Some(&d) = d_values.iter().find(|&&d| d == 0 || d > total) {
        return Err(Error::Parameter(format!("d={d} outside [1, {total}]")));
    }
    let mut rows = Vec::with_capacity(d_values.len());
    for &d in d_values {
        let mut accuracies = Vec::new();
        let mut failures = Vec::new();
        for k in 0..repeats as u64 {
            let cfg = TrainConfig {
                seed: train.seed.wrapping_add(k),
                ..train.clone()
            };
            let run = GPartAdapter::build(
                partition_seed.wrapping_add(k),
                total,
                d,
                GPartMode::Isometric,
            )
            .and_then(|mut a| finetune(&mut a, network, w0, task, &cfg));
            match run {
                Ok(rec) => match rec.best() {
                    Some(best) => accuracies.push(best.dev_acc),
                    None => failures.push(format!("repeat {k}: no epochs")),
                },
                Err(e) => failures.push(format!("repeat {k}: {e}")),
            }
        }
        let count = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / count;
        let std = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
        } else if accuracies.len() == 1 {
            0.0
        } else {
            f64::NAN
        };
        rows.push(SweepRow {
            d,
            accuracies,
            mean,
            std,
            failures,
        });
    }
    Ok(rows)
}

/// `d,runs,dev_acc_mean,dev_acc_std,failures`
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("d,runs,dev_acc_mean,dev_acc_std,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.d,
            r.accuracies.len(),
            fmt_sig(r.mean),
            fmt_sig(r.std),
            r.failures.len()
        );
    }
    out
}
