use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gpart_core::adapters::AdapterKind;
use gpart_core::geometry::LandscapeSpec;
use gpart_core::trainer::{LrSchedule, NetworkConfig, TaskSpec, TrainConfig};
use gpart_core::{Error, Result};

/// Every knob of a run. Parsed from flat `key = value` text; keys not set
/// keep the defaults below, and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub adapter: AdapterKind,
    pub d: usize,
    pub rank: usize,
    pub dims: Vec<usize>,
    pub include_head: bool,
    pub partition_seed: u64,
    pub data_seed: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub schedule: LrSchedule,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub samples: usize,
    pub shift_angle: f64,
    pub cluster_std: f64,
    pub separation: f64,
    pub dev_fraction: f64,
    pub repeats: usize,
    pub grid_size: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub direction_seeds: Vec<u64>,
    pub parallel: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let task = TaskSpec::default();
        let train = TrainConfig::default();
        let land = LandscapeSpec::default();
        Self {
            adapter: AdapterKind::GPart,
            d: 256,
            rank: 2,
            dims: vec![16, 64, 64, 4],
            include_head: true,
            partition_seed: 0,
            data_seed: 0,
            init_seed: 1,
            train_seed: 0,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.lr,
            weight_decay: train.weight_decay,
            warmup_ratio: train.warmup_ratio,
            schedule: train.schedule,
            pretrain_epochs: 20,
            pretrain_lr: train.lr,
            samples: task.samples,
            shift_angle: task.shift_angle,
            cluster_std: task.cluster_std,
            separation: task.separation,
            dev_fraction: task.dev_fraction,
            repeats: 3,
            grid_size: land.grid_size,
            alpha_min: land.alpha_range.0,
            alpha_max: land.alpha_range.1,
            beta_min: land.beta_range.0,
            beta_max: land.beta_range.1,
            direction_seeds: land.direction_seeds,
            parallel: land.parallel,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "adapter",
    "d",
    "rank",
    "dims",
    "include_head",
    "partition_seed",
    "data_seed",
    "init_seed",
    "train_seed",
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "warmup_ratio",
    "schedule",
    "pretrain_epochs",
    "pretrain_lr",
    "samples",
    "shift_angle",
    "cluster_std",
    "separation",
    "dev_fraction",
    "repeats",
    "grid_size",
    "alpha_min",
    "alpha_max",
    "beta_min",
    "beta_max",
    "direction_seeds",
    "parallel",
    "output_dir",
];

fn config_err(key: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_value<T: FromStr>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| config_err(key, line, format!("cannot parse `{raw}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, line: usize, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| parse_value(key, line, s.trim()))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(config_err(content, line, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(config_err(key, line, "unknown key"));
            };
            if seen.contains(&known) {
                return Err(config_err(key, line, "duplicate key"));
            }
            seen.push(known);
            cfg.set(known, line, value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, line: usize, v: &str) -> Result<()> {
        match key {
            "adapter" => self.adapter = parse_value(key, line, v)?,
            "d" => self.d = parse_value(key, line, v)?,
            "rank" => self.rank = parse_value(key, line, v)?,
            "dims" => self.dims = parse_list(key, line, v)?,
            "include_head" => self.include_head = parse_value(key, line, v)?,
            "partition_seed" => self.partition_seed = parse_value(key, line, v)?,
            "data_seed" => self.data_seed = parse_value(key, line, v)?,
            "init_seed" => self.init_seed = parse_value(key, line, v)?,
            "train_seed" => self.train_seed = parse_value(key, line, v)?,
            "epochs" => self.epochs = parse_value(key, line, v)?,
            "batch_size" => self.batch_size = parse_value(key, line, v)?,
            "lr" => self.lr = parse_value(key, line, v)?,
            "weight_decay" => self.weight_decay = parse_value(key, line, v)?,
            "warmup_ratio" => self.warmup_ratio = parse_value(key, line, v)?,
            "schedule" => self.schedule = parse_value(key, line, v)?,
            "pretrain_epochs" => self.pretrain_epochs = parse_value(key, line, v)?,
            "pretrain_lr" => self.pretrain_lr = parse_value(key, line, v)?,
            "samples" => self.samples = parse_value(key, line, v)?,
            "shift_angle" => self.shift_angle = parse_value(key, line, v)?,
            "cluster_std" => self.cluster_std = parse_value(key, line, v)?,
            "separation" => self.separation = parse_value(key, line, v)?,
            "dev_fraction" => self.dev_fraction = parse_value(key, line, v)?,
            "repeats" => self.repeats = parse_value(key, line, v)?,
            "grid_size" => self.grid_size = parse_value(key, line, v)?,
            "alpha_min" => self.alpha_min = parse_value(key, line, v)?,
            "alpha_max" => self.alpha_max = parse_value(key, line, v)?,
            "beta_min" => self.beta_min = parse_value(key, line, v)?,
            "beta_max" => self.beta_max = parse_value(key, line, v)?,
            "direction_seeds" => self.direction_seeds = parse_list(key, line, v)?,
            "parallel" => self.parallel = parse_value(key, line, v)?,
            "output_dir" => {
                if v.is_empty() {
                    return Err(config_err(key, line, "empty path"));
                }
                self.output_dir = PathBuf::from(v)
            }
            _ => unreachable!("key list and setter out of sync: {key}"),
        }
        Ok(())
    }

    /// Every key with its effective value, in `KEYS` order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let value = match *key {
                "adapter" => self.adapter.to_string(),
                "d" => self.d.to_string(),
                "rank" => self.rank.to_string(),
                "dims" => join(&self.dims),
                "include_head" => self.include_head.to_string(),
                "partition_seed" => self.partition_seed.to_string(),
                "data_seed" => self.data_seed.to_string(),
                "init_seed" => self.init_seed.to_string(),
                "train_seed" => self.train_seed.to_string(),
                "epochs" => self.epochs.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "lr" => format!("{:?}", self.lr),
                "weight_decay" => format!("{:?}", self.weight_decay),
                "warmup_ratio" => format!("{:?}", self.warmup_ratio),
                "schedule" => self.schedule.as_str().to_string(),
                "pretrain_epochs" => self.pretrain_epochs.to_string(),
                "pretrain_lr" => format!("{:?}", self.pretrain_lr),
                "samples" => self.samples.to_string(),
                "shift_angle" => format!("{:?}", self.shift_angle),
                "cluster_std" => format!("{:?}", self.cluster_std),
                "separation" => format!("{:?}", self.separation),
                "dev_fraction" => format!("{:?}", self.dev_fraction),
                "repeats" => self.repeats.to_string(),
                "grid_size" => self.grid_size.to_string(),
                "alpha_min" => format!("{:?}", self.alpha_min),
                "alpha_max" => format!("{:?}", self.alpha_max),
                "beta_min" => format!("{:?}", self.beta_min),
                "beta_max" => format!("{:?}", self.beta_max),
                "direction_seeds" => join(&self.direction_seeds),
                "parallel" => self.parallel.to_string(),
                "output_dir" => self.output_dir.display().to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    pub fn network(&self) -> Result<NetworkConfig> {
        NetworkConfig::new(self.dims.clone())
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            samples: self.samples,
            features: self.dims.first().copied().unwrap_or(0),
            classes: self.dims.last().copied().unwrap_or(0),
            shift_angle: self.shift_angle,
            cluster_std: self.cluster_std,
            separation: self.separation,
            dev_fraction: self.dev_fraction,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            weight_decay: self.weight_decay,
            warmup_ratio: self.warmup_ratio,
            schedule: self.schedule,
            seed: self.train_seed,
        }
    }

    pub fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.pretrain_epochs,
            lr: self.pretrain_lr,
            ..self.train_config()
        }
    }

    pub fn landscape_spec(&self) -> LandscapeSpec {
        LandscapeSpec {
            grid_size: self.grid_size,
            alpha_range: (self.alpha_min, self.alpha_max),
            beta_range: (self.beta_min, self.beta_max),
            direction_seeds: self.direction_seeds.clone(),
            parallel: self.parallel,
        }
    }

    /// Checks that only need the config itself (plus the derived manifest).
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Parameter(format!("{key}: {msg}")));
        let total = self.network()?.manifest(self.include_head)?.total();
        let d_bound = match self.adapter {
            AdapterKind::GPart | AdapterKind::GPartNonIsometric => Some(("N", total)),
            AdapterKind::UniLora => Some((
                "D",
                gpart_core::adapters::lora_factor_total(
                    &self.network()?.manifest(self.include_head)?,
                    self.rank.max(1),
                ),
            )),
            AdapterKind::Lora | AdapterKind::Full => None,
        };
        if let Some((name, bound)) = d_bound {
            if self.d == 0 || self.d > bound {
                return bad(
                    "d",
                    format!("must be in [1, {name} = {bound}], got {}", self.d),
                );
            }
        }
        if matches!(self.adapter, AdapterKind::Lora | AdapterKind::UniLora) && self.rank == 0 {
            return bad("rank", "must be at least 1".into());
        }
        if self.epochs == 0 || self.pretrain_epochs == 0 {
            return bad("epochs", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        for (key, v) in [("lr", self.lr), ("pretrain_lr", self.pretrain_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            );
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad(
                "warmup_ratio",
                format!("must be in [0, 1], got {}", self.warmup_ratio),
            );
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad(
                "dev_fraction",
                format!("must be in (0, 1), got {}", self.dev_fraction),
            );
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1".into());
        }
        self.landscape_spec().validate()
    }
}
