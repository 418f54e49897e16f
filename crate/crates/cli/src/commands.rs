use std::path::{Path, PathBuf};

use gpart_core::adapters::{
    decode_checkpoint, load_checkpoint, save_checkpoint, Adapter, AdapterKind, AnyAdapter,
    FullAdapter, GPartAdapter, GPartMode, LoraAdapter, UniLoraAdapter,
};
use gpart_core::geometry::{dim_sweep, loss_landscape, sweep_to_csv};
use gpart_core::io::{theta_from_csv, theta_to_csv};
use gpart_core::trainer::{finetune, make_task_with, pretrain, Network, TaskData};
use gpart_core::verify::{run_suite, Hooks, Outcome};
use gpart_core::{Error, PartitionMap, Result, WeightVector};

use crate::config::RunConfig;

pub struct Setup {
    pub network: Network,
    pub w0: WeightVector,
    pub task: TaskData,
}

/// Builds the task, pretrains the base model and returns the fine-tuning
/// setting. Deterministic in the config's seeds.
pub fn prepare(cfg: &RunConfig) -> Result<Setup> {
    cfg.validate()?;
    let (pre, task) = make_task_with(cfg.data_seed, &cfg.task_spec())?;
    let net_cfg = cfg.network()?;
    let (full, _) = pretrain(&net_cfg, &pre, cfg.init_seed, &cfg.pretrain_config())?;
    let (network, w0) = if cfg.include_head {
        (Network::new(net_cfg), full)
    } else {
        Network::with_frozen_head(net_cfg, &full)?
    };
    Ok(Setup { network, w0, task })
}

pub fn build_adapter(cfg: &RunConfig, network: &Network) -> Result<AnyAdapter> {
    let manifest = network.manifest().clone();
    let total = manifest.total();
    Ok(match cfg.adapter {
        AdapterKind::GPart => AnyAdapter::GPart(GPartAdapter::build(
            cfg.partition_seed,
            total,
            cfg.d,
            GPartMode::Isometric,
        )?),
        AdapterKind::GPartNonIsometric => AnyAdapter::GPart(GPartAdapter::build(
            cfg.partition_seed,
            total,
            cfg.d,
            GPartMode::NonIsometric,
        )?),
        AdapterKind::Lora => AnyAdapter::Lora(LoraAdapter::new(manifest, cfg.rank, cfg.init_seed)?),
        AdapterKind::UniLora => AnyAdapter::UniLora(UniLoraAdapter::new(
            manifest,
            cfg.rank,
            cfg.d,
            cfg.partition_seed,
            cfg.init_seed,
        )?),
        AdapterKind::Full => AnyAdapter::Full(FullAdapter::new(total)),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn verify(filter: Option<&str>, hooks: &Hooks) -> Vec<Outcome> {
    let outcomes = run_suite(filter, hooks);
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    outcomes
}

pub fn train(config_path: &Path) -> Result<PathBuf> {
    let cfg = RunConfig::load(config_path)?;
    let setup = prepare(&cfg)?;
    let mut adapter = build_adapter(&cfg, &setup.network)?;
    let record = finetune(
        &mut adapter,
        &setup.network,
        &setup.w0,
        &setup.task,
        &cfg.train_config(),
    )?;
    let out = &cfg.output_dir;
    write_file(&out.join("resolved_config.txt"), cfg.to_text())?;
    write_file(&out.join("train_record.csv"), record.to_csv())?;
    if let Some(g) = adapter.as_gpart() {
        write_file(
            &out.join("checkpoint.gprt"),
            gpart_core::adapters::encode_checkpoint(g),
        )?;
    }
    let (_, frozen_acc) = setup.network.evaluate(&setup.w0, &setup.task.dev_batch())?;
    println!(
        "adapter {} with {} trainable of N = {}",
        adapter.kind(),
        adapter.count_trainable(),
        adapter.total()
    );
    println!("frozen dev_acc {frozen_acc:.4}");
    if let Some(best) = record.best() {
        println!(
            "best epoch {} dev_acc {:.4} dev_loss {:.6}",
            best.epoch, best.dev_acc, best.dev_loss
        );
    }
    println!("wrote {}", out.display());
    Ok(out.clone())
}

pub fn landscape(
    config_path: &Path,
    checkpoint: &Path,
    out: Option<&Path>,
    parallel: bool,
) -> Result<PathBuf> {
    let cfg = RunConfig::load(config_path)?;
    let setup = prepare(&cfg)?;
    let adapter = load_checkpoint(checkpoint, setup.network.manifest())?;
    let mut spec = cfg.landscape_spec();
    spec.parallel |= parallel;
    let grid = loss_landscape(&adapter, &setup.network, &setup.w0, &setup.task, &spec)?;
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("landscape.csv"));
    write_file(&path, grid.to_csv())?;
    for (seed, s, i, j) in grid
        .flagged
        .iter()
        .map(|&(s, i, j)| (grid.seeds[s], s, i, j))
    {
        eprintln!("non-finite loss at seed {seed} (index {s}), cell ({i}, {j})");
    }
    let (ci, cj) = grid.center();
    println!("center loss {:.10}", grid.mean[(ci, cj)]);
    println!("wrote {}", path.display());
    Ok(path)
}

pub fn sweep(config_path: &Path, d_values: &[usize], out: Option<&Path>) -> Result<PathBuf> {
    let cfg = RunConfig::load(config_path)?;
    let setup = prepare(&cfg)?;
    let total = setup.network.manifest().total();
    if let Some(bad) = d_values.iter().find(|&&d| d == 0 || d > total) {
        return Err(Error::Parameter(format!(
            "sweep value d = {bad} outside [1, N = {total}]"
        )));
    }
    let rows = dim_sweep(
        d_values,
        &setup.network,
        &setup.w0,
        &setup.task,
        &cfg.train_config(),
        cfg.repeats,
        cfg.partition_seed,
    )?;
    for row in &rows {
        println!("d {:>6}  dev_acc {:.4} ± {:.4}", row.d, row.mean, row.std);
        for f in &row.failures {
            eprintln!("d {}: {f}", row.d);
        }
    }
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("sweep.csv"));
    write_file(&path, sweep_to_csv(&rows))?;
    println!("wrote {}", path.display());
    Ok(path)
}

pub fn pack(
    theta_csv: &Path,
    seed: u64,
    total: usize,
    dim: usize,
    mode: GPartMode,
    out: &Path,
) -> Result<()> {
    let text = std::fs::read_to_string(theta_csv).map_err(|e| Error::io(theta_csv, e))?;
    let theta = theta_from_csv(&text)?;
    if theta.len() != dim {
        return Err(Error::Parameter(format!(
            "theta file has {} values but --dim is {dim}",
            theta.len()
        )));
    }
    let pm = PartitionMap::build(seed, total, dim)?;
    let adapter = GPartAdapter::with_theta(pm, theta.into(), mode)?;
    save_checkpoint(&adapter, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn unpack(checkpoint: &Path, out_csv: &Path) -> Result<()> {
    let bytes = std::fs::read(checkpoint).map_err(|e| Error::io(checkpoint, e))?;
    let adapter = decode_checkpoint(&bytes)?;
    let pm = adapter.partition();
    println!("seed = {}", pm.seed());
    println!("dim = {}", pm.dim());
    println!("total = {}", pm.total());
    println!(
        "mode = {}",
        match adapter.mode() {
            GPartMode::Isometric => "iso",
            GPartMode::NonIsometric => "noniso",
        }
    );
    write_file(out_csv, theta_to_csv(adapter.theta()))
}
