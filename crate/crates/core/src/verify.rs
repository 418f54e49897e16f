//! Named executable properties, run by `gpart verify`.
//!
//! Each property is a deterministic, seeded check of one geometric or
//! numerical invariant. [`Hooks`] lets the projection under test be swapped
//! so that a mutated map can be shown to fail by name.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::adapters::{
    decode_checkpoint, encode_checkpoint, lora_delta, Adapter, FullAdapter, GPartAdapter,
    GPartMode, LoraAdapter,
};
use crate::geometry::{
    distortion_probe, gpart_weight_space_landscape, lora_jacobian_blocks, loss_landscape,
    symmetry_suite, LandscapeSpec, ProbeMap,
};
use crate::partition::PartitionMap;
use crate::rng::{gaussian, gaussian_vec, seeded};
use crate::trainer::{
    finetune, finetune_observed, make_task, pretrain, Network, NetworkConfig, TaskData, TrainConfig,
};
use crate::weightspace::{build_manifest, flatten, norm2, sub, unflatten, WeightVector};

pub type ProjectFn = fn(&PartitionMap, &[f64]) -> Vec<f64>;

#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub project: ProjectFn,
}

fn real_project(pm: &PartitionMap, theta: &[f64]) -> Vec<f64> {
    pm.project(theta)
        .expect("theta sized by caller")
        .into_inner()
}

fn unscaled_project(pm: &PartitionMap, theta: &[f64]) -> Vec<f64> {
    pm.broadcast(theta)
        .expect("theta sized by caller")
        .into_inner()
}

impl Default for Hooks {
    fn default() -> Self {
        Self {
            project: real_project,
        }
    }
}

impl Hooks {
    /// Projection with the `1/sqrt(n_j)` scale removed.
    pub fn unscaled_project() -> Self {
        Self {
            project: unscaled_project,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&Hooks) -> Result<String, String>;

const PROPERTIES: &[(&str, Check)] = &[
    ("weightspace.roundtrip", weightspace_roundtrip),
    ("partition.orthonormality", orthonormality),
    ("partition.isometry", isometry),
    ("partition.left_inverse", left_inverse),
    ("partition.projector_idempotent", projector_idempotent),
    ("partition.gradient_norm_bound", gradient_norm_bound),
    ("partition.determinism", partition_determinism),
    ("partition.balance", balance),
    ("adapters.weight_decay_identity", weight_decay_identity),
    ("adapters.nonisometric_scaling", nonisometric_scaling),
    ("adapters.gpart_injectivity", injectivity),
    ("adapters.lora_gauge", lora_gauge),
    ("adapters.lora_scale", lora_scale),
    ("adapters.frobenius_chain", frobenius_chain),
    ("adapters.checkpoint_totality", checkpoint_totality),
    ("trainer.gradient_chain", gradient_chain),
    ("trainer.gradient_norm_per_step", gradient_norm_per_step),
    ("trainer.determinism", training_determinism),
    ("trainer.base_unchanged", base_unchanged),
    ("trainer.full_equals_gpart_d_eq_n", full_equals_gpart),
    ("geometry.landscape_center", landscape_center),
    ("geometry.landscape_dual", landscape_dual),
    ("geometry.jacobian_fd", jacobian_fd),
    ("geometry.distortion_witness", distortion_witness),
    ("geometry.symmetry_suite", symmetry),
];

pub fn property_names() -> Vec<&'static str> {
    PROPERTIES.iter().map(|(n, _)| *n).collect()
}

/// Runs every property whose name contains `filter` (all when `None`).
pub fn run_suite(filter: Option<&str>, hooks: &Hooks) -> Vec<Outcome> {
    PROPERTIES
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(name, check)| {
            let result = std::panic::catch_unwind(|| check(hooks))
                .unwrap_or_else(|_| Err("panicked".to_string()));
            match result {
                Ok(detail) => Outcome {
                    name,
                    passed: true,
                    detail,
                },
                Err(detail) => Outcome {
                    name,
                    passed: false,
                    detail,
                },
            }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: crate::Error) -> String {
    e.to_string()
}

/// `(seed, N, d)` triples with `N <= 2000`, `1 <= d <= N`.
fn random_partitions(count: usize, seed: u64) -> Vec<(u64, usize, usize)> {
    let mut rng = SplitMixShim(crate::rng::SplitMix64::new(seed));
    (0..count)
        .map(|_| {
            let total = 1 + rng.below(2000);
            let dim = 1 + rng.below(total);
            (rng.0.next_u64(), total, dim)
        })
        .collect()
}

struct SplitMixShim(crate::rng::SplitMix64);

impl SplitMixShim {
    fn below(&mut self, bound: usize) -> usize {
        self.0.below(bound as u64) as usize
    }
}

fn weightspace_roundtrip(_: &Hooks) -> Result<String, String> {
    let m = build_manifest(&[(3, 5), (7, 2), (1, 9)]).map_err(e2s)?;
    for seed in 0..20 {
        let v = gaussian_vec(&mut seeded(seed), m.total(), 1.0);
        let back = flatten(&unflatten(&v, &m).map_err(e2s)?, &m).map_err(e2s)?;
        ensure(
            back.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("seed {seed}: round trip not bit-exact"),
        )?;
    }
    Ok("20 random vectors round-trip bit-exactly".into())
}

fn orthonormality(_: &Hooks) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (seed, total, dim) in random_partitions(100, 1) {
        let p = PartitionMap::build(seed, total, dim)
            .map_err(e2s)?
            .materialize()
            .map_err(e2s)?;
        let dev = (p.transpose() * &p - DMatrix::<f64>::identity(dim, dim))
            .abs()
            .max();
        worst = worst.max(dev);
        ensure(dev <= 1e-12, || {
            format!("(seed {seed}, N {total}, d {dim}): max |PᵀP − I| = {dev:e}")
        })?;
    }
    Ok(format!("max |PᵀP − I| = {worst:e} over 100 partitions"))
}

fn isometry(h: &Hooks) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (seed, total, dim) in random_partitions(10, 2) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let mut rng = seeded(seed);
        for _ in 0..100 {
            let a = gaussian_vec(&mut rng, dim, 1.0);
            let b = gaussian_vec(&mut rng, dim, 1.0);
            let dist = norm2(&sub(&a, &b));
            let wdist = norm2(&sub(&(h.project)(&pm, &a), &(h.project)(&pm, &b)));
            let rel = (wdist - dist).abs() / dist;
            worst = worst.max(rel);
            ensure(rel <= 1e-12, || {
                format!("(N {total}, d {dim}): distance ratio off by {rel:e}")
            })?;
        }
    }
    Ok(format!("worst relative distance error {worst:e}"))
}

fn left_inverse(h: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 3) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let theta = gaussian_vec(&mut seeded(seed), dim, 1.0);
        let back = pm.pullback(&(h.project)(&pm, &theta)).map_err(e2s)?;
        let rel = norm2(&sub(&back, &theta)) / norm2(&theta);
        ensure(rel <= 1e-13, || {
            format!("(N {total}, d {dim}): ‖PᵀPθ − θ‖/‖θ‖ = {rel:e}")
        })?;
    }
    Ok("PᵀPθ = θ on 20 partitions".into())
}

fn projector_idempotent(h: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 4) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let v = gaussian_vec(&mut seeded(seed), total, 1.0);
        let once = (h.project)(&pm, &pm.pullback(&v).map_err(e2s)?);
        let twice = (h.project)(&pm, &pm.pullback(&once).map_err(e2s)?);
        let err = sub(&once, &twice)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        ensure(err <= 1e-12, || {
            format!("(N {total}, d {dim}): PPᵀ not idempotent, err {err:e}")
        })?;
    }
    Ok("PPᵀ idempotent on 20 partitions".into())
}

fn gradient_norm_bound(h: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 5) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let mut rng = seeded(seed);
        for _ in 0..50 {
            let g = gaussian_vec(&mut rng, total, 1.0);
            let pg = norm2(&pm.pullback(&g).map_err(e2s)?);
            ensure(pg <= norm2(&g) * (1.0 + 4.0 * f64::EPSILON), || {
                format!("(N {total}, d {dim}): ‖Pᵀg‖ = {pg} > ‖g‖")
            })?;
        }
        let theta = gaussian_vec(&mut rng, dim, 1.0);
        let g = (h.project)(&pm, &theta);
        let pg = norm2(&pm.pullback(&g).map_err(e2s)?);
        let rel = (pg - norm2(&g)).abs() / norm2(&g);
        ensure(rel <= 1e-12, || {
            format!("(N {total}, d {dim}): equality on image(P) off by {rel:e}")
        })?;
    }
    Ok("‖Pᵀg‖ ≤ ‖g‖, equality on image(P)".into())
}

fn partition_determinism(_: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 6) {
        let a = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let b = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        ensure(a == b, || {
            format!("(seed {seed}, N {total}, d {dim}) differs between builds")
        })?;
    }
    let golden = PartitionMap::build(42, 6, 3).map_err(e2s)?;
    ensure(golden.assignment() == [2, 1, 0, 1, 2, 0], || {
        format!(
            "golden (42, 6, 3) assignment changed: {:?}",
            golden.assignment()
        )
    })?;
    Ok("rebuilds identical; golden vector matches".into())
}

fn balance(_: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(50, 7) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let s = pm.group_sizes();
        let (lo, hi) = (s.iter().min().unwrap(), s.iter().max().unwrap());
        ensure(
            *lo >= 1 && hi - lo <= 1 && s.iter().sum::<usize>() == total,
            || format!("(N {total}, d {dim}): sizes in [{lo}, {hi}]"),
        )?;
    }
    Ok("groups nonempty, sizes differ by at most 1".into())
}

fn weight_decay_identity(h: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 8) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let theta = gaussian_vec(&mut seeded(seed), dim, 1.0);
        let t2 = norm2(&theta).powi(2);
        let d2 = norm2(&(h.project)(&pm, &theta)).powi(2);
        let rel = (d2 - t2).abs() / t2;
        ensure(rel <= 1e-12, || {
            format!("(N {total}, d {dim}): ‖Δw‖²/‖θ‖² − 1 = {rel:e}")
        })?;
    }
    Ok("‖Δw‖² = ‖θ‖² on 20 partitions".into())
}

fn nonisometric_scaling(_: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 9) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let theta = gaussian_vec(&mut seeded(seed), dim, 1.0);
        let ratio = norm2(&pm.broadcast(&theta).map_err(e2s)?).powi(2) / norm2(&theta).powi(2);
        let (lo, hi) = ((total / dim) as f64, total.div_ceil(dim) as f64);
        ensure(
            ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12),
            || format!("(N {total}, d {dim}): ratio {ratio} outside [{lo}, {hi}]"),
        )?;
    }
    Ok("‖Δw‖²/‖θ‖² within [⌊N/d⌋, ⌈N/d⌉]".into())
}

fn injectivity(h: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(20, 10) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let mut rng = seeded(seed);
        let a = gaussian_vec(&mut rng, dim, 1.0);
        let b = gaussian_vec(&mut rng, dim, 1.0);
        let gap = norm2(&sub(&(h.project)(&pm, &a), &(h.project)(&pm, &b)));
        let dist = norm2(&sub(&a, &b));
        ensure(gap >= (1.0 - 1e-12) * dist, || {
            format!("(N {total}, d {dim}): gap {gap} < {dist}")
        })?;
    }
    Ok("distinct θ give distinct Δw".into())
}

fn random_matrix(rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

fn lora_gauge(_: &Hooks) -> Result<String, String> {
    let rep = symmetry_suite(
        &random_matrix(3, 7, &mut seeded(1)),
        &random_matrix(6, 3, &mut seeded(2)),
        &(0..20).collect::<Vec<_>>(),
    )
    .map_err(e2s)?;
    let gauge: Vec<_> = rep.checks.iter().filter(|c| c.name == "gauge").collect();
    let worst = gauge.iter().map(|c| c.error).fold(0.0, f64::max);
    ensure(gauge.iter().all(|c| c.passed), || {
        format!("gauge invariance error {worst:e}")
    })?;
    Ok(format!("20 gauge draws, worst relative error {worst:e}"))
}

fn lora_scale(_: &Hooks) -> Result<String, String> {
    let m = build_manifest(&[(5, 4), (3, 6)]).map_err(e2s)?;
    let rank = 2;
    let mut rng = seeded(3);
    for _ in 0..20 {
        let pairs: Vec<_> = m
            .layers()
            .iter()
            .map(|l| {
                (
                    random_matrix(l.rows, rank, &mut rng),
                    random_matrix(rank, l.cols, &mut rng),
                )
            })
            .collect();
        let base = LoraAdapter::from_factors(m.clone(), rank, &pairs).map_err(e2s)?;
        for lambda in [0.1, 10.0] {
            let scaled: Vec<_> = pairs
                .iter()
                .map(|(b, a)| (b * lambda, a / lambda))
                .collect();
            let moved = LoraAdapter::from_factors(m.clone(), rank, &scaled).map_err(e2s)?;
            let rel = norm2(&sub(&moved.delta(), &base.delta())) / base.delta().norm();
            ensure(rel <= 1e-10, || {
                format!("λ={lambda}: ΔW changed by {rel:e}")
            })?;
            ensure(moved.params() != base.params(), || {
                "factor coordinates did not move".into()
            })?;
        }
    }
    Ok("(λB, A/λ) leaves ΔW unchanged for λ ∈ {0.1, 10}".into())
}

fn frobenius_chain(_: &Hooks) -> Result<String, String> {
    let mut rng = seeded(4);
    for i in 0..1000 {
        let r = 1 + i % 4;
        let (b, a) = (random_matrix(6, r, &mut rng), random_matrix(r, 5, &mut rng));
        let ba = (&b * &a).norm();
        let prod = b.norm() * a.norm();
        let half = 0.5 * (a.norm_squared() + b.norm_squared());
        ensure(
            ba <= prod * (1.0 + 1e-15) && prod <= half * (1.0 + 1e-15),
            || format!("pair {i}: {ba} <= {prod} <= {half} violated"),
        )?;
    }
    Ok("‖BA‖ ≤ ‖B‖‖A‖ ≤ ½(‖A‖² + ‖B‖²) on 1000 pairs".into())
}

fn checkpoint_totality(_: &Hooks) -> Result<String, String> {
    for (seed, total, dim) in random_partitions(10, 11) {
        let pm = PartitionMap::build(seed, total, dim).map_err(e2s)?;
        let mut rng = seeded(seed);
        let theta = gaussian_vec(&mut rng, dim, 1.0);
        let w0 = gaussian_vec(&mut rng, total, 1.0);
        let a = GPartAdapter::with_theta(pm, theta.into(), GPartMode::Isometric).map_err(e2s)?;
        let b = decode_checkpoint(&encode_checkpoint(&a)).map_err(e2s)?;
        let (wa, wb) = (a.merge(&w0).map_err(e2s)?, b.merge(&w0).map_err(e2s)?);
        ensure(
            wa.iter()
                .zip(wb.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()),
            || format!("(N {total}, d {dim}): reloaded merge differs"),
        )?;
    }
    Ok("merge(load(save(a))) bit-identical".into())
}

struct Fixture {
    network: Network,
    w0: WeightVector,
    task: TaskData,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let config = NetworkConfig::new(vec![6, 10, 3]).expect("valid dims");
        let (pre, fine) = make_task(3, 240, 6, 3, 0.9).expect("valid task");
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 16,
            lr: 0.02,
            ..TrainConfig::default()
        };
        let (w0, _) = pretrain(&config, &pre, 4, &cfg).expect("pretraining converges");
        Fixture {
            network: Network::new(config),
            w0,
            task: fine,
        }
    })
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 16,
        lr: 0.02,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn gradient_chain(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let dim = 40;
    let pm = PartitionMap::build(6, f.w0.len(), dim).map_err(e2s)?;
    let theta = gaussian_vec(&mut seeded(7), dim, 0.1);
    let batch = f.task.train_batch();
    let loss_at = |t: &[f64]| -> Result<f64, String> {
        let a = GPartAdapter::with_theta(pm.clone(), t.to_vec().into(), GPartMode::Isometric)
            .map_err(e2s)?;
        f.network
            .loss(&a.merge(&f.w0).map_err(e2s)?, &batch)
            .map_err(e2s)
    };
    let a = GPartAdapter::with_theta(pm.clone(), theta.clone().into(), GPartMode::Isometric)
        .map_err(e2s)?;
    let (_, gw) = f
        .network
        .loss_and_grad(&a.merge(&f.w0).map_err(e2s)?, &batch)
        .map_err(e2s)?;
    let analytic = a.pullback_grad(&gw).map_err(e2s)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for j in 0..dim {
        let (mut p, mut m) = (theta.clone(), theta.clone());
        p[j] += h;
        m[j] -= h;
        let fd = (loss_at(&p)? - loss_at(&m)?) / (2.0 * h);
        let rel = (fd - analytic[j]).abs() / fd.abs().max(analytic[j].abs()).max(1e-8);
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || {
            format!("component {j}: fd {fd} vs analytic {}", analytic[j])
        })?;
    }
    Ok(format!(
        "∇θ = Pᵀ∇w matches central differences (worst rel {worst:e})"
    ))
}

fn gradient_norm_per_step(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let mut a = GPartAdapter::build(8, f.w0.len(), 30, GPartMode::Isometric).map_err(e2s)?;
    let mut violations = 0;
    let mut steps = 0;
    finetune_observed(&mut a, &f.network, &f.w0, &f.task, &quick_train(), |s| {
        steps += 1;
        if s.grad_params_norm > s.grad_w_norm * (1.0 + 4.0 * f64::EPSILON) {
            violations += 1;
        }
    })
    .map_err(e2s)?;
    ensure(violations == 0, || {
        format!("{violations} of {steps} steps had ‖∇θ‖ > ‖∇w‖")
    })?;
    Ok(format!("‖∇θ‖ ≤ ‖∇w‖ at all {steps} steps"))
}

fn training_determinism(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let run = || -> Result<(Vec<f64>, String), String> {
        let mut a = GPartAdapter::build(9, f.w0.len(), 25, GPartMode::Isometric).map_err(e2s)?;
        let rec = finetune(&mut a, &f.network, &f.w0, &f.task, &quick_train()).map_err(e2s)?;
        Ok((a.params().to_vec(), rec.to_csv()))
    };
    ensure(run()? == run()?, || "two identical runs diverged".into())?;
    Ok("identical records and parameters across runs".into())
}

fn base_unchanged(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let w0 = f.w0.clone();
    let mut a = GPartAdapter::build(10, w0.len(), 25, GPartMode::Isometric).map_err(e2s)?;
    finetune(&mut a, &f.network, &w0, &f.task, &quick_train()).map_err(e2s)?;
    ensure(w0 == f.w0, || "w0 modified by fine-tuning".into())?;
    Ok("w0 bit-identical after fine-tuning".into())
}

fn full_equals_gpart(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let total = f.w0.len();
    let mut losses_full = Vec::new();
    let mut losses_gpart = Vec::new();
    let mut full = FullAdapter::new(total);
    finetune_observed(&mut full, &f.network, &f.w0, &f.task, &quick_train(), |s| {
        losses_full.push(s.loss)
    })
    .map_err(e2s)?;
    let mut gp = GPartAdapter::build(11, total, total, GPartMode::Isometric).map_err(e2s)?;
    finetune_observed(&mut gp, &f.network, &f.w0, &f.task, &quick_train(), |s| {
        losses_gpart.push(s.loss)
    })
    .map_err(e2s)?;
    let worst = losses_full
        .iter()
        .zip(&losses_gpart)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(
        losses_full.len() == losses_gpart.len() && worst <= 1e-9,
        || format!("trajectories differ by {worst:e}"),
    )?;
    Ok(format!(
        "d = N trajectory matches full fine-tuning (max diff {worst:e})"
    ))
}

fn small_landscape() -> LandscapeSpec {
    LandscapeSpec {
        grid_size: 6,
        direction_seeds: vec![0, 1],
        ..LandscapeSpec::default()
    }
}

fn trained_gpart() -> Result<GPartAdapter, String> {
    let f = fixture();
    let mut a = GPartAdapter::build(12, f.w0.len(), 20, GPartMode::Isometric).map_err(e2s)?;
    finetune(&mut a, &f.network, &f.w0, &f.task, &quick_train()).map_err(e2s)?;
    Ok(a)
}

fn landscape_center(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let a = trained_gpart()?;
    let grid = loss_landscape(&a, &f.network, &f.w0, &f.task, &small_landscape()).map_err(e2s)?;
    let at_star = f
        .network
        .loss(&a.merge(&f.w0).map_err(e2s)?, &f.task.dev_batch())
        .map_err(e2s)?;
    let (ci, cj) = grid.center();
    for (s, m) in grid.per_seed.iter().enumerate() {
        ensure(m[(ci, cj)] == at_star, || {
            format!("seed index {s}: center {} vs {at_star}", m[(ci, cj)])
        })?;
    }
    Ok("center cell equals dev loss at θ*".into())
}

fn landscape_dual(_: &Hooks) -> Result<String, String> {
    let f = fixture();
    let a = trained_gpart()?;
    let spec = small_landscape();
    let g1 = loss_landscape(&a, &f.network, &f.w0, &f.task, &spec).map_err(e2s)?;
    let g2 = gpart_weight_space_landscape(&a, &f.network, &f.w0, &f.task, &spec).map_err(e2s)?;
    let worst = (&g1.mean - &g2.mean).amax();
    ensure(worst <= 1e-12, || {
        format!("dual evaluation differs by {worst:e}")
    })?;
    Ok(format!(
        "subspace and weight-space grids agree to {worst:e}"
    ))
}

fn jacobian_fd(_: &Hooks) -> Result<String, String> {
    let mut rng = seeded(13);
    let (a, b) = (random_matrix(3, 5, &mut rng), random_matrix(4, 3, &mut rng));
    let (j_a, j_b) = lora_jacobian_blocks(&a, &b).map_err(e2s)?;
    let vec_ba = |a: &DMatrix<f64>, b: &DMatrix<f64>| b * a;
    let h = 1e-6;
    let check = |j: &DMatrix<f64>, k: usize, fd: DMatrix<f64>| -> Result<(), String> {
        let col = j.column(k);
        let err = fd
            .as_slice()
            .iter()
            .zip(col.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        ensure(err <= 1e-7 * col.amax().max(1.0), || {
            format!("column {k}: error {err:e}")
        })
    };
    for k in 0..a.len() {
        let (mut p, mut m) = (a.clone(), a.clone());
        p[k] += h;
        m[k] -= h;
        check(&j_a, k, (vec_ba(&p, &b) - vec_ba(&m, &b)) / (2.0 * h))?;
    }
    for k in 0..b.len() {
        let (mut p, mut m) = (b.clone(), b.clone());
        p[k] += h;
        m[k] -= h;
        check(&j_b, k, (vec_ba(&a, &p) - vec_ba(&a, &m)) / (2.0 * h))?;
    }
    Ok("J_A = I⊗B and J_B = Aᵀ⊗I match finite differences".into())
}

fn distortion_witness(h: &Hooks) -> Result<String, String> {
    let pm = PartitionMap::build(14, 64, 16).map_err(e2s)?;
    let mut rng = seeded(15);
    let mut ratios = Vec::new();
    for _ in 0..200 {
        let x = gaussian_vec(&mut rng, 16, 1.0);
        let y = gaussian_vec(&mut rng, 16, 1.0);
        ratios
            .push(norm2(&sub(&(h.project)(&pm, &x), &(h.project)(&pm, &y))) / norm2(&sub(&x, &y)));
    }
    let spread = ratios.iter().copied().fold(f64::MIN, f64::max)
        / ratios.iter().copied().fold(f64::MAX, f64::min);
    let iso_ok = ratios.iter().all(|r| (r - 1.0).abs() <= 1e-12);
    ensure(iso_ok && spread <= 1.0 + 1e-12, || {
        format!("GPart spread {spread}")
    })?;
    let lora = distortion_probe(
        &ProbeMap::Lora {
            manifest: build_manifest(&[(8, 8)]).map_err(e2s)?,
            rank: 2,
        },
        200,
        16,
    )
    .map_err(e2s)?;
    ensure(lora.spread > 1.0, || {
        format!("LoRA spread {} not above 1", lora.spread)
    })?;
    let check = lora_delta(&build_manifest(&[(8, 8)]).map_err(e2s)?, 2, &[0.0; 32]).map_err(e2s)?;
    ensure(check.iter().all(|&x| x == 0.0), || {
        "LoRA map does not send 0 to 0".into()
    })?;
    Ok(format!(
        "GPart spread {spread}, LoRA spread {:.3}",
        lora.spread
    ))
}

fn symmetry(_: &Hooks) -> Result<String, String> {
    let mut rng = seeded(17);
    let (a, b) = (random_matrix(2, 8, &mut rng), random_matrix(8, 2, &mut rng));
    let rep = symmetry_suite(&a, &b, &(0..20).collect::<Vec<_>>()).map_err(e2s)?;
    ensure(rep.all_passed(), || {
        let names: Vec<String> = rep
            .failures()
            .map(|c| format!("{}@{}", c.name, c.seed))
            .collect();
        format!("failed: {}", names.join(", "))
    })?;
    Ok(format!("{} checks over 20 draws", rep.checks.len()))
}
