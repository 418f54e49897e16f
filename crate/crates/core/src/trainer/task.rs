use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{gaussian, gaussian_vec, seeded};

use super::network::Batch;

/// Synthetic transfer task: isotropic Gaussian class clusters whose means
/// share one norm (so the classes are separable without biases), with a
/// fine-tuning copy whose inputs are rotated inside a 2-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// Rotation angle in radians applied to fine-tuning inputs.
    pub shift_angle: f64,
    pub cluster_std: f64,
    /// Minimum pairwise distance between class means, in units of `cluster_std`.
    pub separation: f64,
    pub dev_fraction: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            samples: 1200,
            features: 16,
            classes: 4,
            shift_angle: 2.6,
            cluster_std: 1.0,
            separation: 4.0,
            dev_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    /// One row per sample.
    pub inputs: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
}

impl TaskData {
    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn features(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let inputs = DMatrix::from_fn(self.features(), indices.len(), |r, c| {
            self.inputs[(indices[c], r)]
        });
        Batch {
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn dev_batch(&self) -> Batch {
        self.batch(&self.dev)
    }

    pub fn train_batch(&self) -> Batch {
        self.batch(&self.train)
    }
}

pub fn make_task(
    seed: u64,
    samples: usize,
    features: usize,
    classes: usize,
    shift_angle: f64,
) -> Result<(TaskData, TaskData)> {
    make_task_with(
        seed,
        &TaskSpec {
            samples,
            features,
            classes,
            shift_angle,
            ..TaskSpec::default()
        },
    )
}

/// Returns `(pretrain, finetune)`. Both share class means, labels and the
/// train/dev split; the fine-tuning inputs are a fresh draw rotated by
/// `shift_angle`.
pub fn make_task_with(seed: u64, spec: &TaskSpec) -> Result<(TaskData, TaskData)> {
    if spec.classes < 2 || spec.samples < spec.classes || spec.features < 2 {
        return Err(Error::Parameter(format!(
            "task needs samples >= classes >= 2 and features >= 2 (got {} samples, {} classes, {} features)",
            spec.samples, spec.classes, spec.features
        )));
    }
    if !(spec.cluster_std > 0.0 && spec.separation > 0.0 && spec.shift_angle.is_finite()) {
        return Err(Error::Parameter(
            "cluster std, separation and angle must be finite and positive".into(),
        ));
    }
    let dev_count = ((spec.samples as f64 * spec.dev_fraction).round() as usize).max(1);
    if !(0.0..1.0).contains(&spec.dev_fraction) || dev_count >= spec.samples {
        return Err(Error::Parameter(format!(
            "dev fraction {} leaves no training samples",
            spec.dev_fraction
        )));
    }

    let mut rng = seeded(seed);
    let means = class_means(&mut rng, spec);
    let (plane_u, plane_v) = random_plane(&mut rng, spec.features);

    let mut labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..spec.samples).collect();
    order.shuffle(&mut rng);
    let mut dev = order[..dev_count].to_vec();
    let mut train = order[dev_count..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();

    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        DMatrix::from_fn(spec.samples, spec.features, |i, j| {
            means[labels[i]][j] + spec.cluster_std * gaussian(rng)
        })
    };
    let pre_inputs = draw(&mut rng);
    let mut fine_inputs = draw(&mut rng);
    rotate_rows(&mut fine_inputs, &plane_u, &plane_v, spec.shift_angle);

    let task = |inputs| TaskData {
        inputs,
        labels: labels.clone(),
        classes: spec.classes,
        train: train.clone(),
        dev: dev.clone(),
    };
    Ok((task(pre_inputs), task(fine_inputs)))
}

/// Random directions rescaled to a common norm chosen so that the closest
/// pair of means sits exactly `separation * cluster_std` apart.
fn class_means(rng: &mut rand_chacha::ChaCha8Rng, spec: &TaskSpec) -> Vec<DVector<f64>> {
    let dirs: Vec<DVector<f64>> = (0..spec.classes)
        .map(|_| DVector::from_vec(gaussian_vec(rng, spec.features, 1.0)).normalize())
        .collect();
    let mut min_dist = f64::INFINITY;
    for a in 0..dirs.len() {
        for b in a + 1..dirs.len() {
            min_dist = min_dist.min((&dirs[a] - &dirs[b]).norm());
        }
    }
    let radius = spec.separation * spec.cluster_std / min_dist;
    dirs.into_iter().map(|d| d * radius).collect()
}

fn random_plane(
    rng: &mut rand_chacha::ChaCha8Rng,
    features: usize,
) -> (DVector<f64>, DVector<f64>) {
    let u = DVector::from_vec(gaussian_vec(rng, features, 1.0)).normalize();
    let v = DVector::from_vec(gaussian_vec(rng, features, 1.0));
    let v = (&v - &u * u.dot(&v)).normalize();
    (u, v)
}

/// `x ← x + (cos φ - 1)(a u + b v) + sin φ (a v - b u)` with `a = <x,u>`, `b = <x,v>`.
fn rotate_rows(inputs: &mut DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>, angle: f64) {
    if angle == 0.0 {
        return;
    }
    let (s, c) = angle.sin_cos();
    for mut row in inputs.row_iter_mut() {
        let a: f64 = row.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
        let b: f64 = row.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        for j in 0..row.len() {
            row[j] += (c - 1.0) * (a * u[j] + b * v[j]) + s * (a * v[j] - b * u[j]);
        }
    }
}
