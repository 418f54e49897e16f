use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, seeded};
use crate::weightspace::{ModelManifest, WeightVector};

/// Layer widths from input to output. Hidden layers use `tanh`; the last
/// layer produces logits for softmax cross-entropy. There are no biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    layer_dims: Vec<usize>,
}

impl NetworkConfig {
    pub fn new(layer_dims: Vec<usize>) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Parameter(format!(
                "network needs at least input and output widths, got {layer_dims:?}"
            )));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Parameter(format!(
                "zero layer width in {layer_dims:?}"
            )));
        }
        Ok(Self { layer_dims })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn inputs(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// `(out, in)` shape of every weight matrix; the last one is the head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layer_dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    fn layer_names(&self) -> Vec<String> {
        let k = self.num_layers();
        (0..k)
            .map(|i| {
                if i + 1 == k {
                    "head".to_string()
                } else {
                    format!("fc{}", i + 1)
                }
            })
            .collect()
    }

    pub fn manifest(&self, include_head: bool) -> Result<ModelManifest> {
        let shapes = self.layer_shapes();
        let names = self.layer_names();
        let keep = if include_head {
            shapes.len()
        } else {
            shapes.len() - 1
        };
        if keep == 0 {
            return Err(Error::Parameter(
                "excluding the head leaves no layers to adapt".into(),
            ));
        }
        let named: Vec<(String, usize, usize)> = names
            .into_iter()
            .zip(shapes)
            .take(keep)
            .map(|(n, (r, c))| (n, r, c))
            .collect();
        ModelManifest::from_named(&named)
    }

    /// Gaussian weights with std `1/sqrt(fan_in)` for every layer.
    pub fn init_weights(&self, seed: u64) -> WeightVector {
        let mut rng = seeded(seed);
        let mut out = Vec::new();
        for (rows, cols) in self.layer_shapes() {
            out.extend(gaussian_vec(
                &mut rng,
                rows * cols,
                1.0 / (cols as f64).sqrt(),
            ));
        }
        out.into()
    }
}

/// Column-per-sample inputs with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A network whose adapted layers are read from a flat weight vector; an
/// optional frozen head is held separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    manifest: ModelManifest,
    frozen_head: Option<DMatrix<f64>>,
}

struct Forward {
    /// Input followed by each hidden activation.
    activations: Vec<DMatrix<f64>>,
    logits: DMatrix<f64>,
}

impl Network {
    /// Every layer, head included, is adapted.
    pub fn new(config: NetworkConfig) -> Self {
        let manifest = config.manifest(true).expect("config validated");
        Self {
            config,
            manifest,
            frozen_head: None,
        }
    }

    /// Splits full network weights into a frozen head and the adapted
    /// backbone weights, which are returned.
    pub fn with_frozen_head(config: NetworkConfig, full: &[f64]) -> Result<(Self, WeightVector)> {
        let all = config.manifest(true)?;
        if full.len() != all.total() {
            return Err(Error::length(
                "full network weights",
                all.total(),
                full.len(),
            ));
        }
        let manifest = config.manifest(false)?;
        let head_spec = all.layers().last().expect("non-empty");
        let head =
            DMatrix::from_column_slice(head_spec.rows, head_spec.cols, &full[head_spec.range()]);
        let backbone = full[..manifest.total()].to_vec().into();
        Ok((
            Self {
                config,
                manifest,
                frozen_head: Some(head),
            },
            backbone,
        ))
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn frozen_head(&self) -> Option<&DMatrix<f64>> {
        self.frozen_head.as_ref()
    }

    fn layer_views<'a>(&'a self, w: &'a [f64]) -> Vec<DMatrixView<'a, f64>> {
        let mut views: Vec<DMatrixView<'a, f64>> = self
            .manifest
            .layers()
            .iter()
            .map(|l| DMatrixView::from_slice(&w[l.range()], l.rows, l.cols))
            .collect();
        if let Some(head) = &self.frozen_head {
            views.push(head.as_view());
        }
        views
    }

    fn check(&self, w: &[f64], batch: &Batch) -> Result<()> {
        if w.len() != self.manifest.total() {
            return Err(Error::length(
                "adapted weights",
                self.manifest.total(),
                w.len(),
            ));
        }
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        if batch.inputs.nrows() != self.config.inputs() || batch.inputs.ncols() != batch.len() {
            return Err(Error::Parameter(format!(
                "batch inputs are {}x{}, expected {}x{}",
                batch.inputs.nrows(),
                batch.inputs.ncols(),
                self.config.inputs(),
                batch.len()
            )));
        }
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.config.classes()) {
            return Err(Error::Parameter(format!("label {bad} out of range")));
        }
        Ok(())
    }

    fn forward(&self, w: &[f64], inputs: &DMatrix<f64>) -> Forward {
        let layers = self.layer_views(w);
        let (head, hidden) = layers.split_last().expect("at least one layer");
        let mut activations = Vec::with_capacity(layers.len());
        activations.push(inputs.clone());
        for layer in hidden {
            let next = (layer * activations.last().expect("non-empty")).map(f64::tanh);
            activations.push(next);
        }
        let logits = head * activations.last().expect("non-empty");
        Forward {
            activations,
            logits,
        }
    }

    /// Per-sample `(log-sum-exp, softmax probabilities)` of the logits.
    fn softmax(logits: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let mut probs = logits.clone();
        let mut lse = Vec::with_capacity(logits.ncols());
        for mut col in probs.column_iter_mut() {
            let max = col.max();
            let sum: f64 = col.iter().map(|z| (z - max).exp()).sum();
            let l = max + sum.ln();
            col.apply(|z| *z = (*z - l).exp());
            lse.push(l);
        }
        (lse, probs)
    }

    fn mean_loss(logits: &DMatrix<f64>, lse: &[f64], labels: &[usize]) -> f64 {
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(s, &y)| lse[s] - logits[(y, s)])
            .sum();
        total / labels.len() as f64
    }

    /// Mean cross-entropy without the finiteness check.
    pub fn loss_unchecked(&self, w: &[f64], batch: &Batch) -> Result<f64> {
        self.check(w, batch)?;
        let fwd = self.forward(w, &batch.inputs);
        let (lse, _) = Self::softmax(&fwd.logits);
        Ok(Self::mean_loss(&fwd.logits, &lse, &batch.labels))
    }

    pub fn loss(&self, w: &[f64], batch: &Batch) -> Result<f64> {
        let loss = self.loss_unchecked(w, batch)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        Ok(loss)
    }

    /// `(mean loss, accuracy)` with first-max argmax.
    pub fn evaluate(&self, w: &[f64], batch: &Batch) -> Result<(f64, f64)> {
        self.check(w, batch)?;
        let fwd = self.forward(w, &batch.inputs);
        let (lse, _) = Self::softmax(&fwd.logits);
        let loss = Self::mean_loss(&fwd.logits, &lse, &batch.labels);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        let correct = fwd
            .logits
            .column_iter()
            .zip(&batch.labels)
            .filter(|(col, &y)| col.argmax().0 == y)
            .count();
        Ok((loss, correct as f64 / batch.len() as f64))
    }

    /// Mean cross-entropy over the batch and its exact gradient with
    /// respect to every adapted weight (reverse-mode through the layers).
    pub fn loss_and_grad(&self, w: &[f64], batch: &Batch) -> Result<(f64, WeightVector)> {
        self.check(w, batch)?;
        let fwd = self.forward(w, &batch.inputs);
        if fwd.logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric("non-finite logits in forward pass".into()));
        }
        let (lse, probs) = Self::softmax(&fwd.logits);
        let loss = Self::mean_loss(&fwd.logits, &lse, &batch.labels);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }

        let scale = 1.0 / batch.len() as f64;
        let mut upstream = probs;
        for (s, &y) in batch.labels.iter().enumerate() {
            upstream[(y, s)] -= 1.0;
        }
        upstream *= scale;

        let layers = self.layer_views(w);
        let adapted = self.manifest.layers().len();
        let mut grads: Vec<Option<DMatrix<f64>>> = vec![None; layers.len()];
        for k in (0..layers.len()).rev() {
            let input = &fwd.activations[k];
            if k < adapted {
                grads[k] = Some(&upstream * input.transpose());
            }
            if k > 0 {
                let mut back = layers[k].transpose() * &upstream;
                back.zip_apply(input, |g, a| *g *= 1.0 - a * a);
                upstream = back;
            }
        }

        let mut flat = Vec::with_capacity(self.manifest.total());
        for g in grads.into_iter().take(adapted) {
            flat.extend_from_slice(g.expect("adapted layer gradient").as_slice());
        }
        Ok((loss, flat.into()))
    }
}
