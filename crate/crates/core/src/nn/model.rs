use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::batchnorm::{batchnorm2d_backward, update_running, BatchNorm, BatchStats, BnCache};
use super::block::{bn_forward, BlockStats};
use super::{
    conv2d_backward, conv2d_forward, global_avg_pool, global_avg_pool_backward, linear, linear_backward,
    max_pool2d, max_pool2d_backward, relu, relu_backward, residual_block_backward, residual_block_forward,
    softmax_cross_entropy, BlockCache, BlockParams, Mode, NnError, PoolCache, Real, Tensor,
};
use crate::metrics::argmax;

/// Standard deviation of the classifier weights at initialization. Kept
/// small so the initial loss sits at `ln(n_classes)`.
pub const HEAD_INIT_STD: f64 = 0.01;

/// Architecture of the residual classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub stem_channels: usize,
    /// Stride of the 3×3 stem convolution.
    pub stem_stride: usize,
    /// 3×3 stride-2 max pooling after the stem.
    pub stem_pool: bool,
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
    pub n_classes: usize,
    /// Class names in label-index order.
    #[serde(default)]
    pub labels: Vec<String>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            input_channels: 1,
            input_height: 288,
            input_width: 432,
            stem_channels: 16,
            stem_stride: 2,
            stem_pool: true,
            stage_channels: vec![16, 32, 64],
            blocks_per_stage: vec![1, 1, 1],
            n_classes: 2,
            labels: Vec::new(),
        }
    }
}

impl ModelSpec {
    /// Default architecture for `labels.len()` classes and the given image size.
    pub fn for_labels(labels: &[String], input_height: usize, input_width: usize) -> Self {
        Self {
            input_height,
            input_width,
            n_classes: labels.len(),
            labels: labels.to_vec(),
            ..Self::default()
        }
    }

    /// Small network over 8×8 inputs with one identity and one projection
    /// block.
    pub fn tiny(n_classes: usize) -> Self {
        Self {
            input_channels: 1,
            input_height: 8,
            input_width: 8,
            stem_channels: 3,
            stem_stride: 1,
            stem_pool: true,
            stage_channels: vec![3, 4],
            blocks_per_stage: vec![1, 1],
            n_classes,
            labels: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let positive = [
            self.input_channels,
            self.input_height,
            self.input_width,
            self.stem_channels,
            self.stem_stride,
            self.n_classes,
        ];
        if positive.contains(&0) {
            return Err(NnError::InvalidSpec("dimensions, stride and class count must be positive"));
        }
        if self.stage_channels.is_empty() || self.stage_channels.len() != self.blocks_per_stage.len() {
            return Err(NnError::InvalidSpec("stage_channels and blocks_per_stage must be equal-length and non-empty"));
        }
        if self.stage_channels.contains(&0) || self.blocks_per_stage.contains(&0) {
            return Err(NnError::InvalidSpec("stage widths and block counts must be positive"));
        }
        if !self.labels.is_empty() && self.labels.len() != self.n_classes {
            return Err(NnError::InvalidSpec("labels must be empty or have n_classes entries"));
        }
        Ok(())
    }

    /// `(name prefix, in_channels, out_channels, stride)` for every block.
    fn block_layout(&self) -> Vec<(String, usize, usize, usize)> {
        let mut layout = Vec::new();
        let mut in_ch = self.stem_channels;
        for (s, (&out_ch, &n_blocks)) in self.stage_channels.iter().zip(&self.blocks_per_stage).enumerate() {
            for b in 0..n_blocks {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                layout.push((format!("stage{s}.block{b}"), in_ch, out_ch, stride));
                in_ch = out_ch;
            }
        }
        layout
    }

    fn final_channels(&self) -> usize {
        *self.stage_channels.last().expect("validated non-empty")
    }
}

/// Gradients of the trainable parameters keyed by parameter name.
pub type Gradients<T> = BTreeMap<String, Tensor<T>>;

/// Batch statistics of every batch-norm layer from one train-mode pass.
#[derive(Clone, Debug)]
pub struct RunningStats {
    stem: BatchStats,
    blocks: Vec<BlockStats>,
}

/// Activations saved by a train-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    input: Tensor<T>,
    stem_bn: BnCache<T>,
    stem_relu: Tensor<T>,
    pool: Option<PoolCache>,
    blocks: Vec<BlockCache<T>>,
    trunk_dims: Vec<usize>,
    features: Tensor<T>,
}

/// Residual CNN: stem conv → batch norm → relu → optional max pool →
/// residual stages (the first block of every stage after the first has
/// stride 2) → global average pool → linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    pub stem_conv: Tensor<T>,
    pub stem_bn: BatchNorm<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub head_weight: Tensor<T>,
    pub head_bias: Tensor<T>,
    block_names: Vec<String>,
}

fn is_running_stat(name: &str) -> bool {
    name.ends_with(".running_mean") || name.ends_with(".running_var")
}

fn push_bn<'a, T>(out: &mut Vec<(String, &'a Tensor<T>)>, prefix: &str, bn: &'a BatchNorm<T>) {
    out.push((format!("{prefix}.gain"), &bn.gain));
    out.push((format!("{prefix}.bias"), &bn.bias));
    out.push((format!("{prefix}.running_mean"), &bn.running_mean));
    out.push((format!("{prefix}.running_var"), &bn.running_var));
}

fn push_bn_mut<'a, T>(out: &mut Vec<(String, &'a mut Tensor<T>)>, prefix: &str, bn: &'a mut BatchNorm<T>) {
    out.push((format!("{prefix}.gain"), &mut bn.gain));
    out.push((format!("{prefix}.bias"), &mut bn.bias));
    out.push((format!("{prefix}.running_mean"), &mut bn.running_mean));
    out.push((format!("{prefix}.running_var"), &mut bn.running_var));
}

impl<T: Real> Model<T> {
    /// Model with all weights zero, batch-norm gains one and unit running
    /// variances.
    pub fn zeros(spec: ModelSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let layout = spec.block_layout();
        let blocks = layout
            .iter()
            .map(|(_, i, o, s)| BlockParams::zeros(*i, *o, *s))
            .collect();
        Ok(Self {
            stem_conv: Tensor::zeros(&[spec.stem_channels, spec.input_channels, 3, 3]),
            stem_bn: BatchNorm::new(spec.stem_channels),
            blocks,
            head_weight: Tensor::zeros(&[spec.n_classes, spec.final_channels()]),
            head_bias: Tensor::zeros(&[spec.n_classes]),
            block_names: layout.into_iter().map(|(n, ..)| n).collect(),
            spec,
        })
    }

    /// He-normal convolution weights (`std = sqrt(2 / fan_in)`), classifier
    /// weights with std [`HEAD_INIT_STD`], zero biases, unit batch-norm
    /// gains. Deterministic in `seed`.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self, NnError> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: &mut Tensor<T>, std: f64| {
            let normal = Normal::new(0.0, std).expect("finite std");
            for v in t.data_mut() {
                *v = T::from_f64_lossy(normal.sample(&mut rng));
            }
        };
        let he = |t: &Tensor<T>| libm::sqrt(2.0 / (t.dim(1) * t.dim(2) * t.dim(3)) as f64);
        let std = he(&model.stem_conv);
        fill(&mut model.stem_conv, std);
        for block in &mut model.blocks {
            let std = he(&block.conv1);
            fill(&mut block.conv1, std);
            let std = he(&block.conv2);
            fill(&mut block.conv2, std);
            if let Some((kernel, _)) = &mut block.shortcut {
                let std = he(kernel);
                fill(kernel, std);
            }
        }
        fill(&mut model.head_weight, HEAD_INIT_STD);
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Every tensor (trainable and running statistics) in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        out.push((String::from("stem.conv.weight"), &self.stem_conv));
        push_bn(&mut out, "stem.bn", &self.stem_bn);
        for (name, block) in self.block_names.iter().zip(&self.blocks) {
            out.push((format!("{name}.conv1.weight"), &block.conv1));
            push_bn(&mut out, &format!("{name}.bn1"), &block.bn1);
            out.push((format!("{name}.conv2.weight"), &block.conv2));
            push_bn(&mut out, &format!("{name}.bn2"), &block.bn2);
            if let Some((kernel, bn)) = &block.shortcut {
                out.push((format!("{name}.shortcut.conv.weight"), kernel));
                push_bn(&mut out, &format!("{name}.shortcut.bn"), bn);
            }
        }
        out.push((String::from("head.weight"), &self.head_weight));
        out.push((String::from("head.bias"), &self.head_bias));
        out
    }

    pub fn named_parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        out.push((String::from("stem.conv.weight"), &mut self.stem_conv));
        push_bn_mut(&mut out, "stem.bn", &mut self.stem_bn);
        for (name, block) in self.block_names.iter().zip(&mut self.blocks) {
            out.push((format!("{name}.conv1.weight"), &mut block.conv1));
            push_bn_mut(&mut out, &format!("{name}.bn1"), &mut block.bn1);
            out.push((format!("{name}.conv2.weight"), &mut block.conv2));
            push_bn_mut(&mut out, &format!("{name}.bn2"), &mut block.bn2);
            if let Some((kernel, bn)) = &mut block.shortcut {
                out.push((format!("{name}.shortcut.conv.weight"), kernel));
                push_bn_mut(&mut out, &format!("{name}.shortcut.bn"), bn);
            }
        }
        out.push((String::from("head.weight"), &mut self.head_weight));
        out.push((String::from("head.bias"), &mut self.head_bias));
        out
    }

    /// Names of the tensors updated by gradient descent.
    pub fn trainable_names(&self) -> Vec<String> {
        self.named_parameters()
            .into_iter()
            .map(|(n, _)| n)
            .filter(|n| !is_running_stat(n))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.named_parameters()
            .iter()
            .filter(|(n, _)| !is_running_stat(n))
            .map(|(_, t)| t.len())
            .sum()
    }

    /// Rebuilds a model from named tensors. Every expected name must be
    /// present with the expected dimensions, and no others.
    pub fn from_named(spec: ModelSpec, mut tensors: BTreeMap<String, Tensor<T>>) -> Result<Self, NnError> {
        let mut model = Self::zeros(spec)?;
        for (name, slot) in model.named_parameters_mut() {
            let t = tensors.remove(&name).ok_or_else(|| NnError::MissingParameter(name.clone()))?;
            if t.dims() != slot.dims() {
                return Err(NnError::shape(
                    "from_named",
                    format!("{name}: expected {:?}, found {:?}", slot.dims(), t.dims()),
                ));
            }
            *slot = t;
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(NnError::shape("from_named", format!("unexpected parameter {extra}")));
        }
        Ok(model)
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        let named: BTreeMap<String, Tensor<U>> = self
            .named_parameters()
            .into_iter()
            .map(|(n, t)| (n, t.cast()))
            .collect();
        Model::from_named(self.spec.clone(), named).expect("same spec")
    }

    pub fn is_finite(&self) -> bool {
        self.named_parameters().iter().all(|(_, t)| t.is_finite())
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        let s = &self.spec;
        if x.rank() != 4 || x.dims()[1..] != [s.input_channels, s.input_height, s.input_width] {
            return Err(NnError::shape(
                "model_forward",
                format!(
                    "input {:?}, expected N x {} x {} x {}",
                    x.dims(),
                    s.input_channels,
                    s.input_height,
                    s.input_width
                ),
            ));
        }
        Ok(())
    }

    fn run(
        &self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<(ForwardCache<T>, RunningStats)>), NnError> {
        self.check_input(x)?;
        let train = mode == Mode::Train;
        let conv = conv2d_forward(x, &self.stem_conv, self.spec.stem_stride, 1)?;
        let (bn, stem_rec) = bn_forward(&conv, &self.stem_bn, mode)?;
        drop(conv);
        let stem_relu = relu(&bn);
        drop(bn);
        let (mut h, pool) = if self.spec.stem_pool {
            let (p, cache) = max_pool2d(&stem_relu, 3, 2, 1)?;
            (p, Some(cache))
        } else {
            (stem_relu.clone(), None)
        };
        let mut block_caches = Vec::new();
        let mut block_stats = Vec::new();
        for block in &self.blocks {
            let (out, rec) = residual_block_forward(&h, block, mode)?;
            if let Some((cache, stats)) = rec {
                block_caches.push(cache);
                block_stats.push(stats);
            }
            h = out;
        }
        let trunk_dims = h.dims().to_vec();
        let features = global_avg_pool(&h)?;
        drop(h);
        let logits = linear(&features, &self.head_weight, &self.head_bias)?;
        if !train {
            return Ok((logits, None));
        }
        let (stem_cache, stem_stats) = stem_rec.expect("train mode records stem stats");
        Ok((
            logits,
            Some((
                ForwardCache {
                    input: x.clone(),
                    stem_bn: stem_cache,
                    stem_relu,
                    pool,
                    blocks: block_caches,
                    trunk_dims,
                    features,
                },
                RunningStats {
                    stem: stem_stats,
                    blocks: block_stats,
                },
            )),
        ))
    }

    /// Logits `N × n_classes`. Train mode normalizes with batch statistics
    /// but does not update running statistics.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        self.run(x, mode).map(|(logits, _)| logits)
    }

    /// Train-mode forward keeping everything the backward pass needs.
    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>, RunningStats), NnError> {
        let (logits, rec) = self.run(x, Mode::Train)?;
        let (cache, stats) = rec.expect("train mode");
        Ok((logits, cache, stats))
    }

    /// Gradients of every trainable parameter given `d loss / d logits`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>, NnError> {
        let mut grads = Gradients::new();
        let (g_features, g_head_w, g_head_b) = linear_backward(&cache.features, &self.head_weight, grad_logits)?;
        grads.insert(String::from("head.weight"), g_head_w);
        grads.insert(String::from("head.bias"), g_head_b);
        let mut g = global_avg_pool_backward(&cache.trunk_dims, &g_features)?;
        for ((name, block), block_cache) in self.block_names.iter().zip(&self.blocks).zip(&cache.blocks).rev() {
            let (g_in, bg) = residual_block_backward(block, block_cache, &g)?;
            grads.insert(format!("{name}.conv1.weight"), bg.conv1);
            grads.insert(format!("{name}.bn1.gain"), bg.bn1_gain);
            grads.insert(format!("{name}.bn1.bias"), bg.bn1_bias);
            grads.insert(format!("{name}.conv2.weight"), bg.conv2);
            grads.insert(format!("{name}.bn2.gain"), bg.bn2_gain);
            grads.insert(format!("{name}.bn2.bias"), bg.bn2_bias);
            if let Some((k, gain, bias)) = bg.shortcut {
                grads.insert(format!("{name}.shortcut.conv.weight"), k);
                grads.insert(format!("{name}.shortcut.bn.gain"), gain);
                grads.insert(format!("{name}.shortcut.bn.bias"), bias);
            }
            g = g_in;
        }
        if let Some(pool) = &cache.pool {
            g = max_pool2d_backward(pool, &g)?;
        }
        let g = relu_backward(&cache.stem_relu, &g)?;
        let (g, gain, bias) = batchnorm2d_backward(&cache.stem_bn, &self.stem_bn.gain, &g)?;
        grads.insert(String::from("stem.bn.gain"), gain);
        grads.insert(String::from("stem.bn.bias"), bias);
        let (_, g_stem) = conv2d_backward(&cache.input, &self.stem_conv, &g, self.spec.stem_stride, 1)?;
        grads.insert(String::from("stem.conv.weight"), g_stem);
        Ok(grads)
    }

    /// Mean cross-entropy of a train-mode pass and its parameter gradients.
    pub fn loss_and_gradients(
        &self,
        x: &Tensor<T>,
        labels: &[usize],
    ) -> Result<(f64, Gradients<T>, RunningStats), NnError> {
        let (logits, cache, stats) = self.forward_train(x)?;
        let (loss, grad_logits) = softmax_cross_entropy(&logits, labels)?;
        drop(logits);
        let grads = self.backward(&cache, &grad_logits)?;
        Ok((loss, grads, stats))
    }

    /// Folds one pass's batch statistics into the running averages.
    pub fn update_running_stats(&mut self, stats: &RunningStats, momentum: f64) {
        update_running(&mut self.stem_bn.running_mean, &mut self.stem_bn.running_var, &stats.stem, momentum);
        for (block, s) in self.blocks.iter_mut().zip(&stats.blocks) {
            update_running(&mut block.bn1.running_mean, &mut block.bn1.running_var, &s.bn1, momentum);
            update_running(&mut block.bn2.running_mean, &mut block.bn2.running_var, &s.bn2, momentum);
            if let (Some((_, bn)), Some(st)) = (&mut block.shortcut, &s.shortcut) {
                update_running(&mut bn.running_mean, &mut bn.running_var, st, momentum);
            }
        }
    }
}

/// Eval-mode argmax class per item; ties go to the lowest index.
pub fn predict<T: Real>(model: &Model<T>, images: &Tensor<T>) -> Result<Vec<usize>, NnError> {
    let logits = model.forward(images, Mode::Eval)?;
    let k = logits.dim(1);
    Ok(logits
        .data()
        .chunks_exact(k)
        .map(|row| argmax(&row.iter().map(|v| v.as_f64()).collect::<Vec<_>>()))
        .collect())
}
