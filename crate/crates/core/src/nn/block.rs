use super::batchnorm::{batchnorm2d_backward, batchnorm2d_eval, batchnorm2d_train, BatchNorm, BatchStats, BnCache, BN_EPSILON};
use super::{conv2d_backward, conv2d_forward, relu, relu_backward, Mode, NnError, Real, Tensor};

/// Parameters of one basic residual block:
/// `relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))`.
///
/// The shortcut is the identity unless the block changes resolution or
/// width, in which case it is a strided 1×1 convolution followed by batch
/// norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<T> {
    pub stride: usize,
    pub conv1: Tensor<T>,
    pub bn1: BatchNorm<T>,
    pub conv2: Tensor<T>,
    pub bn2: BatchNorm<T>,
    pub shortcut: Option<(Tensor<T>, BatchNorm<T>)>,
}

impl<T: Real> BlockParams<T> {
    /// Zero-initialized block; callers fill in weights.
    pub fn zeros(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        let shortcut = (stride != 1 || in_channels != out_channels).then(|| {
            (
                Tensor::zeros(&[out_channels, in_channels, 1, 1]),
                BatchNorm::new(out_channels),
            )
        });
        Self {
            stride,
            conv1: Tensor::zeros(&[out_channels, in_channels, 3, 3]),
            bn1: BatchNorm::new(out_channels),
            conv2: Tensor::zeros(&[out_channels, out_channels, 3, 3]),
            bn2: BatchNorm::new(out_channels),
            shortcut,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    x: Tensor<T>,
    bn1: BnCache<T>,
    r1: Tensor<T>,
    bn2: BnCache<T>,
    shortcut: Option<BnCache<T>>,
    out: Tensor<T>,
}

/// Batch statistics of the block's batch-norm layers.
#[derive(Clone, Debug)]
pub struct BlockStats {
    pub bn1: BatchStats,
    pub bn2: BatchStats,
    pub shortcut: Option<BatchStats>,
}

#[derive(Clone, Debug)]
pub struct BlockGrads<T> {
    pub conv1: Tensor<T>,
    pub bn1_gain: Tensor<T>,
    pub bn1_bias: Tensor<T>,
    pub conv2: Tensor<T>,
    pub bn2_gain: Tensor<T>,
    pub bn2_bias: Tensor<T>,
    /// `(conv, bn gain, bn bias)` of a projection shortcut.
    pub shortcut: Option<(Tensor<T>, Tensor<T>, Tensor<T>)>,
}

pub(crate) fn bn_forward<T: Real>(
    x: &Tensor<T>,
    bn: &BatchNorm<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Option<(BnCache<T>, BatchStats)>), NnError> {
    match mode {
        Mode::Train => {
            let (out, cache, stats) = batchnorm2d_train(x, &bn.gain, &bn.bias, BN_EPSILON)?;
            Ok((out, Some((cache, stats))))
        }
        Mode::Eval => Ok((
            batchnorm2d_eval(x, &bn.gain, &bn.bias, &bn.running_mean, &bn.running_var, BN_EPSILON)?,
            None,
        )),
    }
}

/// Forward pass. In train mode also returns the backward cache and the
/// batch statistics; running statistics are not touched.
#[allow(clippy::type_complexity)]
pub fn residual_block_forward<T: Real>(
    x: &Tensor<T>,
    p: &BlockParams<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Option<(BlockCache<T>, BlockStats)>), NnError> {
    let c1 = conv2d_forward(x, &p.conv1, p.stride, 1)?;
    let (b1, s1) = bn_forward(&c1, &p.bn1, mode)?;
    drop(c1);
    let r1 = relu(&b1);
    drop(b1);
    let c2 = conv2d_forward(&r1, &p.conv2, 1, 1)?;
    let (mut sum, s2) = bn_forward(&c2, &p.bn2, mode)?;
    drop(c2);
    let sc = match &p.shortcut {
        Some((kernel, bn)) => {
            let proj = conv2d_forward(x, kernel, p.stride, 0)?;
            let (out, s) = bn_forward(&proj, bn, mode)?;
            sum.add_assign(&out)?;
            s
        }
        None => {
            sum.add_assign(x)?;
            None
        }
    };
    let out = relu(&sum);
    let record = match (s1, s2) {
        (Some((bn1, st1)), Some((bn2, st2))) => {
            let (sc_cache, sc_stats) = match sc {
                Some((c, s)) => (Some(c), Some(s)),
                None => (None, None),
            };
            Some((
                BlockCache {
                    x: x.clone(),
                    bn1,
                    r1,
                    bn2,
                    shortcut: sc_cache,
                    out: out.clone(),
                },
                BlockStats {
                    bn1: st1,
                    bn2: st2,
                    shortcut: sc_stats,
                },
            ))
        }
        _ => None,
    };
    Ok((out, record))
}

/// Gradients of a train-mode forward pass. Returns `(grad_x, grads)`.
pub fn residual_block_backward<T: Real>(
    p: &BlockParams<T>,
    cache: &BlockCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, BlockGrads<T>), NnError> {
    let g_sum = relu_backward(&cache.out, grad_out)?;

    let (g_c2, bn2_gain, bn2_bias) = batchnorm2d_backward(&cache.bn2, &p.bn2.gain, &g_sum)?;
    let (g_r1, conv2) = conv2d_backward(&cache.r1, &p.conv2, &g_c2, 1, 1)?;
    let g_b1 = relu_backward(&cache.r1, &g_r1)?;
    let (g_c1, bn1_gain, bn1_bias) = batchnorm2d_backward(&cache.bn1, &p.bn1.gain, &g_b1)?;
    let (mut grad_x, conv1) = conv2d_backward(&cache.x, &p.conv1, &g_c1, p.stride, 1)?;

    let shortcut = match (&p.shortcut, &cache.shortcut) {
        (Some((kernel, bn)), Some(bn_cache)) => {
            let (g_proj, gain, bias) = batchnorm2d_backward(bn_cache, &bn.gain, &g_sum)?;
            let (g_x_sc, g_kernel) = conv2d_backward(&cache.x, kernel, &g_proj, p.stride, 0)?;
            grad_x.add_assign(&g_x_sc)?;
            Some((g_kernel, gain, bias))
        }
        (None, None) => {
            grad_x.add_assign(&g_sum)?;
            None
        }
        _ => {
            return Err(NnError::shape(
                "residual_block_backward",
                alloc::string::String::from("cache does not match block shortcut"),
            ))
        }
    };
    Ok((
        grad_x,
        BlockGrads {
            conv1,
            bn1_gain,
            bn1_bias,
            conv2,
            bn2_gain,
            bn2_bias,
            shortcut,
        },
    ))
}
