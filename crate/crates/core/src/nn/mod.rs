//! Tensor operations with explicit backward passes and a small residual CNN.
//!
//! Every layer exposes a forward function and a matching backward function
//! returning exact gradients; there is no tape. Layouts are NCHW.

mod activation;
mod batchnorm;
mod block;
mod conv;
mod linear;
mod loss;
mod model;
mod pool;
mod scalar;
mod tensor;

use alloc::string::String;

use thiserror::Error;

pub use activation::{relu, relu_backward};
pub use batchnorm::{
    batchnorm2d, batchnorm2d_backward, batchnorm2d_eval, batchnorm2d_train, update_running, BatchNorm,
    BatchStats, BnCache, BN_EPSILON, BN_MOMENTUM,
};
pub use block::{residual_block_backward, residual_block_forward, BlockCache, BlockGrads, BlockParams, BlockStats};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_len};
pub use linear::{linear, linear_backward};
pub use loss::{softmax, softmax_cross_entropy};
pub use model::{predict, ForwardCache, Gradients, Model, ModelSpec, RunningStats, HEAD_INIT_STD};
pub use pool::{global_avg_pool, global_avg_pool_backward, max_pool2d, max_pool2d_backward, PoolCache};
pub use scalar::Real;
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NnError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(&'static str),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, detail: String) -> Self {
        NnError::ShapeMismatch { op, detail }
    }
}

/// Batch-norm behaviour: batch statistics or running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Runs `f` on consecutive `chunk`-sized pieces of `out` (one per image) and
/// returns the per-chunk results in order. Parallel under the `parallel`
/// feature; callers reduce the results sequentially so both paths agree
/// bit for bit.
pub(crate) fn map_chunks<T, R, F>(out: &mut [T], chunk: usize, f: F) -> alloc::vec::Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }
}
