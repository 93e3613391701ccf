use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{conv_output_len, NnError, Real, Tensor};

/// Winning input offset (within its channel plane) for every pooled output.
#[derive(Clone, Debug)]
pub struct PoolCache {
    input_dims: Vec<usize>,
    argmax: Vec<u32>,
}

/// Max pooling over `window × window` patches; padded cells never win.
/// Ties go to the first cell in row-major order.
pub fn max_pool2d<T: Real>(
    x: &Tensor<T>,
    window: usize,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, PoolCache), NnError> {
    if x.rank() != 4 || pad >= window {
        return Err(NnError::shape("max_pool2d", format!("input {:?}, window {window}, pad {pad}", x.dims())));
    }
    let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let (ho, wo) = match (conv_output_len(h, window, stride, pad), conv_output_len(w, window, stride, pad)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(NnError::shape("max_pool2d", format!("window {window} does not fit {h}x{w}"))),
    };
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut argmax = Vec::with_capacity(n * c * ho * wo);
    for plane in x.data().chunks_exact(h * w) {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = T::neg_infinity();
                let mut best_at = 0u32;
                for i in 0..window {
                    let iy = (oy * stride + i) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for j in 0..window {
                        let ix = (ox * stride + j) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let at = iy as usize * w + ix as usize;
                        if plane[at] > best {
                            best = plane[at];
                            best_at = at as u32;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_at);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[n, c, ho, wo], out)?,
        PoolCache {
            input_dims: x.dims().to_vec(),
            argmax,
        },
    ))
}

pub fn max_pool2d_backward<T: Real>(cache: &PoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if grad_out.len() != cache.argmax.len() {
        return Err(NnError::shape("max_pool2d_backward", format!("grad_out {:?}", grad_out.dims())));
    }
    let in_plane = cache.input_dims[2] * cache.input_dims[3];
    let out_plane = grad_out.dim(2) * grad_out.dim(3);
    let mut grad = vec![T::zero(); cache.input_dims.iter().product()];
    for (p, (gplane, aplane)) in grad_out
        .data()
        .chunks_exact(out_plane)
        .zip(cache.argmax.chunks_exact(out_plane))
        .enumerate()
    {
        let dst = &mut grad[p * in_plane..(p + 1) * in_plane];
        for (&g, &a) in gplane.iter().zip(aplane) {
            dst[a as usize] += g;
        }
    }
    Tensor::from_vec(&cache.input_dims, grad)
}

/// `N × C × H × W` → `N × C` spatial mean.
pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if x.rank() != 4 {
        return Err(NnError::shape("global_avg_pool", format!("expected NCHW, got {:?}", x.dims())));
    }
    let plane = x.dim(2) * x.dim(3);
    let out = x
        .data()
        .chunks_exact(plane)
        .map(|p| T::from_f64_lossy(p.iter().map(|v| v.as_f64()).sum::<f64>() / plane as f64))
        .collect();
    Tensor::from_vec(&[x.dim(0), x.dim(1)], out)
}

pub fn global_avg_pool_backward<T: Real>(input_dims: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if input_dims.len() != 4 || grad_out.dims() != &input_dims[..2] {
        return Err(NnError::shape(
            "global_avg_pool_backward",
            format!("grad_out {:?} for input {input_dims:?}", grad_out.dims()),
        ));
    }
    let plane = input_dims[2] * input_dims[3];
    let scale = T::from_f64_lossy(1.0 / plane as f64);
    let mut grad = Vec::with_capacity(grad_out.len() * plane);
    for &g in grad_out.data() {
        grad.extend(core::iter::repeat_n(g * scale, plane));
    }
    Tensor::from_vec(input_dims, grad)
}
