use alloc::format;
use alloc::vec;

use super::{NnError, Real, Tensor};

/// `y = x·Wᵀ + b` for `x: N × D`, `W: K × D`, `b: K`.
pub fn linear<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, d, k) = check(x, weight, bias)?;
    let mut out = vec![T::zero(); n * k];
    for row in out.chunks_exact_mut(k) {
        row.copy_from_slice(bias.data());
    }
    T::gemm(n, d, k, T::one(), x.data(), d, 1, weight.data(), 1, d, T::one(), &mut out, k, 1);
    Tensor::from_vec(&[n, k], out)
}

/// Returns `(grad_x, grad_weight, grad_bias)`.
pub fn linear_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
    let bias_dims = [weight.dim(0)];
    let (n, d, k) = check(x, weight, &Tensor::zeros(&bias_dims))?;
    if grad_out.dims() != [n, k] {
        return Err(NnError::shape("linear_backward", format!("grad_out {:?}", grad_out.dims())));
    }
    let g = grad_out.data();
    let mut gx = vec![T::zero(); n * d];
    T::gemm(n, k, d, T::one(), g, k, 1, weight.data(), d, 1, T::zero(), &mut gx, d, 1);
    let mut gw = vec![T::zero(); k * d];
    T::gemm(k, n, d, T::one(), g, 1, k, x.data(), d, 1, T::zero(), &mut gw, d, 1);
    let mut gb = vec![T::zero(); k];
    for row in g.chunks_exact(k) {
        for (acc, &v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    Ok((
        Tensor::from_vec(&[n, d], gx)?,
        Tensor::from_vec(&[k, d], gw)?,
        Tensor::from_vec(&[k], gb)?,
    ))
}

fn check<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
    if x.rank() != 2 || weight.rank() != 2 || weight.dim(1) != x.dim(1) || bias.dims() != [weight.dim(0)] {
        return Err(NnError::shape(
            "linear",
            format!("x {:?}, weight {:?}, bias {:?}", x.dims(), weight.dims(), bias.dims()),
        ));
    }
    Ok((x.dim(0), x.dim(1), weight.dim(0)))
}
