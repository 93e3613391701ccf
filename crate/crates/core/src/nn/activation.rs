use super::{NnError, Real, Tensor};
use alloc::format;

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of `relu` given its output (or input: the masks agree).
pub fn relu_backward<T: Real>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if output.dims() != grad_out.dims() {
        return Err(NnError::shape(
            "relu_backward",
            format!("{:?} vs {:?}", output.dims(), grad_out.dims()),
        ));
    }
    let mut g = grad_out.clone();
    for (gv, &o) in g.data_mut().iter_mut().zip(output.data()) {
        if o <= T::zero() {
            *gv = T::zero();
        }
    }
    Ok(g)
}
