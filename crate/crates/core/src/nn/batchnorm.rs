use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Mode, NnError, Real, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the newest batch in the running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch mean and unbiased variance from a train-mode pass.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Saved state for the backward pass.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<f64>,
}

/// Affine parameters plus running statistics of one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gain: Tensor<T>,
    pub bias: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gain: Tensor::filled(&[channels], T::one()),
            bias: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
        }
    }
}

fn check<T: Real>(x: &Tensor<T>, params: &[&Tensor<T>]) -> Result<(usize, usize, usize), NnError> {
    if x.rank() != 4 {
        return Err(NnError::shape("batchnorm2d", format!("expected NCHW input, got {:?}", x.dims())));
    }
    let c = x.dim(1);
    if let Some(p) = params.iter().find(|p| p.dims() != [c]) {
        return Err(NnError::shape(
            "batchnorm2d",
            format!("{c} channels but parameter has dims {:?}", p.dims()),
        ));
    }
    Ok((x.dim(0), c, x.dim(2) * x.dim(3)))
}

/// Normalizes with batch statistics. Returns the output, the backward cache
/// and the statistics for updating running averages.
pub fn batchnorm2d_train<T: Real>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    epsilon: f64,
) -> Result<(Tensor<T>, BnCache<T>, BatchStats), NnError> {
    let (n, c, plane) = check(x, &[gain, bias])?;
    let count = (n * plane) as f64;
    let xd = x.data();
    let mut mean = vec![0.0f64; c];
    let mut var = vec![0.0f64; c];
    for ch in 0..c {
        let mut sum = 0.0;
        for img in 0..n {
            sum += xd[(img * c + ch) * plane..][..plane].iter().map(|v| v.as_f64()).sum::<f64>();
        }
        mean[ch] = sum / count;
        let mut sq = 0.0;
        for img in 0..n {
            for &v in &xd[(img * c + ch) * plane..][..plane] {
                let d = v.as_f64() - mean[ch];
                sq += d * d;
            }
        }
        var[ch] = sq / count;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + epsilon)).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    for img in 0..n {
        for ch in 0..c {
            let g = gain.data()[ch];
            let b = bias.data()[ch];
            let base = (img * c + ch) * plane;
            for i in base..base + plane {
                let h = T::from_f64_lossy((xd[i].as_f64() - mean[ch]) * inv_std[ch]);
                xhat[i] = h;
                out[i] = g * h + b;
            }
        }
    }
    let unbiased = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
    let stats = BatchStats {
        mean,
        var: var.iter().map(|v| v * unbiased).collect(),
    };
    Ok((
        Tensor::from_vec(x.dims(), out)?,
        BnCache {
            xhat: Tensor::from_vec(x.dims(), xhat)?,
            inv_std,
        },
        stats,
    ))
}

/// Normalizes with running statistics.
pub fn batchnorm2d_eval<T: Real>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    epsilon: f64,
) -> Result<Tensor<T>, NnError> {
    let (n, c, plane) = check(x, &[gain, bias, running_mean, running_var])?;
    let mut out = x.clone();
    let od = out.data_mut();
    for ch in 0..c {
        let inv_std = 1.0 / libm::sqrt(running_var.data()[ch].as_f64() + epsilon);
        let scale = gain.data()[ch].as_f64() * inv_std;
        let shift = bias.data()[ch].as_f64() - running_mean.data()[ch].as_f64() * scale;
        let (scale, shift) = (T::from_f64_lossy(scale), T::from_f64_lossy(shift));
        for img in 0..n {
            for v in &mut od[(img * c + ch) * plane..][..plane] {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_gain, grad_bias)`.
pub fn batchnorm2d_backward<T: Real>(
    cache: &BnCache<T>,
    gain: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
    if grad_out.dims() != cache.xhat.dims() {
        return Err(NnError::shape(
            "batchnorm2d_backward",
            format!("grad_out {:?} vs input {:?}", grad_out.dims(), cache.xhat.dims()),
        ));
    }
    let (n, c, plane) = check(grad_out, &[gain])?;
    let count = (n * plane) as f64;
    let gd = grad_out.data();
    let hd = cache.xhat.data();
    let mut grad_gain = vec![T::zero(); c];
    let mut grad_bias = vec![T::zero(); c];
    let mut grad_x = vec![T::zero(); grad_out.len()];
    for ch in 0..c {
        let mut sum_g = 0.0;
        let mut sum_gh = 0.0;
        for img in 0..n {
            let base = (img * c + ch) * plane;
            for i in base..base + plane {
                let g = gd[i].as_f64();
                sum_g += g;
                sum_gh += g * hd[i].as_f64();
            }
        }
        grad_bias[ch] = T::from_f64_lossy(sum_g);
        grad_gain[ch] = T::from_f64_lossy(sum_gh);
        let k = gain.data()[ch].as_f64() * cache.inv_std[ch] / count;
        for img in 0..n {
            let base = (img * c + ch) * plane;
            for i in base..base + plane {
                let v = k * (count * gd[i].as_f64() - sum_g - hd[i].as_f64() * sum_gh);
                grad_x[i] = T::from_f64_lossy(v);
            }
        }
    }
    Ok((
        Tensor::from_vec(grad_out.dims(), grad_x)?,
        Tensor::from_vec(&[c], grad_gain)?,
        Tensor::from_vec(&[c], grad_bias)?,
    ))
}

/// `running ← (1 − momentum)·running + momentum·batch`.
pub fn update_running<T: Real>(
    running_mean: &mut Tensor<T>,
    running_var: &mut Tensor<T>,
    stats: &BatchStats,
    momentum: f64,
) {
    for (r, &m) in running_mean.data_mut().iter_mut().zip(&stats.mean) {
        *r = T::from_f64_lossy((1.0 - momentum) * r.as_f64() + momentum * m);
    }
    for (r, &v) in running_var.data_mut().iter_mut().zip(&stats.var) {
        *r = T::from_f64_lossy((1.0 - momentum) * r.as_f64() + momentum * v);
    }
}

/// Single-call batch norm: train mode normalizes by batch statistics and
/// folds them into the running averages; eval mode uses the running
/// averages.
pub fn batchnorm2d<T: Real>(
    x: &Tensor<T>,
    bn: &mut BatchNorm<T>,
    mode: Mode,
    momentum: f64,
    epsilon: f64,
) -> Result<Tensor<T>, NnError> {
    match mode {
        Mode::Train => {
            let (out, _, stats) = batchnorm2d_train(x, &bn.gain, &bn.bias, epsilon)?;
            update_running(&mut bn.running_mean, &mut bn.running_var, &stats, momentum);
            Ok(out)
        }
        Mode::Eval => batchnorm2d_eval(x, &bn.gain, &bn.bias, &bn.running_mean, &bn.running_var, epsilon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor<f64> {
        Tensor::from_vec(
            &[3, 2, 2, 2],
            (0..24).map(|i| libm::sin(i as f64 * 1.7) * 3.0 + (i % 2) as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn train_mode_standardizes() {
        let x = sample();
        let mut bn = BatchNorm::new(2);
        let y = batchnorm2d(&x, &mut bn, Mode::Train, BN_MOMENTUM, BN_EPSILON).unwrap();
        for ch in 0..2 {
            let vals: Vec<f64> = (0..3)
                .flat_map(|n| y.data()[(n * 2 + ch) * 4..][..4].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / 12.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 12.0;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-5);
        }
        // running stats moved toward the batch statistics
        assert!(bn.running_mean.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn constant_channel_outputs_bias() {
        let x = Tensor::filled(&[4, 1, 3, 3], 2.5f64);
        let mut bn = BatchNorm::new(1);
        bn.bias.data_mut()[0] = 0.75;
        bn.gain.data_mut()[0] = 3.0;
        let y = batchnorm2d(&x, &mut bn, Mode::Train, BN_MOMENTUM, BN_EPSILON).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let x = Tensor::filled(&[1, 1, 1, 2], 3.0f64);
        let mut bn = BatchNorm::new(1);
        bn.running_mean.data_mut()[0] = 1.0;
        bn.running_var.data_mut()[0] = 4.0 - BN_EPSILON;
        let y = batchnorm2d(&x, &mut bn, Mode::Eval, BN_MOMENTUM, BN_EPSILON).unwrap();
        assert!(y.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn running_update_rule() {
        let mut m = Tensor::filled(&[1], 1.0f64);
        let mut v = Tensor::filled(&[1], 1.0f64);
        let stats = BatchStats { mean: vec![3.0], var: vec![5.0] };
        update_running(&mut m, &mut v, &stats, 0.25);
        assert_eq!(m.data(), &[1.5]);
        assert_eq!(v.data(), &[2.0]);
    }

    #[test]
    fn channel_mismatch() {
        let x = sample();
        let bn = BatchNorm::<f64>::new(3);
        assert!(batchnorm2d_train(&x, &bn.gain, &bn.bias, BN_EPSILON).is_err());
    }
}
