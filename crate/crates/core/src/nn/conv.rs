use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{map_chunks, NnError, Real, Tensor};

/// `floor((len + 2·pad − kernel) / stride) + 1`, or `None` if the kernel
/// does not fit.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn new<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, stride: usize, pad: usize) -> Result<Self, NnError> {
        if x.rank() != 4 || kernel.rank() != 4 {
            return Err(NnError::shape(
                "conv2d",
                format!("expected rank-4 input and kernel, got {:?} and {:?}", x.dims(), kernel.dims()),
            ));
        }
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (k, kc, kh, kw) = (kernel.dim(0), kernel.dim(1), kernel.dim(2), kernel.dim(3));
        if kc != c {
            return Err(NnError::shape(
                "conv2d",
                format!("input has {c} channels, kernel expects {kc}"),
            ));
        }
        let ho = conv_output_len(h, kh, stride, pad);
        let wo = conv_output_len(w, kw, stride, pad);
        match (ho, wo) {
            (Some(ho), Some(wo)) => Ok(Self {
                n,
                c,
                h,
                w,
                k,
                kh,
                kw,
                stride,
                pad,
                ho,
                wo,
            }),
            _ => Err(NnError::shape(
                "conv2d",
                format!("kernel {kh}x{kw} stride {stride} pad {pad} does not fit {h}x{w}"),
            )),
        }
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    fn in_image(&self) -> usize {
        self.c * self.h * self.w
    }
}

/// Unfolds one `C × H × W` image into a `(C·kh·kw) × (Ho·Wo)` matrix.
fn im2col<T: Real>(img: &[T], g: &Geometry, cols: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &img[(c * g.h + iy as usize) * g.w..][..g.w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: accumulates columns back into an image gradient.
fn col2im<T: Real>(cols: &[T], g: &Geometry, img: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut img[(c * g.h + iy as usize) * g.w..][..g.w];
                    for (ox, &v) in row[oy * g.wo..(oy + 1) * g.wo].iter().enumerate() {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of an `N × C × H × W` input with a `K × C × kh × kw`
/// kernel, zero padding `pad` on every side.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>, NnError> {
    let g = Geometry::new(x, kernel, stride, pad)?;
    let plane = g.out_plane();
    let patch = g.patch();
    let mut out = vec![T::zero(); g.n * g.k * plane];
    let xd = x.data();
    let kd = kernel.data();
    map_chunks(&mut out, g.k * plane, |img, dst| {
        let mut cols = vec![T::zero(); patch * plane];
        im2col(&xd[img * g.in_image()..][..g.in_image()], &g, &mut cols);
        T::gemm(g.k, patch, plane, T::one(), kd, patch, 1, &cols, plane, 1, T::zero(), dst, plane, 1);
    });
    Tensor::from_vec(&[g.n, g.k, g.ho, g.wo], out)
}

/// Gradients of `conv2d_forward` with respect to the input and the kernel.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, Tensor<T>), NnError> {
    let g = Geometry::new(x, kernel, stride, pad)?;
    if grad_out.dims() != [g.n, g.k, g.ho, g.wo] {
        return Err(NnError::shape(
            "conv2d_backward",
            format!("grad_out {:?}, expected {:?}", grad_out.dims(), [g.n, g.k, g.ho, g.wo]),
        ));
    }
    let plane = g.out_plane();
    let patch = g.patch();
    let xd = x.data();
    let kd = kernel.data();
    let gd = grad_out.data();
    let mut grad_x = vec![T::zero(); x.len()];
    let partials: Vec<Vec<T>> = map_chunks(&mut grad_x, g.in_image(), |img, gx| {
        let gout = &gd[img * g.k * plane..][..g.k * plane];
        let mut cols = vec![T::zero(); patch * plane];
        im2col(&xd[img * g.in_image()..][..g.in_image()], &g, &mut cols);
        let mut gk = vec![T::zero(); g.k * patch];
        // gk = gout · colsᵀ
        T::gemm(g.k, plane, patch, T::one(), gout, plane, 1, &cols, 1, plane, T::zero(), &mut gk, patch, 1);
        // gcols = kernelᵀ · gout
        T::gemm(patch, g.k, plane, T::one(), kd, 1, patch, gout, plane, 1, T::zero(), &mut cols, plane, 1);
        col2im(&cols, &g, gx);
        gk
    });
    let mut grad_kernel = vec![T::zero(); kernel.len()];
    for partial in &partials {
        for (acc, &v) in grad_kernel.iter_mut().zip(partial) {
            *acc += v;
        }
    }
    Ok((
        Tensor::from_vec(x.dims(), grad_x)?,
        Tensor::from_vec(kernel.dims(), grad_kernel)?,
    ))
}
