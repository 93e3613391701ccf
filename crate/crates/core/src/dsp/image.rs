use super::{Spectrogram, SpectrogramConfig};
use crate::matrix::Matrix;

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn bilinear_resize(src: &Matrix<f64>, out_rows: usize, out_cols: usize) -> Matrix<f64> {
    let (in_rows, in_cols) = (src.rows(), src.cols());
    let axis = |out: usize, inp: usize| {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(move |i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = libm::floor(pos) as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect::<alloc::vec::Vec<_>>()
    };
    let rows = axis(out_rows, in_rows);
    let cols = axis(out_cols, in_cols);
    Matrix::from_fn(out_rows, out_cols, |r, c| {
        let (r0, r1, fr) = rows[r];
        let (c0, c1, fc) = cols[c];
        let top = src.get(r0, c0) + (src.get(r0, c1) - src.get(r0, c0)) * fc;
        let bottom = src.get(r1, c0) + (src.get(r1, c1) - src.get(r1, c0)) * fc;
        top + (bottom - top) * fr
    })
}

/// Min–max normalizes to `[0, 1]` (a constant input becomes 0.5), flips so
/// the lowest mel band is the bottom row, and resizes to
/// `image_height_px × image_width_px`.
pub fn render_image(spec: &Spectrogram, config: &SpectrogramConfig) -> Matrix<f32> {
    let (lo, hi) = spec.min_max();
    let range = hi - lo;
    let rows = spec.n_mels();
    let normalized = Matrix::from_fn(rows, spec.n_frames(), |r, c| {
        let v = spec.values.get(rows - 1 - r, c);
        if range > 0.0 {
            (v - lo) / range
        } else {
            0.5
        }
    });
    bilinear_resize(&normalized, config.image_height_px, config.image_width_px)
        .map(|v| v.clamp(0.0, 1.0) as f32)
}
