//! Spectrogram and image file formats.

use lifas_core::{Matrix, Spectrogram};

/// Row-major CSV, one mel band per line, nine significant digits.
pub fn spectrogram_csv(spec: &Spectrogram) -> Vec<u8> {
    let mut out = String::new();
    for r in 0..spec.values.rows() {
        let line: Vec<String> = spec.values.row(r).iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// Binary 8-bit PGM. Pixel values in `[0, 1]` map to `round(v * 255)`.
pub fn pgm(image: &Matrix<f32>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|&v| (f64::from(v).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}
