use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

/// Precomputed twiddles and bit-reversal permutation for an in-place
/// iterative radix-2 transform of one length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self, DspError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(DspError::NotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        // e^{-2πik/n}, each evaluated directly to avoid recurrence drift
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward DFT, `X[k] = Σ x[n]·e^(−2πi·kn/N)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        for i in 0..self.n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let step = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * step];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }

    /// Inverse DFT including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

/// Forward FFT of a power-of-two length signal.
pub fn fft(signal: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let plan = FftPlan::new(signal.len())?;
    let mut buf = signal.to_vec();
    plan.forward(&mut buf);
    Ok(buf)
}

/// Inverse FFT (normalized by `1/N`).
pub fn ifft(spectrum: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let plan = FftPlan::new(spectrum.len())?;
    let mut buf = spectrum.to_vec();
    plan.inverse(&mut buf);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![c(0.0); 8];
        x[0] = c(1.0);
        let out = fft(&x).unwrap();
        assert!(out.iter().all(|v| (*v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn constant_gives_dc_only() {
        let out = fft(&[c(1.0); 8]).unwrap();
        assert!((out[0] - c(8.0)).norm() < 1e-15);
        assert!(out[1..].iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn length_one_and_errors() {
        assert_eq!(fft(&[c(3.0)]).unwrap(), vec![c(3.0)]);
        assert_eq!(fft(&[c(0.0); 6]), Err(DspError::NotPowerOfTwo(6)));
        assert_eq!(fft(&[]), Err(DspError::NotPowerOfTwo(0)));
    }

    #[test]
    fn inverse_round_trip() {
        let x: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new(i as f64 * 0.3 - 1.0, (i * i) as f64 * 0.01))
            .collect();
        let back = ifft(&fft(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
