use std::f64::consts::PI;

use lifas_core::dsp::{
    bilinear_resize, fft, hz_to_mel, mel_filterbank, mel_to_hz, melspectrogram, power_to_db, render_image, stft,
    Spectrogram, SpectrogramConfig,
};
use lifas_core::Matrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    // reduce k·t mod n first so the angle stays accurate
                    let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    v * Complex64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn fft_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = random_signal(&mut rng, 1024);
        worst = worst.max(rel_l2(&fft(&x).unwrap(), &naive_dft(&x)));
    }
    assert!(worst <= 1e-5, "worst relative L2 error {worst:e}");
}

#[test]
fn fft_small_cases() {
    let mut impulse = vec![Complex64::new(0.0, 0.0); 8];
    impulse[0] = Complex64::new(1.0, 0.0);
    assert!(fft(&impulse).unwrap().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    let ones = vec![Complex64::new(1.0, 0.0); 8];
    let spectrum = fft(&ones).unwrap();
    assert!((spectrum[0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    assert!(spectrum[1..].iter().all(|v| v.norm() < 1e-12));
    assert!(fft(&ones[..6]).is_err());
}

#[test]
fn parseval_on_random_signals() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let x = random_signal(&mut rng, 1024);
        let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq: f64 = fft(&x).unwrap().iter().map(|v| v.norm_sqr()).sum::<f64>() / 1024.0;
        assert!(((time - freq) / time).abs() <= 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, log_n in 1u32..10) {
        let n = 1usize << log_n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_signal(&mut rng, n);
        let y = random_signal(&mut rng, n);
        let combo: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let lhs = fft(&combo).unwrap();
        let rhs: Vec<Complex64> = fft(&x).unwrap().iter().zip(fft(&y).unwrap()).map(|(p, q)| p * a + q * b).collect();
        if rhs.iter().map(|v| v.norm_sqr()).sum::<f64>() > 1e-12 {
            prop_assert!(rel_l2(&lhs, &rhs) <= 1e-6);
        }
    }

    #[test]
    fn render_image_is_bounded_and_sized(
        rows in 2usize..12,
        cols in 2usize..30,
        height in 1usize..40,
        width in 1usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = SpectrogramConfig { image_height_px: height, image_width_px: width, ..Default::default() };
        let values = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-80.0..0.0));
        let image = render_image(&Spectrogram { values, config: config.clone() }, &config);
        prop_assert_eq!((image.rows(), image.cols()), (height, width));
        prop_assert!(image.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn mel_formula_identities() {
    assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
    assert_eq!(mel_to_hz(0.0).unwrap(), 0.0);
    let expected = 2595.0 * 2.0f64.log10();
    assert!(((hz_to_mel(700.0).unwrap() - expected) / expected).abs() <= 1e-9);
    assert!((mel_to_hz(expected).unwrap() - 700.0).abs() <= 700.0 * 1e-9);
    for i in 0..100 {
        let f = 8000.0 * i as f64 / 99.0;
        let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
        assert!((back - f).abs() <= 1e-9 * f.max(f64::MIN_POSITIVE), "{f} -> {back}");
    }
    for f in [20.0, 440.0, 8000.0] {
        let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
        assert!(((back - f) / f).abs() <= 1e-9);
    }
    assert!(hz_to_mel(-1.0).is_err());
    assert!(mel_to_hz(-1.0).is_err());
}

#[test]
fn filterbank_structure() {
    let config = SpectrogramConfig::default();
    let fb = mel_filterbank(&config).unwrap();
    assert_eq!((fb.weights.rows(), fb.weights.cols()), (40, 513));
    // independent breakpoint recomputation
    let lo = 2595.0 * (1.0 + 20.0f64 / 700.0).log10();
    let hi = 2595.0 * (1.0 + 8000.0f64 / 700.0).log10();
    let centres: Vec<f64> = (1..=40)
        .map(|i| {
            let m = lo + (hi - lo) * i as f64 / 41.0;
            700.0 * (10f64.powf(m / 2595.0) - 1.0)
        })
        .collect();
    for (got, want) in fb.center_frequencies_hz().iter().zip(&centres) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    assert!(centres.windows(2).all(|w| w[0] < w[1]));
    assert!(centres.iter().all(|&f| f > 20.0 && f < 8000.0));

    let peaks = fb.peak_bins();
    assert!(peaks.windows(2).all(|w| w[0] < w[1]), "{peaks:?}");
    for r in 0..40 {
        let row = fb.weights.row(r);
        assert!(row.iter().all(|&w| w >= 0.0));
        assert!(row.iter().sum::<f64>() > 0.0);
        assert_eq!(row.iter().cloned().fold(0.0, f64::max), 1.0);
        let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
        assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len(), "row {r} support not contiguous");
    }
    let bad = SpectrogramConfig { fmax_hz: 9000.0, ..config };
    assert!(mel_filterbank(&bad).is_err());
}

fn sine(freq: f64, len: usize, rate: f64) -> Vec<f32> {
    (0..len).map(|t| (0.5 * (2.0 * PI * freq * t as f64 / rate).sin()) as f32).collect()
}

#[test]
fn stft_framing_and_peak() {
    let config = SpectrogramConfig::default();
    let z = stft(&vec![0.0; 60_000], &config).unwrap();
    assert_eq!((z.rows(), z.cols()), (513, 116));
    assert!(z.as_slice().iter().all(|v| v.norm() == 0.0));

    let x = sine(32.0 * 16000.0 / 1024.0, 1024, 16000.0);
    let frame = stft(&x, &config).unwrap();
    assert_eq!(frame.cols(), 1);
    let mags: Vec<f64> = (0..513).map(|k| frame.get(k, 0).norm()).collect();
    let peak = (0..513).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
    assert_eq!(peak, 32);
    assert!(stft(&x[..1000], &config).is_err());
}

#[test]
fn spectrogram_and_image_shapes() {
    let config = SpectrogramConfig::default();
    let x = sine(440.0, 60_000, 16000.0);
    let spec = melspectrogram(&x, &config).unwrap();
    assert_eq!((spec.n_mels(), spec.n_frames()), (40, 116));
    let (lo, hi) = spec.min_max();
    assert!(hi - lo <= config.top_db + 1e-9);
    let image = render_image(&spec, &config);
    assert_eq!((image.rows(), image.cols()), (288, 432));
}

#[test]
fn zero_signal_gives_flat_spectrogram() {
    let spec = melspectrogram(&vec![0.0; 4096], &SpectrogramConfig::default()).unwrap();
    let (lo, hi) = spec.min_max();
    assert_eq!(lo, hi);
    let image = render_image(&spec, &spec.config);
    assert!(image.as_slice().iter().all(|&v| v == 0.5));
}

#[test]
fn sine_energy_sits_in_low_rows_noise_does_not() {
    let config = SpectrogramConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f32> = (0..60_000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let tone = sine(300.0, 60_000, 16000.0);
    let row_argmax = |spec: &Spectrogram| -> Vec<usize> {
        (0..spec.n_frames())
            .map(|c| (0..spec.n_mels()).max_by(|&a, &b| spec.values.get(a, c).total_cmp(&spec.values.get(b, c))).unwrap())
            .collect()
    };
    let tone_rows = row_argmax(&melspectrogram(&tone, &config).unwrap());
    let noise_rows = row_argmax(&melspectrogram(&noise, &config).unwrap());
    assert!(tone_rows.iter().all(|&r| r < 10), "{tone_rows:?}");
    let mean_noise = noise_rows.iter().sum::<usize>() as f64 / noise_rows.len() as f64;
    assert!(mean_noise > 15.0, "{mean_noise}");
}

#[test]
fn trailing_samples_short_of_a_frame_change_nothing() {
    let config = SpectrogramConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f32> = (0..60_000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let base = melspectrogram(&x, &config).unwrap();
    // 60000 − 1024 = 58976 = 115·512 + 96, so up to 415 more samples add no frame
    for extra in [1usize, 200, 415] {
        let mut longer = x.clone();
        longer.extend((0..extra).map(|_| rng.random_range(-0.5f32..0.5)));
        assert_eq!(melspectrogram(&longer, &config).unwrap(), base);
    }
    let mut longer = x.clone();
    longer.extend(std::iter::repeat_n(0.1f32, 416));
    assert_eq!(melspectrogram(&longer, &config).unwrap().n_frames(), 117);
}

#[test]
fn power_to_db_rules() {
    let flat = Matrix::filled(3, 4, 2.5);
    assert!(power_to_db(&flat, 80.0).as_slice().iter().all(|&v| v == 0.0));
    let m = Matrix::from_vec(1, 3, vec![10.0, 1.0, 1e-12]).unwrap();
    let db = power_to_db(&m, 80.0);
    assert_eq!(db.get(0, 0), 0.0);
    assert!((db.get(0, 1) + 10.0).abs() < 1e-12);
    assert_eq!(db.get(0, 2), -80.0);
}

#[test]
fn bilinear_checkerboard_average() {
    let m = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!((bilinear_resize(&m, 1, 1).get(0, 0) - 0.5).abs() < 1e-15);
    let m = Matrix::from_vec(2, 2, vec![0.2, 0.4, 0.6, 1.0]).unwrap();
    assert!((bilinear_resize(&m, 1, 1).get(0, 0) - 0.55).abs() < 1e-15);
}
