use lifas_core::dsp::fft;
use lifas_core::synth::SyntheticTaskSpec;
use num_complex::Complex64;

/// Fraction of a clip's spectral energy outside `[lo, hi]` Hz, measured with
/// a zero-padded FFT of the whole clip.
fn out_of_band_fraction(samples: &[f32], rate: f64, lo: f64, hi: f64) -> f64 {
    let n = samples.len().next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &s) in buf.iter_mut().zip(samples) {
        b.re = s as f64;
    }
    let spectrum = fft(&buf).unwrap();
    let (mut inside, mut outside) = (0.0, 0.0);
    for (k, v) in spectrum.iter().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        if f >= lo && f <= hi {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
        }
    }
    outside / (inside + outside)
}

#[test]
fn clips_stay_in_band() {
    for spec in [SyntheticTaskSpec::two_class(2, 1, 7), SyntheticTaskSpec::six_class(2, 1, 7)] {
        for (ci, class) in spec.classes.iter().enumerate() {
            for clip in 0..spec.clips_per_class() {
                let x = spec.clip_samples(ci, clip);
                assert_eq!(x.len(), 60_000);
                let frac = out_of_band_fraction(&x, 16_000.0, class.band_hz[0], class.band_hz[1]);
                assert!(frac <= 0.01, "{} clip {clip}: {frac}", class.name);
            }
        }
    }
}

#[test]
fn longer_clips_stay_in_band() {
    let mut spec = SyntheticTaskSpec::two_class(1, 1, 3);
    spec.clip_len_samples = 100_000;
    let x = spec.clip_samples(1, 0);
    assert_eq!(x.len(), 100_000);
    assert!(out_of_band_fraction(&x, 16_000.0, 2000.0, 4000.0) <= 0.01);
}

#[test]
fn envelope_follows_the_modulation_rate() {
    // squared-signal spectrum peaks at the AM rate
    let spec = SyntheticTaskSpec::two_class(1, 1, 9);
    for (ci, class) in spec.classes.iter().enumerate() {
        let x = spec.clip_samples(ci, 0);
        let n = 65536;
        let mean: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (b, &s) in buf.iter_mut().zip(&x) {
            b.re = (s as f64).powi(2) - mean;
        }
        let spectrum = fft(&buf).unwrap();
        let bin = 16_000.0 / n as f64;
        let limit = (30.0 / bin) as usize;
        let peak = (1..limit).max_by(|&a, &b| spectrum[a].norm().total_cmp(&spectrum[b].norm())).unwrap();
        assert!((peak as f64 * bin - class.am_rate_hz).abs() < 0.75, "{}: {}", class.name, peak as f64 * bin);
    }
}
