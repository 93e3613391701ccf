use std::f64::consts::PI;

use lifas_core::audio::{decode_wav, encode_wav, extract_clips, resample, AudioError};
use lifas_core::dsp::fft;
use lifas_core::AudioClip;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #[test]
    fn wav_round_trip_within_one_lsb(
        samples in prop::collection::vec(-1.0f32..=1.0, 1..2000),
        rate in prop_oneof![Just(8000u32), Just(16000), Just(44100), Just(48000)],
    ) {
        let clip = AudioClip::new(samples.clone(), rate).unwrap();
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        prop_assert_eq!(back.sample_rate_hz(), rate);
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in back.samples().iter().zip(&samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0, "{} vs {}", a, b);
        }
    }

    #[test]
    fn framed_clips_have_exact_length(len in 1usize..5000, clip_len in 1usize..1500, stride in 1usize..1500) {
        let clip = AudioClip::new(vec![0.1; len], 16000).unwrap();
        let clips = extract_clips(&clip, clip_len, stride);
        let expected = if len < clip_len { 0 } else { (len - clip_len) / stride + 1 };
        prop_assert_eq!(clips.len(), expected);
        prop_assert!(clips.iter().all(|c| c.len() == clip_len));
    }

    #[test]
    fn resample_keeps_constants(src in 1000u32..50000, dst in 1000u32..50000, len in 10usize..3000) {
        let clip = AudioClip::new(vec![0.25; len], src).unwrap();
        match resample(&clip, dst) {
            Ok(out) => {
                prop_assert_eq!(out.len() as u64, len as u64 * dst as u64 / src as u64);
                prop_assert!(out.samples().iter().all(|&v| v == 0.25));
            }
            Err(e) => prop_assert_eq!(e, AudioError::Empty),
        }
    }
}

#[test]
fn encode_zero_clip_and_endpoints() {
    let clip = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
    let bytes = encode_wav(&clip);
    assert_eq!(bytes.len(), 44 + 32000);
    assert!(bytes[44..].iter().all(|&b| b == 0));
    let ends = AudioClip::new(vec![1.0, -1.0], 16000).unwrap();
    let bytes = encode_wav(&ends);
    assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 32767);
    assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), -32768);
    assert_eq!(decode_wav(&bytes).unwrap().samples()[1], -1.0);
}

#[test]
fn resampled_sine_keeps_its_frequency() {
    let x: Vec<f32> = (0..48_000 * 2).map(|t| (0.5 * (2.0 * PI * 440.0 * t as f64 / 48_000.0).sin()) as f32).collect();
    let out = resample(&AudioClip::new(x, 48_000).unwrap(), 16_000).unwrap();
    assert_eq!(out.len(), 32_000);
    let n = 16384;
    let buf: Vec<Complex64> = out.samples()[..n].iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    let spectrum = fft(&buf).unwrap();
    let peak = (1..n / 2).max_by(|&a, &b| spectrum[a].norm().total_cmp(&spectrum[b].norm())).unwrap();
    let bin_hz = 16_000.0 / n as f64;
    assert!((peak as f64 * bin_hz - 440.0).abs() <= bin_hz, "peak at {} Hz", peak as f64 * bin_hz);
}

#[test]
fn clip_framing_examples() {
    let clip = AudioClip::new(vec![0.0; 60_000], 16_000).unwrap();
    let clips = extract_clips(&clip, 60_000, 60_000);
    assert_eq!(clips.len(), 1);
    assert_eq!(clips[0].duration_secs(), 3.75);
    assert!(extract_clips(&AudioClip::new(vec![0.0; 59_999], 16_000).unwrap(), 60_000, 60_000).is_empty());
    let ramp: Vec<f32> = (0..130_000).map(|i| i as f32 / 130_000.0).collect();
    let clips = extract_clips(&AudioClip::new(ramp.clone(), 16_000).unwrap(), 60_000, 60_000);
    assert_eq!(clips.len(), 2);
    assert_eq!(clips[0].samples(), &ramp[..60_000]);
    assert_eq!(clips[1].samples(), &ramp[60_000..120_000]);
}
