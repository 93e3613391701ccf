//! PCM16 WAV coding, resampling and fixed-length clip framing.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV header: {field}")]
    MalformedHeader { field: &'static str },
    #[error("unsupported WAV encoding: {field} = {value}")]
    Unsupported { field: &'static str, value: u32 },
    #[error("truncated data chunk: header declares {declared} bytes, {available} available")]
    TruncatedData { declared: usize, available: usize },
    #[error("audio clip has no samples")]
    Empty,
    #[error("sample {index} is {value}, outside the finite range [-1, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
}

/// Mono PCM samples at a fixed rate with optional corpus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
    pub language: Option<String>,
    pub speaker_id: Option<String>,
    pub source_path: Option<String>,
}

impl AudioClip {
    /// Validates and wraps `samples`. Every sample must be finite and within
    /// `[-1, 1]`.
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            language: None,
            speaker_id: None,
            source_path: None,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    fn with_samples(&self, samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
            language: self.language.clone(),
            speaker_id: self.speaker_id.clone(),
            source_path: self.source_path.clone(),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], AudioError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(AudioError::MalformedHeader { field })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, AudioError> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, AudioError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    channels: u16,
    sample_rate_hz: u32,
}

/// Decodes a RIFF/WAVE container holding 16-bit PCM with one or two channels.
///
/// PCM value `s` becomes `s / 32768`; stereo frames are averaged.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "RIFF tag")? != b"RIFF" {
        return Err(AudioError::MalformedHeader { field: "RIFF tag" });
    }
    r.u32("RIFF size")?;
    if r.take(4, "WAVE tag")? != b"WAVE" {
        return Err(AudioError::MalformedHeader { field: "WAVE tag" });
    }

    let mut format: Option<Format> = None;
    loop {
        if r.pos + 8 > bytes.len() {
            return Err(AudioError::MalformedHeader { field: "data chunk" });
        }
        let id = r.take(4, "chunk id")?;
        let size = r.u32("chunk size")? as usize;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::MalformedHeader { field: "fmt chunk size" });
                }
                let body = r.take(size, "fmt chunk")?;
                let mut f = Reader { bytes: body, pos: 0 };
                let audio_format = f.u16("audio format")?;
                let channels = f.u16("channel count")?;
                let sample_rate_hz = f.u32("sample rate")?;
                f.u32("byte rate")?;
                f.u16("block align")?;
                let bits = f.u16("bits per sample")?;
                if audio_format != 1 {
                    return Err(AudioError::Unsupported {
                        field: "audio format",
                        value: audio_format.into(),
                    });
                }
                if bits != 16 {
                    return Err(AudioError::Unsupported {
                        field: "bits per sample",
                        value: bits.into(),
                    });
                }
                if channels != 1 && channels != 2 {
                    return Err(AudioError::Unsupported {
                        field: "channel count",
                        value: channels.into(),
                    });
                }
                if sample_rate_hz == 0 {
                    return Err(AudioError::MalformedHeader { field: "sample rate" });
                }
                format = Some(Format {
                    channels,
                    sample_rate_hz,
                });
                // chunks are word aligned
                if size % 2 == 1 {
                    r.take(1, "fmt padding")?;
                }
            }
            b"data" => {
                let fmt = format.ok_or(AudioError::MalformedHeader { field: "fmt chunk" })?;
                let available = bytes.len() - r.pos;
                if size > available {
                    return Err(AudioError::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                let data = &bytes[r.pos..r.pos + size];
                let frame_bytes = 2 * fmt.channels as usize;
                let samples: Vec<f32> = data
                    .chunks_exact(frame_bytes)
                    .map(|frame| {
                        let sum: f32 = frame
                            .chunks_exact(2)
                            .map(|s| i16::from_le_bytes([s[0], s[1]]) as f32 / 32768.0)
                            .sum();
                        sum / fmt.channels as f32
                    })
                    .collect();
                return AudioClip::new(samples, fmt.sample_rate_hz);
            }
            _ => {
                let skip = size + (size % 2);
                r.take(skip, "chunk body")?;
            }
        }
    }
}

/// Quantizes one sample to PCM16: `round(f · 32768)` clamped to the i16 range.
pub fn quantize_pcm16(value: f32) -> i16 {
    let scaled = libm::round(value as f64 * 32768.0);
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Encodes a clip as mono 16-bit PCM RIFF/WAVE.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    out
}

/// Linear-interpolation resampler. Output length is
/// `floor(len · target / source)`.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip, AudioError> {
    if target_rate_hz == 0 {
        return Err(AudioError::ZeroSampleRate);
    }
    let source = clip.sample_rate_hz as u64;
    let target = target_rate_hz as u64;
    if source == target {
        return Ok(clip.clone());
    }
    let input = &clip.samples;
    let out_len = (input.len() as u64 * target / source) as usize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len as u64 {
        // exact rational source position i·source/target
        let num = i * source;
        let idx = (num / target) as usize;
        let frac = (num % target) as f64 / target as f64;
        let a = input[idx] as f64;
        let b = input.get(idx + 1).copied().map_or(a, |v| v as f64);
        out.push((a + (b - a) * frac) as f32);
    }
    if out.is_empty() {
        return Err(AudioError::Empty);
    }
    Ok(clip.with_samples(out, target_rate_hz))
}

/// Every full window of `clip_len_samples` starting at multiples of
/// `stride_samples`. Audio shorter than one window yields nothing.
pub fn extract_clips(clip: &AudioClip, clip_len_samples: usize, stride_samples: usize) -> Vec<AudioClip> {
    assert!(clip_len_samples > 0 && stride_samples > 0, "window and stride must be positive");
    let total = clip.samples.len();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + clip_len_samples <= total {
        out.push(clip.with_samples(
            clip.samples[start..start + clip_len_samples].to_vec(),
            clip.sample_rate_hz,
        ));
        start += stride_samples;
    }
    out
}
