//! Seeded synthetic corpus with a known latent rating.
//!
//! Each subject gets a smooth rating track (three low-frequency sinusoids,
//! clipped to `[-1, 1]`). With `q = (r + 1) / 2`:
//!
//! - video frames are sinusoidal gratings with contrast `0.08 + 0.32 q` and
//!   `2 + 4 q` cycles per frame width, random orientation and phase per frame,
//!   plus Gaussian pixel noise;
//! - audio is a tone at `150 + 350 q` Hz with amplitude `0.05 + 0.35 q` and a
//!   second harmonic, plus Gaussian noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::SyntheticConfig;
use super::corpus::{self, Manifest, AUDIO_FILE, FRAMES_FILE, MANIFEST, RATINGS_FILE};
use super::derive_seed;
use crate::streams::{samples_for_frames, AUDIO_HOP, FRAME_RATE, SAMPLE_RATE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub ratings: Vec<f64>,
    /// `T x size x size` pixels in `[0, 1]`.
    pub frames: Vec<f32>,
    pub size: usize,
    pub audio: Vec<f32>,
    /// Pixel noise drawn for pixel (0, 0) of every frame.
    pub noise_probe: Vec<f64>,
}

fn rating_track(frames: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.25..0.5),
                rng.gen_range(0.005..0.06),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let offset = rng.gen_range(-0.2..0.2);
    (0..frames)
        .map(|t| {
            let time = t as f64 / FRAME_RATE as f64;
            let v: f64 = comps.iter().map(|&(a, f, p)| a * (2.0 * PI * f * time + p).sin()).sum();
            (v + offset).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Generates one subject in memory.
pub fn synthesize_subject(
    frames: usize,
    size: usize,
    pixel_noise: f64,
    audio_noise: f64,
    seed: u64,
) -> SyntheticSubject {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratings = rating_track(frames, &mut rng);
    let px_noise = Normal::new(0.0, pixel_noise.max(0.0)).unwrap();
    let mut pixels = Vec::with_capacity(frames * size * size);
    let mut noise_probe = Vec::with_capacity(frames);
    for &r in &ratings {
        let q = (r + 1.0) / 2.0;
        let contrast = 0.08 + 0.32 * q;
        let cycles = 2.0 + 4.0 * q;
        let theta: f64 = rng.gen_range(0.0..PI);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let (c, s) = (theta.cos(), theta.sin());
        for y in 0..size {
            for x in 0..size {
                let u = (x as f64 * c + y as f64 * s) / size as f64;
                let n = px_noise.sample(&mut rng);
                if x == 0 && y == 0 {
                    noise_probe.push(n);
                }
                let v = 0.5 + contrast * (2.0 * PI * cycles * u + phase).sin() + n;
                pixels.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }

    let au_noise = Normal::new(0.0, audio_noise.max(0.0)).unwrap();
    let n_samples = samples_for_frames(frames);
    let mut audio = Vec::with_capacity(n_samples);
    let mut phase = 0.0f64;
    for i in 0..n_samples {
        // rating interpolated at the fractional frame position of this sample
        let pos = i as f64 / AUDIO_HOP as f64;
        let t0 = (pos.floor() as usize).min(frames - 1);
        let t1 = (t0 + 1).min(frames - 1);
        let frac = (pos - t0 as f64).min(1.0);
        let r = ratings[t0] + (ratings[t1] - ratings[t0]) * frac;
        let q = (r + 1.0) / 2.0;
        let freq = 150.0 + 350.0 * q;
        let amp = 0.05 + 0.35 * q;
        phase = (phase + 2.0 * PI * freq / SAMPLE_RATE as f64) % (2.0 * PI);
        let v = amp * (phase.sin() + 0.3 * (2.0 * phase).sin()) + au_noise.sample(&mut rng);
        audio.push(v.clamp(-1.0, 1.0) as f32);
    }

    SyntheticSubject {
        ratings,
        frames: pixels,
        size,
        audio,
        noise_probe,
    }
}

pub fn subject_id(i: usize) -> String {
    format!("s{:02}", i + 1)
}

/// Writes a full corpus (manifest plus per-subject files) under `root`.
pub fn generate_synthetic(root: &Path, cfg: &SyntheticConfig, seed: u64) -> Result<Manifest> {
    if cfg.subjects < 2 || cfg.train_subjects == 0 || cfg.train_subjects >= cfg.subjects {
        return Err(Error::InvalidArgument(format!(
            "need at least one training and one test subject, got {} subjects with {} for training",
            cfg.subjects, cfg.train_subjects
        )));
    }
    if cfg.frames == 0 || cfg.frame_size == 0 {
        return Err(Error::InvalidArgument(
            "frame count and frame size must be positive".into(),
        ));
    }
    let ids: Vec<String> = (0..cfg.subjects).map(subject_id).collect();
    for (i, id) in ids.iter().enumerate() {
        let s = synthesize_subject(
            cfg.frames,
            cfg.frame_size,
            cfg.pixel_noise,
            cfg.audio_noise,
            derive_seed(seed, &format!("synthetic/{i}")),
        );
        let dir = root.join(id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        corpus::write_frames(&dir.join(FRAMES_FILE), cfg.frames, s.size, s.size, &s.frames)?;
        corpus::write_wav(&dir.join(AUDIO_FILE), &s.audio)?;
        corpus::write_ratings(&dir.join(RATINGS_FILE), &s.ratings)?;
    }
    let manifest = Manifest {
        subjects: ids.clone(),
        train: ids[..cfg.train_subjects].to_vec(),
        test: ids[cfg.train_subjects..].to_vec(),
        frames: ids
            .iter()
            .map(|id| (id.clone(), cfg.frames))
            .collect::<BTreeMap<_, _>>(),
    };
    let path = root.join(MANIFEST);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
