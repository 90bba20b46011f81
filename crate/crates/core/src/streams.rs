//! The video and audio stream networks, audio windowing and per-frame
//! feature concatenation.
//!
//! Both streams share one layout:
//!
//! ```text
//! conv -> relu -> maxpool -> lrn        (stage 1)
//! conv -> relu -> maxpool               (stage 2)
//! affine (512)                          (stage 3, the learned features)
//! dropout -> affine (1)                 (regressor head, training only)
//! ```
//!
//! Frames are assumed to run on a 25 fps clock: one 60 ms audio window every
//! 40 ms, so consecutive windows overlap by 20 ms.

use crate::network::{Init, LayerSpec, NetworkModel};
use crate::ops::{ConvSpec, LrnSpec, PoolSpec};
use crate::{Error, FeatureMatrix, Result, Tensor};

pub const SAMPLE_RATE: u32 = 44_100;
pub const FRAME_RATE: u32 = 25;
/// 60 ms at 44.1 kHz.
pub const AUDIO_WINDOW: usize = 2646;
/// 40 ms at 44.1 kHz.
pub const AUDIO_HOP: usize = 1764;
/// 20 ms at 44.1 kHz.
pub const AUDIO_OVERLAP: usize = AUDIO_WINDOW - AUDIO_HOP;
pub const FEATURE_WIDTH: usize = 512;
pub const AUDIOVISUAL_WIDTH: usize = 2 * FEATURE_WIDTH;
pub const FULL_FRAME_SIZE: usize = 128;

/// Index of the stage-3 affine layer in both stream layouts.
pub const FEATURE_LAYER: usize = 7;
const DEFAULT_DROPOUT: f64 = 0.5;

fn scaled(count: usize, scale: f64) -> usize {
    ((count as f64 * scale).round() as usize).max(1)
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "stream scale must lie in (0, 1], got {scale}"
        )));
    }
    Ok(())
}

fn stream_layers(conv1: ConvSpec, conv2: ConvSpec, pool: PoolSpec) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv(conv1),
        LayerSpec::Relu,
        LayerSpec::MaxPool(pool.clone()),
        LayerSpec::Lrn(LrnSpec::default()),
        LayerSpec::Conv(conv2),
        LayerSpec::Relu,
        LayerSpec::MaxPool(pool),
        LayerSpec::Affine { width: FEATURE_WIDTH },
        LayerSpec::Dropout { rate: DEFAULT_DROPOUT },
        LayerSpec::Affine { width: 1 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoStreamConfig {
    pub frame_size: usize,
    pub filters: [usize; 2],
    pub kernel: usize,
    pub pool: usize,
}

impl VideoStreamConfig {
    /// 128x128 greyscale frames, 128 and 256 filters of 5x5.
    pub fn full() -> Self {
        Self {
            frame_size: FULL_FRAME_SIZE,
            filters: [128, 256],
            kernel: 5,
            pool: 2,
        }
    }

    /// Shrinks the frame extent and both filter counts by `scale`.
    pub fn scaled(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        let p = Self::full();
        Ok(Self {
            frame_size: scaled(p.frame_size, scale),
            filters: [scaled(p.filters[0], scale), scaled(p.filters[1], scale)],
            ..p
        })
    }

    pub fn input_shape(&self) -> Vec<usize> {
        vec![1, self.frame_size, self.frame_size]
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let k = [self.kernel, self.kernel];
        stream_layers(
            ConvSpec::new_2d(1, self.filters[0], k),
            ConvSpec::new_2d(self.filters[0], self.filters[1], k),
            PoolSpec::new(&[self.pool, self.pool], &[self.pool, self.pool]),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioStreamConfig {
    pub window: usize,
    pub filters: [usize; 2],
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
}

impl AudioStreamConfig {
    /// 2646-sample windows, 32 and 64 filters of length 20 with stride 2.
    pub fn full() -> Self {
        Self {
            window: AUDIO_WINDOW,
            filters: [32, 64],
            kernel: 20,
            stride: 2,
            pool: 2,
        }
    }

    /// Shrinks the filter counts by `scale`. The window length is fixed by the
    /// sample rate and frame clock and is not scaled.
    pub fn scaled(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        let p = Self::full();
        Ok(Self {
            filters: [scaled(p.filters[0], scale), scaled(p.filters[1], scale)],
            ..p
        })
    }

    pub fn input_shape(&self) -> Vec<usize> {
        vec![1, self.window]
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        stream_layers(
            ConvSpec::new_1d(1, self.filters[0], self.kernel, self.stride),
            ConvSpec::new_1d(self.filters[0], self.filters[1], self.kernel, self.stride),
            PoolSpec::new(&[self.pool], &[self.pool]),
        )
    }
}

/// Flattened width entering stage 3 for a stream layout.
pub fn stage3_input_width(input_shape: &[usize], layers: &[LayerSpec]) -> Result<usize> {
    let shapes = NetworkModel::<f32>::shape_plan(input_shape, layers)?;
    Ok(shapes[FEATURE_LAYER].iter().product())
}

/// Builds freshly initialized video and audio models at the given scale
/// (1.0 is the full-size configuration).
pub fn build_stream_models(scale: f64, seed: u64) -> Result<(NetworkModel, NetworkModel)> {
    let video = VideoStreamConfig::scaled(scale)?;
    let audio = AudioStreamConfig::scaled(scale)?;
    let v = NetworkModel::new(&video.input_shape(), video.layers(), FEATURE_LAYER, Init::He { seed })?;
    let a = NetworkModel::new(
        &audio.input_shape(),
        audio.layers(),
        FEATURE_LAYER,
        Init::He {
            seed: seed.wrapping_add(1),
        },
    )?;
    Ok((v, a))
}

/// Cuts one `AUDIO_WINDOW`-sample window per frame; window `i` starts at
/// sample `i * AUDIO_HOP`. Windows running past the end are zero-padded.
pub fn window_audio(samples: &[f32], frame_count: usize) -> Result<Vec<Vec<f32>>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot window an empty audio signal".into()));
    }
    Ok((0..frame_count).map(|i| audio_window(samples, i)).collect())
}

/// The window for frame `index`, zero-padded past the end of the signal.
pub fn audio_window(samples: &[f32], index: usize) -> Vec<f32> {
    let start = index * AUDIO_HOP;
    let mut w = vec![0f32; AUDIO_WINDOW];
    if start < samples.len() {
        let end = (start + AUDIO_WINDOW).min(samples.len());
        w[..end - start].copy_from_slice(&samples[start..end]);
    }
    w
}

/// Number of samples needed so that `frame_count` windows fit without padding.
pub fn samples_for_frames(frame_count: usize) -> usize {
    if frame_count == 0 {
        0
    } else {
        (frame_count - 1) * AUDIO_HOP + AUDIO_WINDOW
    }
}

/// Row `t` of the result is video row `t` followed by audio row `t`.
pub fn concat_features(video: &FeatureMatrix, audio: &FeatureMatrix) -> Result<FeatureMatrix> {
    if video.rows() != audio.rows() {
        return Err(Error::Shape(format!(
            "cannot pair {} video feature rows with {} audio rows",
            video.rows(),
            audio.rows()
        )));
    }
    let cols = video.cols() + audio.cols();
    if video.rows() == 0 {
        return Ok(FeatureMatrix::empty(cols));
    }
    let mut data = Vec::with_capacity(video.rows() * cols);
    for t in 0..video.rows() {
        data.extend_from_slice(video.row(t));
        data.extend_from_slice(audio.row(t));
    }
    FeatureMatrix::new(video.rows(), cols, data)
}

/// One frame of a recording with its rating.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: usize,
    /// `[1, H, W]` greyscale values in `[0, 1]`.
    pub video: Tensor<f32>,
    /// `AUDIO_WINDOW` samples in `[-1, 1]`.
    pub audio: Vec<f32>,
    /// Rating in `[-1, 1]`.
    pub rating: f64,
}

impl FrameRecord {
    pub fn new(index: usize, video: Tensor<f32>, audio: Vec<f32>, rating: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rating) {
            return Err(Error::InvalidArgument(format!(
                "frame {index}: rating {rating} outside [-1, 1]"
            )));
        }
        if audio.len() != AUDIO_WINDOW {
            return Err(Error::Shape(format!(
                "frame {index}: audio window has {} samples, expected {AUDIO_WINDOW}",
                audio.len()
            )));
        }
        if video.rank() != 3 || video.shape()[0] != 1 {
            return Err(Error::Shape(format!(
                "frame {index}: video must be [1, H, W], got {:?}",
                video.shape()
            )));
        }
        Ok(Self {
            index,
            video,
            audio,
            rating,
        })
    }

    pub fn audio_tensor(&self) -> Tensor<f32> {
        Tensor::new(vec![1, self.audio.len()], self.audio.clone()).expect("validated window")
    }
}
