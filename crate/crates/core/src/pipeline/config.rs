use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::network::TrainConfig;
use crate::svr::{KernelKind, SvrGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub subjects: usize,
    pub frames: usize,
    /// The first `train_subjects` subjects form the training split.
    pub train_subjects: usize,
    pub frame_size: usize,
    pub pixel_noise: f64,
    pub audio_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            subjects: 4,
            frames: 2000,
            train_subjects: 2,
            frame_size: 32,
            pixel_noise: 0.05,
            audio_noise: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamsConfig {
    /// Multiplier on the full-size filter counts and frame extent.
    pub scale: f64,
    /// Every `frame_stride`-th training frame is used to train the CNNs.
    pub frame_stride: usize,
    /// The `seed` of each stream config is replaced by one derived from the
    /// pipeline seed.
    pub video: TrainConfig,
    pub audio: TrainConfig,
}

impl Default for StreamsConfig {
    fn default() -> Self {
        let train = TrainConfig {
            learning_rate: 2e-3,
            momentum: 0.9,
            batch_size: 16,
            epochs: 6,
            dropout_rate: 0.5,
            seed: 0,
            lr_decay: 0.9,
        };
        Self {
            scale: 0.25,
            frame_stride: 4,
            video: train.clone(),
            audio: train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub bins: usize,
    pub budget_fraction: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            bins: 10,
            budget_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Candidate numbers of top-ranked features.
    pub lengths: Vec<usize>,
    /// Training frames outside the selection windows are thinned evenly to
    /// at most this many rows.
    pub max_train_frames: usize,
    pub grid: SvrGrid,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            lengths: vec![8, 16, 32, 64, 128, 256],
            max_train_frames: 500,
            grid: SvrGrid {
                kernels: vec![KernelKind::Rbf],
                c: vec![0.1, 1.0, 10.0],
                epsilon: vec![0.01, 0.1],
                ..SvrGrid::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub work_dir: PathBuf,
    /// Defaults to `<work_dir>/corpus`.
    pub corpus: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub streams: StreamsConfig,
    pub selection: SelectionConfig,
    pub regression: RegressionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            work_dir: PathBuf::from("work"),
            corpus: None,
            synthetic: SyntheticConfig::default(),
            streams: StreamsConfig::default(),
            selection: SelectionConfig::default(),
            regression: RegressionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.work_dir.join("corpus"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.synthetic;
        if s.subjects == 0 || s.frames == 0 || s.frame_size == 0 {
            return bad("synthetic subjects, frames and frame_size must be positive".into());
        }
        if s.train_subjects == 0 || s.train_subjects >= s.subjects {
            return bad(format!(
                "synthetic train_subjects must lie in [1, {}), got {}",
                s.subjects, s.train_subjects
            ));
        }
        if !(s.pixel_noise >= 0.0 && s.audio_noise >= 0.0) {
            return bad("synthetic noise levels must be non-negative".into());
        }
        if !(self.streams.scale > 0.0 && self.streams.scale <= 1.0) {
            return bad(format!("streams scale must lie in (0, 1], got {}", self.streams.scale));
        }
        if self.streams.frame_stride == 0 {
            return bad("streams frame_stride must be positive".into());
        }
        for t in [&self.streams.video, &self.streams.audio] {
            t.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.selection.bins < 2 {
            return bad("selection bins must be at least 2".into());
        }
        let f = self.selection.budget_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("selection budget_fraction must lie in (0, 1), got {f}"));
        }
        let r = &self.regression;
        if r.lengths.is_empty()
            || r.lengths
                .iter()
                .any(|&l| l == 0 || l > crate::streams::AUDIOVISUAL_WIDTH)
        {
            return bad("regression lengths must be a nonempty subset of [1, 1024]".into());
        }
        if r.max_train_frames < r.grid.folds.max(2) {
            return bad("regression max_train_frames is smaller than the fold count".into());
        }
        if r.grid.folds < 2 {
            return bad("regression grid folds must be at least 2".into());
        }
        if r.grid.c.is_empty() || r.grid.epsilon.is_empty() || r.grid.kernels.is_empty() {
            return bad("regression grid has an empty axis".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(PipelineConfig::from_toml("sed = 3").is_err());
        let e = PipelineConfig::from_toml("[selection]\nbudget_fraction = 1.5").unwrap_err();
        assert_eq!(e.category(), "config");
        let c = PipelineConfig::from_toml("seed = 11\n[synthetic]\nsubjects = 3\ntrain_subjects = 1").unwrap();
        assert_eq!((c.seed, c.synthetic.subjects, c.synthetic.frames), (11, 3, 2000));
    }
}
