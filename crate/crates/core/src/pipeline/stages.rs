use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::audit::{AuditLog, Purpose};
use super::config::PipelineConfig;
use super::corpus::{Corpus, SubjectData};
use super::derive_seed;
use crate::metrics::EvalReport;
use crate::mrmr::{self, select_frames, SelectionResult};
use crate::network::{self, NetworkModel};
use crate::streams::{self, concat_features, AUDIOVISUAL_WIDTH};
use crate::svr::{self, grid_search, select_feature_length, Standardizer, SvrModel};
use crate::{Error, FeatureMatrix, Result, Tensor};

const EXTRACT_CHUNK: usize = 64;

/// Artifact locations under the work directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn video_model(&self) -> PathBuf {
        self.root.join("models/video.ianm")
    }
    pub fn audio_model(&self) -> PathBuf {
        self.root.join("models/audio.ianm")
    }
    pub fn video_log(&self) -> PathBuf {
        self.root.join("models/video_training.csv")
    }
    pub fn audio_log(&self) -> PathBuf {
        self.root.join("models/audio_training.csv")
    }
    pub fn features(&self, id: &str) -> PathBuf {
        self.root.join("features").join(format!("{id}.fmx"))
    }
    pub fn selection(&self) -> PathBuf {
        self.root.join("selection/selection.txt")
    }
    pub fn selection_frames(&self) -> PathBuf {
        self.root.join("selection/frames.csv")
    }
    pub fn svr_model(&self) -> PathBuf {
        self.root.join("svr/model.svrm")
    }
    pub fn scaler(&self) -> PathBuf {
        self.root.join("svr/scaler.csv")
    }
    pub fn feature_length(&self) -> PathBuf {
        self.root.join("svr/length.txt")
    }
    pub fn grid_report(&self) -> PathBuf {
        self.root.join("svr/grid_report.csv")
    }
    pub fn cv_comparison(&self) -> PathBuf {
        self.root.join("svr/cv_comparison.csv")
    }
    pub fn predictions(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.csv"))
    }
    pub fn evaluation(&self) -> PathBuf {
        self.root.join("eval.csv")
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    let dir = path.parent().unwrap();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Selection-frame record: a 50-frame window, or a single frame chosen by
/// the uniform fallback (`level = None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedSpan {
    pub subject: String,
    pub start: usize,
    pub length: usize,
    pub level: Option<usize>,
}

const SPAN_HEADER: &str = "subject,start,length,level";

fn write_spans(path: &Path, spans: &[SelectedSpan]) -> Result<()> {
    let mut s = format!("{SPAN_HEADER}\n");
    for sp in spans {
        let level = sp.level.map_or_else(|| "uniform".to_string(), |l| l.to_string());
        let _ = writeln!(s, "{},{},{},{level}", sp.subject, sp.start, sp.length);
    }
    write_file(path, s)
}

pub fn read_spans(path: &Path) -> Result<Vec<SelectedSpan>> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SPAN_HEADER) {
        return Err(Error::format(path, format!("expected header {SPAN_HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(path, format!("line {}: malformed row {line:?}", n + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(SelectedSpan {
                subject: f[0].to_string(),
                start: f[1].parse().map_err(|_| bad())?,
                length: f[2].parse().map_err(|_| bad())?,
                level: if f[3] == "uniform" {
                    None
                } else {
                    Some(f[3].parse().map_err(|_| bad())?)
                },
            })
        })
        .collect()
}

/// `frame,prediction` rows.
pub fn read_predictions(path: &Path) -> Result<Vec<f64>> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_predictions(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("frame,prediction") {
        return Err("expected header \"frame,prediction\"".into());
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<f64>().ok()?)));
        match parsed {
            Some((f, v)) if f == out.len() && v.is_finite() => out.push(v),
            Some((f, _)) if f != out.len() => {
                return Err(format!(
                    "line {}: frame {f} out of sequence, expected {}",
                    n + 2,
                    out.len()
                ))
            }
            _ => return Err(format!("line {}: malformed row {line:?}", n + 2)),
        }
    }
    Ok(out)
}

fn read_length(path: &Path) -> Result<usize> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("expected a feature count, got {:?}", text.trim())))
}

/// Trained artifacts that map one frame and its audio window to a rating.
#[derive(Debug, Clone)]
pub struct FramePredictor {
    pub video: NetworkModel,
    pub audio: NetworkModel,
    columns: Vec<usize>,
    scaler: Standardizer,
    model: SvrModel,
}

impl FramePredictor {
    /// Loads the stream models, selection, scaler and SVR written by the
    /// train-cnn, select and fit-svr stages.
    pub fn load(ws: &Workspace) -> Result<Self> {
        let read = |p: PathBuf| require(&p).map(|_| p);
        let video = network::read_model(&read(ws.video_model())?)?;
        let audio = network::read_model(&read(ws.audio_model())?)?;
        let selection = SelectionResult::read(&read(ws.selection())?)?;
        let model = SvrModel::read(&read(ws.svr_model())?)?;
        let scaler = Standardizer::read(&read(ws.scaler())?)?;
        let length = read_length(&ws.feature_length())?;
        if scaler.dim() != length || model.dim != length {
            return Err(Error::format(
                ws.svr_model(),
                format!("model expects {} features, selection length is {length}", model.dim),
            ));
        }
        Ok(Self {
            columns: selection.top(length)?.to_vec(),
            video,
            audio,
            scaler,
            model,
        })
    }

    /// Indices of the selected audiovisual features, in rank order.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// Predictions for rows of 1024-wide audiovisual features.
    pub fn predict_features(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = self.scaler.apply(&features.select_columns(&self.columns)?)?;
        self.model.predict_rows(&x)
    }

    /// Prediction for a single `[1, H, W]` frame and `[1, 2646]` audio window.
    pub fn predict_frame(&self, frame: Tensor<f32>, audio: Tensor<f32>) -> Result<f64> {
        let f = concat_features(
            &self.video.extract_features_from(&[frame])?,
            &self.audio.extract_features_from(&[audio])?,
        )?;
        Ok(self.predict_features(&f)?[0])
    }
}

/// Runs pipeline stages against one config and work directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    ws: Workspace,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let ws = Workspace::new(&cfg.work_dir);
        Ok(Self { cfg, ws })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::open(&self.cfg.corpus_dir())
    }

    fn load_models(&self) -> Result<(NetworkModel, NetworkModel)> {
        let (vp, ap) = (self.ws.video_model(), self.ws.audio_model());
        require(&vp)?;
        require(&ap)?;
        Ok((network::read_model(&vp)?, network::read_model(&ap)?))
    }

    fn check_frame_size(&self, video: &NetworkModel, s: &SubjectData) -> Result<()> {
        let expect = &video.input_shape()[1..];
        if expect != [s.height, s.width] {
            return Err(Error::Config(format!(
                "subject {} has {}x{} frames but the video stream expects {}x{}",
                s.id, s.height, s.width, expect[0], expect[1]
            )));
        }
        Ok(())
    }

    /// Trains the two stream CNNs on every `frame_stride`-th frame of the
    /// training subjects.
    pub fn train_cnn(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let sc = &self.cfg.streams;
        let (mut video, mut audio) = streams::build_stream_models(sc.scale, derive_seed(self.cfg.seed, "init"))?;
        let mut audit = AuditLog::new("train-cnn");
        let (mut vx, mut ax, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for id in &corpus.manifest().train {
            let s = corpus.load_subject(id)?;
            self.check_frame_size(&video, &s)?;
            let frames: Vec<usize> = (0..s.frame_count()).step_by(sc.frame_stride).collect();
            for &t in &frames {
                vx.push(s.frame(t));
                ax.push(s.audio_window(t));
                y.push(s.ratings[t]);
            }
            audit.touch(Purpose::Fit, id, frames);
        }
        log::info!("training stream CNNs on {} frames", y.len());
        let mut vcfg = sc.video.clone();
        vcfg.seed = derive_seed(self.cfg.seed, "train/video");
        let mut acfg = sc.audio.clone();
        acfg.seed = derive_seed(self.cfg.seed, "train/audio");
        let vlog = network::fit(&mut video, &vx, &y, &vcfg)?;
        let alog = network::fit(&mut audio, &ax, &y, &acfg)?;
        ensure_parent(&self.ws.video_model())?;
        network::write_model(&self.ws.video_model(), &video)?;
        network::write_model(&self.ws.audio_model(), &audio)?;
        write_file(&self.ws.video_log(), vlog.to_csv())?;
        write_file(&self.ws.audio_log(), alog.to_csv())?;
        audit.write(self.ws.root())
    }

    fn extract_subject(&self, video: &NetworkModel, audio: &NetworkModel, s: &SubjectData) -> Result<FeatureMatrix> {
        self.check_frame_size(video, s)?;
        let mut parts = Vec::new();
        for start in (0..s.frame_count()).step_by(EXTRACT_CHUNK) {
            let end = (start + EXTRACT_CHUNK).min(s.frame_count());
            let vf: Vec<Tensor<f32>> = (start..end).map(|t| s.frame(t)).collect();
            let af: Vec<Tensor<f32>> = (start..end).map(|t| s.audio_window(t)).collect();
            parts.push(concat_features(
                &video.extract_features_from(&vf)?,
                &audio.extract_features_from(&af)?,
            )?);
        }
        FeatureMatrix::vstack(&parts.iter().collect::<Vec<_>>())
    }

    /// Writes the 1024-wide feature matrix of every training subject. Test
    /// subjects are extracted by [`Pipeline::predict`].
    pub fn extract(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let (video, audio) = self.load_models()?;
        let mut audit = AuditLog::new("extract");
        for id in &corpus.manifest().train {
            let s = corpus.load_subject(id)?;
            let f = self.extract_subject(&video, &audio, &s)?;
            ensure_parent(&self.ws.features(id))?;
            f.write(&self.ws.features(id))?;
            audit.touch(Purpose::Inference, id, 0..s.frame_count());
        }
        audit.write(self.ws.root())
    }

    fn training_features(&self, corpus: &Corpus) -> Result<Vec<(SubjectData, FeatureMatrix)>> {
        corpus
            .manifest()
            .train
            .iter()
            .map(|id| {
                let path = self.ws.features(id);
                require(&path)?;
                let f = FeatureMatrix::read(&path)?;
                let s = corpus.load_subject(id)?;
                if f.rows() != s.frame_count() || f.cols() != AUDIOVISUAL_WIDTH {
                    return Err(Error::format(
                        &path,
                        format!(
                            "feature matrix is {}x{}, expected {}x{AUDIOVISUAL_WIDTH}",
                            f.rows(),
                            f.cols(),
                            s.frame_count()
                        ),
                    ));
                }
                Ok((s, f))
            })
            .collect()
    }

    /// Ranks features by mRMR on low-variation windows of the training subjects.
    pub fn select(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let data = self.training_features(&corpus)?;
        let sel = &self.cfg.selection;
        let mut audit = AuditLog::new("select");
        let mut spans = Vec::new();
        let (mut rows, mut ratings) = (Vec::new(), Vec::new());
        for (s, f) in &data {
            let frames: Vec<usize> = match select_frames(&s.ratings, sel.budget_fraction) {
                Ok(set) => {
                    spans.extend(set.windows.iter().map(|w| SelectedSpan {
                        subject: s.id.clone(),
                        start: w.start,
                        length: w.length,
                        level: Some(w.level),
                    }));
                    set.frame_indices()
                }
                Err(Error::NoQualifyingWindow) => {
                    let n = s.frame_count();
                    let k = ((sel.budget_fraction * n as f64).floor() as usize).max(1);
                    log::warn!(
                        "subject {}: no low-variation window, sampling {k} frames uniformly",
                        s.id
                    );
                    let picks: Vec<usize> = (0..k).map(|i| i * n / k).collect();
                    spans.extend(picks.iter().map(|&t| SelectedSpan {
                        subject: s.id.clone(),
                        start: t,
                        length: 1,
                        level: None,
                    }));
                    picks
                }
                Err(e) => return Err(e),
            };
            rows.push(f.select_rows(&frames));
            ratings.extend(frames.iter().map(|&t| s.ratings[t]));
            audit.touch(Purpose::Select, &s.id, frames);
        }
        let x = FeatureMatrix::vstack(&rows.iter().collect::<Vec<_>>())?;
        let k = self.rank_count();
        log::info!("ranking {k} of {} features on {} selection frames", x.cols(), x.rows());
        let result = mrmr::rank_features(&x, &ratings, k, sel.bins)?;
        ensure_parent(&self.ws.selection())?;
        result.write(&self.ws.selection())?;
        write_spans(&self.ws.selection_frames(), &spans)?;
        audit.write(self.ws.root())
    }

    fn rank_count(&self) -> usize {
        let max = self.cfg.regression.lengths.iter().copied().max().unwrap_or(1);
        max.min(AUDIOVISUAL_WIDTH)
    }

    /// Training rows for the regressor: training-subject frames outside the
    /// selection set, thinned evenly to at most `max_train_frames`.
    fn regression_rows(
        &self,
        data: &[(SubjectData, FeatureMatrix)],
        spans: &[SelectedSpan],
    ) -> (FeatureMatrix, Vec<f64>, AuditLog) {
        let mut pool = Vec::new();
        for (si, (s, _)) in data.iter().enumerate() {
            let used: BTreeSet<usize> = spans
                .iter()
                .filter(|sp| sp.subject == s.id)
                .flat_map(|sp| sp.start..sp.start + sp.length)
                .collect();
            pool.extend((0..s.frame_count()).filter(|t| !used.contains(t)).map(|t| (si, t)));
        }
        let m = self.cfg.regression.max_train_frames.min(pool.len());
        let picks: Vec<(usize, usize)> = (0..m).map(|i| pool[i * pool.len() / m]).collect();
        let mut audit = AuditLog::new("fit-svr");
        let mut rows = Vec::with_capacity(m);
        let mut r = Vec::with_capacity(m);
        for &(si, t) in &picks {
            let (s, f) = &data[si];
            rows.push(f.row(t).to_vec());
            r.push(s.ratings[t]);
            audit.touch(Purpose::Fit, &s.id, [t]);
        }
        (FeatureMatrix::from_rows(&rows).expect("uniform rows"), r, audit)
    }

    /// Chooses the feature length and SVR hyperparameters by cross-validation
    /// and compares against all 1024 features and a random-feature baseline.
    pub fn fit_svr(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let selection = SelectionResult::read(&{
            let p = self.ws.selection();
            require(&p)?;
            p
        })?;
        let spans = read_spans(&self.ws.selection_frames())?;
        let data = self.training_features(&corpus)?;
        let (x, r, audit) = self.regression_rows(&data, &spans);
        let reg = &self.cfg.regression;
        log::info!("fitting SVR on {} frames", x.rows());
        let search = select_feature_length(&selection, &x, &r, &reg.lengths, &reg.grid)?;
        let chosen = search.length;

        let all_mae = match search.best_mae(AUDIOVISUAL_WIDTH) {
            Some(v) => v,
            None => grid_search(&x, &r, &reg.grid)?.report.best_row().mean_mae,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, "baseline/random"));
        let noise: Vec<f64> = (0..x.rows() * chosen)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let random = FeatureMatrix::new(x.rows(), chosen, noise)?;
        let random_mae = grid_search(&random, &r, &reg.grid)?.report.best_row().mean_mae;
        let selected_mae = search.outcome.report.best_row().mean_mae;

        let mut report = format!("length,{}\n", svr::GridSearchReport::CSV_HEADER);
        for (l, rep) in &search.per_length {
            for row in rep.csv_rows() {
                let _ = writeln!(report, "{l},{row}");
            }
        }
        let comparison = format!(
            "variant,length,cv_mae\nselected,{chosen},{selected_mae}\nall,{AUDIOVISUAL_WIDTH},{all_mae}\nrandom,{chosen},{random_mae}\n"
        );
        ensure_parent(&self.ws.svr_model())?;
        search.outcome.model.write(&self.ws.svr_model())?;
        search.outcome.scaler.write(&self.ws.scaler())?;
        write_file(&self.ws.feature_length(), format!("{chosen}\n"))?;
        write_file(&self.ws.grid_report(), report)?;
        write_file(&self.ws.cv_comparison(), comparison)?;
        audit.write(self.ws.root())
    }

    /// Extracts test-subject features and writes per-frame predictions.
    pub fn predict(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let predictor = FramePredictor::load(&self.ws)?;
        let mut audit = AuditLog::new("predict");
        for id in &corpus.manifest().test {
            let s = corpus.load_subject(id)?;
            let f = self.extract_subject(&predictor.video, &predictor.audio, &s)?;
            ensure_parent(&self.ws.features(id))?;
            f.write(&self.ws.features(id))?;
            let pred = predictor.predict_features(&f)?;
            let mut out = String::from("frame,prediction\n");
            for (t, p) in pred.iter().enumerate() {
                let _ = writeln!(out, "{t},{p}");
            }
            write_file(&self.ws.predictions(id), out)?;
            audit.touch(Purpose::Inference, id, 0..s.frame_count());
        }
        audit.write(self.ws.root())
    }

    /// Scores test predictions against the corpus ratings, pooled and per subject.
    pub fn evaluate(&self) -> Result<Vec<(String, EvalReport)>> {
        let corpus = self.corpus()?;
        let mut rows = Vec::new();
        let (mut all_p, mut all_t) = (Vec::new(), Vec::new());
        for id in &corpus.manifest().test {
            let pred = read_predictions(&self.ws.predictions(id))?;
            let truth = corpus.load_subject(id)?.ratings;
            if pred.len() != truth.len() {
                return Err(Error::format(
                    self.ws.predictions(id),
                    format!("{} predictions for {} frames", pred.len(), truth.len()),
                ));
            }
            rows.push((id.clone(), EvalReport::compute(&pred, &truth)?));
            all_p.extend(pred);
            all_t.extend(truth);
        }
        rows.insert(0, ("all".to_string(), EvalReport::compute(&all_p, &all_t)?));
        let mut out = format!("scope,{}\n", EvalReport::CSV_HEADER);
        for (scope, r) in &rows {
            let _ = writeln!(out, "{scope},{}", r.csv_row());
        }
        write_file(&self.ws.evaluation(), out)?;
        Ok(rows)
    }

    /// Runs every stage from CNN training through evaluation.
    pub fn run_all(&self) -> Result<Vec<(String, EvalReport)>> {
        self.train_cnn()?;
        self.extract()?;
        self.select()?;
        self.fit_svr()?;
        self.predict()?;
        self.evaluate()
    }
}

/// Reads the `variant,length,cv_mae` comparison written by `fit-svr`.
pub fn read_cv_comparison(path: &Path) -> Result<Vec<(String, usize, f64)>> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(path, format!("malformed row {line:?}"));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok((
                f[0].to_string(),
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}
