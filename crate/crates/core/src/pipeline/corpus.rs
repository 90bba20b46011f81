//! On-disk corpus: a manifest plus one directory per subject holding
//! `frames.avf`, `audio.wav` and `ratings.csv`.
//!
//! ```text
//! frames.avf   "AVF1", u32 T, u32 H, u32 W, f32[T*H*W]   (little-endian)
//! audio.wav    mono 16-bit PCM at 44.1 kHz
//! ratings.csv  header "time_s,value", any rate, values in [-1, 1]
//! manifest     key = value lines
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::streams::{audio_window, AUDIO_HOP, FRAME_RATE, SAMPLE_RATE};
use crate::{Error, Result, Tensor};

pub const MANIFEST: &str = "manifest.txt";
pub const FRAMES_FILE: &str = "frames.avf";
pub const AUDIO_FILE: &str = "audio.wav";
pub const RATINGS_FILE: &str = "ratings.csv";
const FRAMES_MAGIC: &[u8; 4] = b"AVF1";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub subjects: Vec<String>,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub frames: BTreeMap<String, usize>,
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(path, m);
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", n + 1)))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(bad(format!("line {}: duplicate key {:?}", n + 1, k.trim())));
            }
        }
        let mut take = |k: &str| kv.remove(k).ok_or_else(|| bad(format!("missing key {k:?}")));
        let num = |k: &str, v: String| v.parse::<u32>().map_err(|_| bad(format!("{k}: not an integer: {v:?}")));
        let version = num("version", take("version")?)?;
        if version != MANIFEST_VERSION {
            return Err(bad(format!("unsupported manifest version {version}")));
        }
        let fr = num("frame_rate", take("frame_rate")?)?;
        if fr != FRAME_RATE {
            return Err(bad(format!("frame_rate must be {FRAME_RATE}, got {fr}")));
        }
        let sr = num("sample_rate", take("sample_rate")?)?;
        if sr != SAMPLE_RATE {
            return Err(bad(format!("sample_rate must be {SAMPLE_RATE}, got {sr}")));
        }
        let subjects = split_list(&take("subjects")?);
        let train = split_list(&take("train")?);
        let test = split_list(&take("test")?);
        let mut frames = BTreeMap::new();
        for (k, v) in std::mem::take(&mut kv) {
            let Some(id) = k.strip_prefix("frames.") else {
                return Err(bad(format!("unknown key {k:?}")));
            };
            frames.insert(id.to_string(), num(&k, v)? as usize);
        }
        let m = Self {
            subjects,
            train,
            test,
            frames,
        };
        m.validate().map_err(bad)?;
        Ok(m)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.subjects.is_empty() {
            return Err("no subjects listed".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(s) {
                return Err(format!("subject {s} listed twice"));
            }
            if s.contains(['/', '\\']) || s.starts_with('.') {
                return Err(format!("invalid subject id {s:?}"));
            }
            match self.frames.get(s) {
                Some(0) => return Err(format!("subject {s} declares zero frames")),
                Some(_) => {}
                None => return Err(format!("missing frames.{s}")),
            }
        }
        if let Some(k) = self.frames.keys().find(|k| !seen.contains(k)) {
            return Err(format!("frames.{k} names an unlisted subject"));
        }
        if self.train.is_empty() || self.test.is_empty() {
            return Err("train and test splits must both be nonempty".into());
        }
        for s in self.train.iter().chain(&self.test) {
            if !seen.contains(s) {
                return Err(format!("split names unknown subject {s}"));
            }
        }
        if let Some(s) = self.train.iter().find(|s| self.test.contains(s)) {
            return Err(format!("subject {s} is in both train and test"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "version = {MANIFEST_VERSION}\nframe_rate = {FRAME_RATE}\nsample_rate = {SAMPLE_RATE}\nsubjects = {}\ntrain = {}\ntest = {}\n",
            self.subjects.join(", "),
            self.train.join(", "),
            self.test.join(", ")
        );
        for id in &self.subjects {
            s.push_str(&format!("frames.{id} = {}\n", self.frames[id]));
        }
        s
    }

    pub fn is_test(&self, id: &str) -> bool {
        self.test.iter().any(|s| s == id)
    }
}

/// One subject's recordings after ingest: pixels in `[0, 1]`, audio in
/// `[-1, 1]` and one rating per 25 fps frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    pub height: usize,
    pub width: usize,
    pub frames: Vec<f32>,
    pub audio: Vec<f32>,
    pub ratings: Vec<f64>,
}

impl SubjectData {
    pub fn frame_count(&self) -> usize {
        self.ratings.len()
    }

    pub fn frame(&self, t: usize) -> Tensor<f32> {
        let n = self.height * self.width;
        Tensor::new(
            vec![1, self.height, self.width],
            self.frames[t * n..(t + 1) * n].to_vec(),
        )
        .expect("frame size")
    }

    pub fn audio_window(&self, t: usize) -> Tensor<f32> {
        Tensor::from_vec(audio_window(&self.audio, t))
            .reshape(&[1, crate::streams::AUDIO_WINDOW])
            .expect("window size")
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    manifest: Manifest,
}

impl Corpus {
    /// Reads and checks the manifest; subject files are read on demand.
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Manifest::parse(&text, &path)?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn subject_file(&self, id: &str, file: &str) -> PathBuf {
        self.root.join(id).join(file)
    }

    /// Loads and validates all three files of subject `id`.
    pub fn load_subject(&self, id: &str) -> Result<SubjectData> {
        let declared = *self.manifest.frames.get(id).ok_or_else(|| Error::Corpus {
            subject: id.into(),
            file: self.root.join(MANIFEST),
            message: "subject not in manifest".into(),
        })?;
        let corpus_err = |file: &str, message: String| Error::Corpus {
            subject: id.into(),
            file: self.subject_file(id, file),
            message,
        };
        let lift = |file: &str, e: Error| match e {
            Error::Format { message, .. } => corpus_err(file, message),
            Error::Io { source, .. } => corpus_err(file, source.to_string()),
            other => other,
        };

        let (t, height, width, frames) =
            read_frames(&self.subject_file(id, FRAMES_FILE)).map_err(|e| lift(FRAMES_FILE, e))?;
        if t != declared {
            return Err(corpus_err(
                FRAMES_FILE,
                format!("manifest declares {declared} frames but the frames file holds {t}"),
            ));
        }
        let audio = read_wav(&self.subject_file(id, AUDIO_FILE)).map_err(|e| lift(AUDIO_FILE, e))?;
        let needed = (t - 1) * AUDIO_HOP + 1;
        if audio.len() < needed {
            return Err(corpus_err(
                AUDIO_FILE,
                format!(
                    "frames file declares {t} frames but audio covers {} ({} samples, need at least {needed})",
                    audio.len().saturating_sub(1) / AUDIO_HOP + 1,
                    audio.len()
                ),
            ));
        }
        let points = read_ratings(&self.subject_file(id, RATINGS_FILE)).map_err(|e| lift(RATINGS_FILE, e))?;
        let ratings = resample_ratings(&points, t).map_err(|m| corpus_err(RATINGS_FILE, m))?;
        Ok(SubjectData {
            id: id.into(),
            height,
            width,
            frames,
            audio,
            ratings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub subject: String,
    pub split: &'static str,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub audio_samples: usize,
}

/// Opens the corpus and fully validates every subject.
pub fn ingest(root: &Path) -> Result<(Corpus, Vec<IngestSummary>)> {
    let corpus = Corpus::open(root)?;
    let mut out = Vec::new();
    for id in &corpus.manifest.subjects {
        let s = corpus.load_subject(id)?;
        let split = if corpus.manifest.train.contains(id) {
            "train"
        } else if corpus.manifest.is_test(id) {
            "test"
        } else {
            "unused"
        };
        out.push(IngestSummary {
            subject: id.clone(),
            split,
            frames: s.frame_count(),
            height: s.height,
            width: s.width,
            audio_samples: s.audio.len(),
        });
    }
    Ok((corpus, out))
}

/// Returns `(T, H, W, pixels)`. Pixels above 1 are taken as 8-bit values and
/// divided by 255.
pub fn read_frames(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != FRAMES_MAGIC {
        return Err(Error::format(
            path,
            "malformed header: expected AVF1 magic and three u32 extents",
        ));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (t, h, w) = (dim(0), dim(1), dim(2));
    if t == 0 || h == 0 || w == 0 {
        return Err(Error::format(
            path,
            format!("malformed header: zero extent in {t}x{h}x{w}"),
        ));
    }
    let n = t
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::format(path, "malformed header: extents overflow"))?;
    if bytes.len() - 16 != n * 4 {
        return Err(Error::format(
            path,
            format!(
                "header declares {t} frames of {h}x{w} ({} bytes) but the payload has {} bytes",
                n * 4,
                bytes.len() - 16
            ),
        ));
    }
    let mut px: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if px.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite pixel value"));
    }
    let max = px.iter().fold(0f32, |m, &v| m.max(v));
    if max > 1.0 {
        px.iter_mut().for_each(|v| *v /= 255.0);
    }
    if px.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::format(path, "pixel values outside [0, 1] (or [0, 255])"));
    }
    Ok((t, h, w, px))
}

pub fn write_frames(path: &Path, t: usize, h: usize, w: usize, px: &[f32]) -> Result<()> {
    if px.len() != t * h * w {
        return Err(Error::Shape(format!("{} pixels for {t}x{h}x{w} frames", px.len())));
    }
    let mut b = Vec::with_capacity(16 + px.len() * 4);
    b.extend_from_slice(FRAMES_MAGIC);
    for d in [t, h, w] {
        b.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in px {
        b.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, b).map_err(|e| Error::io(path, e))
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, format!("malformed WAV: {other}")),
    }
}

/// Mono 16-bit PCM at 44.1 kHz, scaled by 1/32768.
pub fn read_wav(path: &Path) -> Result<Vec<f32>> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(
            path,
            format!(
                "expected mono 16-bit PCM, got {} channels, {}-bit {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::format(
            path,
            format!("expected {SAMPLE_RATE} Hz, got {} Hz", spec.sample_rate),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(path, e))?;
    if samples.is_empty() {
        return Err(Error::format(path, "WAV holds no samples"));
    }
    Ok(samples)
}

/// Writes samples in `[-1, 1]` as mono 16-bit PCM at 44.1 kHz.
pub fn write_wav(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(q).map_err(|e| wav_err(path, e))?;
    }
    w.finalize().map_err(|e| wav_err(path, e))
}

/// `(time_s, value)` pairs with strictly increasing times.
pub fn read_ratings(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_ratings(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("time_s,value") {
        return Err("malformed header: expected \"time_s,value\"".into());
    }
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = n + 2;
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
        let Some((t, v)) = parsed else {
            return Err(format!("line {row}: malformed row {line:?}"));
        };
        if !t.is_finite() || t < 0.0 {
            return Err(format!("line {row}: invalid time {t}"));
        }
        if !(-1.0..=1.0).contains(&v) {
            return Err(format!("line {row}: rating {v} outside [-1, 1]"));
        }
        if out.last().is_some_and(|&(prev, _)| t <= prev) {
            return Err(format!("line {row}: times must increase strictly"));
        }
        out.push((t, v));
    }
    if out.is_empty() {
        return Err("no rating rows".into());
    }
    Ok(out)
}

/// Number of 25 fps frames whose time stamp falls within the rating track.
pub fn rating_coverage(points: &[(f64, f64)]) -> usize {
    let last = points.last().map_or(0.0, |p| p.0);
    (last * FRAME_RATE as f64 + 1e-9).floor() as usize + 1
}

/// Nearest-neighbour resampling onto frame times `t / 25` (ties go to the
/// earlier sample). Fails when the track covers fewer than `frames` frames.
pub fn resample_ratings(points: &[(f64, f64)], frames: usize) -> std::result::Result<Vec<f64>, String> {
    let coverage = rating_coverage(points);
    if coverage < frames {
        return Err(format!(
            "frames file declares {frames} frames but ratings cover {coverage}"
        ));
    }
    let mut j = 0;
    Ok((0..frames)
        .map(|t| {
            let time = t as f64 / FRAME_RATE as f64;
            while j + 1 < points.len() && (points[j + 1].0 - time).abs() < (points[j].0 - time).abs() {
                j += 1;
            }
            points[j].1
        })
        .collect())
}

/// Writes one rating per frame at the 25 fps clock.
pub fn write_ratings(path: &Path, ratings: &[f64]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "time_s,value").map_err(io)?;
    for (t, r) in ratings.iter().enumerate() {
        writeln!(w, "{:.2},{r}", t as f64 / FRAME_RATE as f64).map_err(io)?;
    }
    w.flush().map_err(io)
}
