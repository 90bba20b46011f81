//! Frame-access audit: every stage records which subject frames it read and
//! why, so test-set leakage can be checked after the fact.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::corpus::Manifest;
use crate::{Error, Result};

pub const AUDIT_DIR: &str = "audit";
const HEADER: &str = "stage,purpose,subject,frame";

/// Stages that run before predictions are made, in pipeline order.
pub const PRE_PREDICT_STAGES: [&str; 4] = ["train-cnn", "extract", "select", "fit-svr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Frames used to fit model parameters.
    Fit,
    /// Frames used to rank features.
    Select,
    /// Frames passed through an already trained model.
    Inference,
}

impl Purpose {
    fn as_str(self) -> &'static str {
        match self {
            Purpose::Fit => "fit",
            Purpose::Select => "select",
            Purpose::Inference => "inference",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "fit" => Some(Purpose::Fit),
            "select" => Some(Purpose::Select),
            "inference" => Some(Purpose::Inference),
            _ => None,
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub stage: String,
    pub purpose: Purpose,
    pub subject: String,
    pub frame: usize,
}

#[derive(Debug, Clone)]
pub struct AuditLog {
    stage: &'static str,
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn new(stage: &'static str) -> Self {
        Self {
            stage,
            records: Vec::new(),
        }
    }

    pub fn touch(&mut self, purpose: Purpose, subject: &str, frames: impl IntoIterator<Item = usize>) {
        for frame in frames {
            self.records.push(AuditRecord {
                stage: self.stage.to_string(),
                purpose,
                subject: subject.to_string(),
                frame,
            });
        }
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn path(work_dir: &Path, stage: &str) -> PathBuf {
        work_dir.join(AUDIT_DIR).join(format!("{stage}.csv"))
    }

    pub fn write(&self, work_dir: &Path) -> Result<()> {
        let path = Self::path(work_dir, self.stage);
        let dir = path.parent().unwrap();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut s = String::with_capacity(32 * self.records.len() + 32);
        s.push_str(HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{},{},{}\n", r.stage, r.purpose, r.subject, r.frame));
        }
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditRecord>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::format(path, format!("expected header {HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let parsed = (f.len() == 4)
                .then(|| Some((Purpose::parse(f[1])?, f[3].parse::<usize>().ok()?)))
                .flatten();
            let (purpose, frame) =
                parsed.ok_or_else(|| Error::format(path, format!("line {}: malformed record {line:?}", n + 2)))?;
            Ok(AuditRecord {
                stage: f[0].to_string(),
                purpose,
                subject: f[2].to_string(),
                frame,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageReport {
    pub records: usize,
    pub test_frames_touched: usize,
    /// Up to ten offending records.
    pub examples: Vec<AuditRecord>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.test_frames_touched == 0
    }
}

/// Counts frame accesses to test subjects recorded by the stages that run
/// before predict, for any purpose.
pub fn check_leakage(work_dir: &Path, manifest: &Manifest) -> Result<LeakageReport> {
    let mut report = LeakageReport {
        records: 0,
        test_frames_touched: 0,
        examples: Vec::new(),
    };
    for stage in PRE_PREDICT_STAGES {
        for r in read_audit(&AuditLog::path(work_dir, stage))? {
            report.records += 1;
            if manifest.is_test(&r.subject) {
                report.test_frames_touched += 1;
                if report.examples.len() < 10 {
                    report.examples.push(r);
                }
            }
        }
    }
    Ok(report)
}
