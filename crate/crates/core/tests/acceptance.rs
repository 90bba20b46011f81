//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The end-to-end criteria share two full runs of the CLI with the built-in
//! desk-scale config and the same seed.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::report;
use instaffect::metrics::{lin_ccc, pearson_cc};
use instaffect::mrmr::{entropy, mutual_information};
use instaffect::pipeline::{check_leakage, stages::read_cv_comparison, Corpus};
use instaffect::streams::{
    build_stream_models, concat_features, stage3_input_width, AudioStreamConfig, VideoStreamConfig,
};
use instaffect::Tensor;
use rand::Rng;

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let ops = common::grad::per_op_errors();
    let worst_op = ops
        .iter()
        .cloned()
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let e2e = common::grad::end_to_end_error();
    let elapsed = start.elapsed();
    let pass = worst_op.1 < 1e-4 && e2e < 1e-3 && elapsed < Duration::from_secs(60);
    report(
        "1 gradient suite",
        pass,
        &format!(
            "worst per-op rel err {:.2e} ({}), end-to-end {e2e:.2e}, {elapsed:.1?}",
            worst_op.1, worst_op.0
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_mi_oracle() {
    use common::mi::{fixed_tables, series, series_from_table, table_mi};
    let mut table_err = 0.0f64;
    let tables = fixed_tables();
    for t in &tables {
        let rows: Vec<&[usize]> = t.iter().map(Vec::as_slice).collect();
        let (a, b) = series_from_table(&rows);
        let got = mutual_information(&series(&a, rows.len()), &series(&b, rows[0].len())).unwrap();
        table_err = table_err.max((got - table_mi(&rows)).abs());
    }
    let mut r = common::rng(2024);
    let (mut asym, mut bound_fail) = (0usize, 0usize);
    for _ in 0..1000 {
        let n = r.gen_range(1..400);
        let (ba, bb) = (r.gen_range(2..11), r.gen_range(2..11));
        let a = series(&(0..n).map(|_| r.gen_range(0..ba)).collect::<Vec<_>>(), ba);
        let b = series(&(0..n).map(|_| r.gen_range(0..bb)).collect::<Vec<_>>(), bb);
        let (ab, ba_) = (mutual_information(&a, &b).unwrap(), mutual_information(&b, &a).unwrap());
        asym += usize::from(ab != ba_);
        bound_fail += usize::from(!(ab >= 0.0 && ab <= entropy(&a).min(entropy(&b)) + 1e-12));
    }
    let pass = tables.len() >= 5 && table_err <= 1e-12 && asym == 0 && bound_fail == 0;
    report(
        "2 MI oracle",
        pass,
        &format!(
            "{} tables max err {table_err:.1e}; 1000 pairs: {asym} asymmetric, {bound_fail} out of bounds",
            tables.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_mrmr_oracle() {
    let start = Instant::now();
    let (mut mismatched, mut not_demoted) = (0, 0);
    for seed in 0..200 {
        let p = common::mi::random_problem(seed);
        assert!(p.features.len() <= 8);
        let c = common::mi::check_problem(&p);
        mismatched += usize::from(!c.matches_oracle);
        not_demoted += usize::from(!c.duplicate_demoted);
    }
    let elapsed = start.elapsed();
    let pass = mismatched == 0 && not_demoted == 0 && elapsed < Duration::from_secs(60);
    report(
        "3 mRMR oracle",
        pass,
        &format!("200 problems: {mismatched} differ from oracle, {not_demoted} duplicates not demoted, {elapsed:.1?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_svr_correctness() {
    use common::svr::*;
    let (x, r, params) = two_point();
    let m = instaffect::svr::fit_svr(&x, &r, &params).unwrap();
    let beta = full_beta(&m, 2);
    let two_err = (beta[0] + 0.8)
        .abs()
        .max((beta[1] - 0.8).abs())
        .max((m.bias - 0.1).abs())
        .max((m.predict(&[0.5]).unwrap() - 0.5).abs());
    let (kkt, msgs) = kkt_sweep(1e-3);
    let lin_mae = linear_recovery_mae(0);
    let min_eig = [(1, 0.1), (2, 1.0), (3, 10.0)]
        .iter()
        .map(|&(s, g)| rbf_min_eigenvalue(s, 40, 3, g))
        .fold(f64::INFINITY, f64::min);
    let pass = two_err <= 1e-6 && kkt == 0 && lin_mae < 0.02 && min_eig >= -1e-8;
    report(
        "4 SVR correctness",
        pass,
        &format!(
            "two-point err {two_err:.1e}; KKT violations on 50 problems {kkt}; linear MAE {lin_mae:.2e}; RBF min eigenvalue {min_eig:.2e}"
        ),
    );
    assert!(pass, "{msgs:#?}");
}

#[test]
fn criterion_5_metrics_oracle() {
    let worst = common::metric_worked_values()
        .iter()
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    let mut r = common::rng(55);
    let mut violations = 0;
    let mut checked = 0;
    while checked < 1000 {
        let n = r.gen_range(2..100);
        let t = common::uniform_vec(&mut r, n, -1.0, 1.0);
        let noise = r.gen_range(0.0..2.0);
        let scale = r.gen_range(-2.0..2.0);
        let shift = r.gen_range(-1.0..1.0);
        let p: Vec<f64> = t
            .iter()
            .map(|v| scale * v + shift + noise * r.gen_range(-1.0..1.0))
            .collect();
        let Ok(cc) = pearson_cc(&p, &t) else { continue };
        checked += 1;
        violations += usize::from(lin_ccc(&p, &t).unwrap().abs() > cc.abs() + 1e-12);
    }
    let pass = worst <= 1e-12 && violations == 0;
    report(
        "5 metrics oracle",
        pass,
        &format!("worked examples max err {worst:.1e}; |CCC| > |CC| on {violations}/1000 pairs"),
    );
    assert!(pass);
}

struct Run {
    _dir: tempfile::TempDir,
    work: PathBuf,
    elapsed: Duration,
    failure: Option<String>,
}

fn run_pipeline() -> Run {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    let start = Instant::now();
    let mut failure = None;
    for stage in [
        "generate-synthetic",
        "train-cnn",
        "extract",
        "select",
        "fit-svr",
        "predict",
        "evaluate",
        "audit",
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_instaffect"))
            .arg("--work-dir")
            .arg(&work)
            .arg(stage)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        if !out.status.success() {
            failure = Some(format!("{stage}: {}", String::from_utf8_lossy(&out.stderr).trim()));
            break;
        }
    }
    Run {
        _dir: dir,
        work,
        elapsed: start.elapsed(),
        failure,
    }
}

fn runs() -> &'static (Run, Run) {
    static RUNS: OnceLock<(Run, Run)> = OnceLock::new();
    RUNS.get_or_init(|| (run_pipeline(), run_pipeline()))
}

fn eval_all_row(work: &Path) -> (f64, f64) {
    let text = fs::read_to_string(work.join("eval.csv")).unwrap();
    let row = text.lines().find(|l| l.starts_with("all,")).unwrap();
    let f: Vec<&str> = row.split(',').collect();
    (f[4].parse().unwrap_or(f64::NAN), f[5].parse().unwrap())
}

#[test]
fn criterion_6_synthetic_end_to_end() {
    let (run, _) = runs();
    if let Some(f) = &run.failure {
        report("6 synthetic end-to-end", false, f);
        panic!("{f}");
    }
    let (cc, ccc) = eval_all_row(&run.work);
    let cv = read_cv_comparison(&run.work.join("svr/cv_comparison.csv")).unwrap();
    let get = |v: &str| cv.iter().find(|(n, _, _)| n == v).map(|(_, l, m)| (*l, *m)).unwrap();
    let (sel_len, sel) = get("selected");
    let (rand_len, random) = get("random");
    let (_, all) = get("all");
    let pass = cc >= 0.6
        && ccc >= 0.4
        && sel < random
        && sel_len == rand_len
        && sel < all
        && run.elapsed < Duration::from_secs(15 * 60);
    report(
        "6 synthetic end-to-end",
        pass,
        &format!(
            "test CC {cc:.4}, CCC {ccc:.4}; CV MAE selected(L={sel_len}) {sel:.4} vs random {random:.4} vs all-1024 {all:.4}; {:.0?}",
            run.elapsed
        ),
    );
    assert!(pass);
}

fn collect_files(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<_> = fs::read_dir(root.join(rel)).unwrap().map(|e| e.unwrap()).collect();
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let r = rel.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            collect_files(root, &r, out);
        } else {
            out.push(r);
        }
    }
}

#[test]
fn criterion_7_determinism() {
    let (a, b) = runs();
    if let Some(f) = a.failure.as_ref().or(b.failure.as_ref()) {
        report("7 determinism", false, f);
        panic!("{f}");
    }
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    collect_files(&a.work, Path::new(""), &mut fa);
    collect_files(&b.work, Path::new(""), &mut fb);
    let differing: Vec<&PathBuf> = fa
        .iter()
        .filter(|f| fs::read(a.work.join(f)).unwrap() != fs::read(b.work.join(f)).ok().unwrap_or_default())
        .collect();
    let pass = fa == fb && differing.is_empty() && !fa.is_empty();
    report(
        "7 determinism",
        pass,
        &format!(
            "{} artifacts per run, {} differ, file sets equal: {}",
            fa.len(),
            differing.len(),
            fa == fb
        ),
    );
    assert!(pass, "{differing:?}");
}

#[test]
fn criterion_8_leakage_audit() {
    let (run, _) = runs();
    if let Some(f) = &run.failure {
        report("8 leakage audit", false, f);
        panic!("{f}");
    }
    let corpus = Corpus::open(&run.work.join("corpus")).unwrap();
    let leak = check_leakage(&run.work, corpus.manifest()).unwrap();
    let predict_log = fs::read_to_string(run.work.join("audit/predict.csv")).unwrap();
    let test_seen_at_predict = corpus
        .manifest()
        .test
        .iter()
        .all(|id| predict_log.contains(&format!(",{id},")));
    let pass = leak.records > 0 && leak.test_frames_touched == 0 && test_seen_at_predict;
    report(
        "8 leakage audit",
        pass,
        &format!(
            "{} frame accesses before predict, {} on test subjects; predict reads every test subject: {test_seen_at_predict}",
            leak.records, leak.test_frames_touched
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_shape_conformance() {
    let v = VideoStreamConfig::full();
    let a = AudioStreamConfig::full();
    let vw = stage3_input_width(&v.input_shape(), &v.layers()).unwrap();
    let aw = stage3_input_width(&a.input_shape(), &a.layers()).unwrap();
    let (video, audio) = build_stream_models(1.0, 9).unwrap();
    let vf = video.extract_features_from(&[Tensor::zeros(&v.input_shape())]).unwrap();
    let af = audio.extract_features_from(&[Tensor::zeros(&a.input_shape())]).unwrap();
    let joint = concat_features(&vf, &af).unwrap();
    let pass = vw == 215_296
        && aw == 10_176
        && video.feature_width() == 512
        && audio.feature_width() == 512
        && joint.cols() == 1024;
    report(
        "9 shape conformance",
        pass,
        &format!(
            "stage-3 flat sizes video {vw}, audio {aw}; feature widths {}/{}; concatenated {}",
            video.feature_width(),
            audio.feature_width(),
            joint.cols()
        ),
    );
    assert!(pass);
}
