use std::ffi::{CStr, CString};
use std::ptr;

use instaffect::network::write_model;
use instaffect::pipeline::{generate_synthetic, read_predictions, Pipeline, PipelineConfig};
use instaffect::streams::{self, build_stream_models};
use instaffect::svr::{KernelSpec, SvrModel};
use instaffect::Tensor;
use instaffect_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ia_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ia_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut out = 0.0;
    let st = unsafe { ia_evaluate(ptr::null(), [1.0, 2.0].as_ptr(), 2, ptr::null_mut()) };
    assert_eq!(st, IaStatus::NullPointer);
    assert!(last_error().contains("null"));
    let st = unsafe { ia_svr_model_predict(ptr::null(), [1.0].as_ptr(), 1, &mut out) };
    assert_eq!(st, IaStatus::NullPointer);
    let st = unsafe { ia_svr_model_load(ptr::null(), ptr::null_mut()) };
    assert_eq!(st, IaStatus::NullPointer);
    unsafe {
        ia_svr_model_free(ptr::null_mut());
        ia_network_free(ptr::null_mut());
        ia_predictor_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_last_error() {
    let mut out = IaEvalReport::default();
    unsafe { ia_evaluate(ptr::null(), ptr::null(), 2, &mut out) };
    assert!(!last_error().is_empty());
    let st = unsafe { ia_evaluate([1.0, 2.0, 3.0].as_ptr(), [1.0, 3.0, 2.0].as_ptr(), 3, &mut out) };
    assert_eq!(st, IaStatus::Ok);
    assert!(last_error().is_empty());
}

#[test]
fn evaluate_matches_worked_values() {
    let mut out = IaEvalReport::default();
    let st = unsafe { ia_evaluate([1.0, 2.0, 3.0].as_ptr(), [1.0, 3.0, 2.0].as_ptr(), 3, &mut out) };
    assert_eq!(st, IaStatus::Ok);
    assert_eq!(out.n, 3);
    assert!(out.cc_defined);
    assert!((out.cc - 0.5).abs() < 1e-12);
    assert!((out.mae - 2.0 / 3.0).abs() < 1e-12);

    let st = unsafe { ia_evaluate([2.0, 2.0, 2.0].as_ptr(), [1.0, 3.0, 2.0].as_ptr(), 3, &mut out) };
    assert_eq!(st, IaStatus::Ok);
    assert!(!out.cc_defined);
    assert!(out.cc.is_nan());

    let st = unsafe { ia_evaluate([1.0].as_ptr(), [1.0].as_ptr(), 1, &mut out) };
    assert_eq!(st, IaStatus::InvalidArgument);
}

#[test]
fn mutual_information_of_a_fair_copy_is_ln2() {
    let a = [0usize, 1, 0, 1, 1, 0, 1, 0];
    let mut mi = 0.0;
    let st = unsafe { ia_mutual_information(a.as_ptr(), a.as_ptr(), a.len(), 2, 2, &mut mi) };
    assert_eq!(st, IaStatus::Ok);
    assert!((mi - std::f64::consts::LN_2).abs() < 1e-12);

    let bad = [0usize, 5];
    let st = unsafe { ia_mutual_information(bad.as_ptr(), a.as_ptr(), 2, 2, 2, &mut mi) };
    assert_ne!(st, IaStatus::Ok);
}

#[test]
fn audio_window_copies_and_pads() {
    let samples: Vec<f32> = (0..3000).map(|i| i as f32 / 3000.0).collect();
    let mut out = vec![1f32; IA_AUDIO_WINDOW];
    let st = unsafe { ia_audio_window(samples.as_ptr(), samples.len(), 1, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, IaStatus::Ok);
    assert_eq!(out, streams::audio_window(&samples, 1));
    assert_eq!(*out.last().unwrap(), 0.0);

    let st = unsafe { ia_audio_window(samples.as_ptr(), samples.len(), 0, out.as_mut_ptr(), 10) };
    assert_eq!(st, IaStatus::Shape);
}

#[test]
fn svr_model_round_trip() {
    let model = SvrModel {
        kernel: KernelSpec::Linear,
        epsilon: 0.1,
        c: 1.0,
        bias: 0.25,
        dim: 2,
        support_vectors: vec![1.0, 0.0, 0.0, 1.0],
        dual_coefs: vec![0.5, -1.0],
        diagnostics: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("svr.model");
    model.write(&file).unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { ia_svr_model_load(cpath(&file).as_ptr(), &mut h) },
        IaStatus::Ok
    );
    let mut dim = 0;
    assert_eq!(unsafe { ia_svr_model_dim(h, &mut dim) }, IaStatus::Ok);
    assert_eq!(dim, 2);

    let x = [2.0, 3.0];
    let mut y = 0.0;
    assert_eq!(unsafe { ia_svr_model_predict(h, x.as_ptr(), 2, &mut y) }, IaStatus::Ok);
    assert_eq!(y, model.predict(&x).unwrap());
    assert!((y - (1.0 - 3.0 + 0.25)).abs() < 1e-12);

    assert_eq!(
        unsafe { ia_svr_model_predict(h, x.as_ptr(), 1, &mut y) },
        IaStatus::Shape
    );
    unsafe { ia_svr_model_free(h) };

    let missing = cpath(&dir.path().join("absent.model"));
    assert_eq!(unsafe { ia_svr_model_load(missing.as_ptr(), &mut h) }, IaStatus::Io);
    assert!(last_error().contains("absent.model"));
}

#[test]
fn network_extraction_matches_the_library() {
    let (video, _) = build_stream_models(0.25, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("video.ianm");
    write_model(&file, &video).unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ia_network_load(cpath(&file).as_ptr(), &mut h) }, IaStatus::Ok);
    let (mut len, mut width) = (0, 0);
    unsafe {
        assert_eq!(ia_network_input_len(h, &mut len), IaStatus::Ok);
        assert_eq!(ia_network_feature_width(h, &mut width), IaStatus::Ok);
    }
    assert_eq!(len, video.input_shape().iter().product::<usize>());
    assert_eq!(width, video.feature_width());

    let sample: Vec<f32> = (0..len).map(|i| (i % 17) as f32 / 17.0).collect();
    let mut feats = vec![0.0; width];
    let st = unsafe { ia_network_extract(h, sample.as_ptr(), len, feats.as_mut_ptr(), width) };
    assert_eq!(st, IaStatus::Ok);
    let expected = video
        .extract_features_from(&[Tensor::new(video.input_shape().to_vec(), sample.clone()).unwrap()])
        .unwrap();
    assert_eq!(feats.as_slice(), expected.row(0));

    let st = unsafe { ia_network_extract(h, sample.as_ptr(), len - 1, feats.as_mut_ptr(), width) };
    assert_eq!(st, IaStatus::Shape);
    let st = unsafe { ia_network_extract(h, sample.as_ptr(), len, feats.as_mut_ptr(), width + 1) };
    assert_eq!(st, IaStatus::Shape);
    unsafe { ia_network_free(h) };
}

#[test]
fn predictor_needs_trained_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { ia_predictor_open(cpath(dir.path()).as_ptr(), &mut h) };
    assert_eq!(st, IaStatus::MissingArtifact);
    assert!(h.is_null());
    assert!(last_error().contains("missing artifact"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/instaffect.h")).unwrap();
    for name in [
        "INSTAFFECT_H",
        "IA_AUDIO_WINDOW",
        "IA_STATUS_MISSING_ARTIFACT",
        "typedef struct IaPredictor IaPredictor",
        "IaEvalReport",
        "ia_last_error",
        "ia_svr_model_load",
        "ia_network_extract",
        "ia_predictor_predict",
        "ia_mutual_information",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

const TINY: &str = r#"
seed = 3

[synthetic]
subjects = 3
frames = 120
train_subjects = 2

[streams]
frame_stride = 4

[streams.video]
epochs = 1

[streams.audio]
epochs = 1

[regression]
lengths = [4, 8]
max_train_frames = 60

[regression.grid]
kernels = ["rbf"]
c = [1.0]
epsilon = [0.05]
gamma_exponents = [0]
"#;

#[test]
fn predictor_reproduces_pipeline_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::from_toml(TINY).unwrap();
    cfg.work_dir = dir.path().to_path_buf();
    generate_synthetic(&cfg.corpus_dir(), &cfg.synthetic, cfg.seed).unwrap();
    let pipeline = Pipeline::new(cfg).unwrap();
    pipeline.run_all().unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { ia_predictor_open(cpath(dir.path()).as_ptr(), &mut h) },
        IaStatus::Ok
    );

    let corpus = pipeline.corpus().unwrap();
    let id = corpus.manifest().test[0].clone();
    let subject = corpus.load_subject(&id).unwrap();
    let expected = read_predictions(&pipeline.workspace().predictions(&id)).unwrap();
    for t in [0, 37, subject.frame_count() - 1] {
        let (frame, audio) = (subject.frame(t), subject.audio_window(t));
        let mut y = f64::NAN;
        let st = unsafe {
            ia_predictor_predict(
                h,
                frame.data().as_ptr(),
                frame.len(),
                audio.data().as_ptr(),
                audio.len(),
                &mut y,
            )
        };
        assert_eq!(st, IaStatus::Ok, "{}", last_error());
        assert!((y - expected[t]).abs() < 1e-9, "frame {t}: {y} vs {}", expected[t]);
    }

    let frame = subject.frame(0);
    let mut y = 0.0;
    let st = unsafe { ia_predictor_predict(h, frame.data().as_ptr(), 3, ptr::null(), 0, &mut y) };
    assert_eq!(st, IaStatus::Shape);
    unsafe { ia_predictor_free(h) };
}
