//! Exercises the C ABI end to end: checkpoint inference, pool voting,
//! margins, macro-F1, and the error-message channel.

use std::ffi::CString;

use mislstm_core::encoders::{ContinuousEncoderConfig, DiscreteEncoderConfig};
use mislstm_core::ensemble::{EnsemblePool, MarginKind};
use mislstm_core::model::{ModelConfig, ModelKind};
use mislstm_core::preprocess::{preprocess_dataset, PreprocessConfig};
use mislstm_core::training::{save_checkpoint, train, TrainConfig, TrainSetup};
use mislstm_core::types::{BlockConfig, HeadLogits, TOTAL_LOGITS};
use mislstm_ffi::*;

fn tiny_checkpoint(dir: &std::path::Path) -> mislstm_core::preprocess::GridDataset {
    let config = mislstm_core::synthgen::SynthConfig {
        n_subjects: 2,
        days_per_subject: 3,
        seed: 77,
        ..Default::default()
    };
    let synth = mislstm_core::synthgen::generate(&config).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let sensor = tmp.path().join("sensor.csv");
    let labels = tmp.path().join("labels.csv");
    synth.write_files(&sensor, &labels).unwrap();
    let records = mislstm_core::ingest::parse_sensor_file(&sensor).unwrap();
    let labels = mislstm_core::ingest::parse_labels_file(&labels).unwrap();
    let dataset = mislstm_core::ingest::build_dataset(records, &labels);
    let all: Vec<usize> = (0..dataset.days.len()).collect();
    let grids = preprocess_dataset(&dataset, &PreprocessConfig::default(), &all).unwrap();

    let train_config = TrainConfig {
        epochs: 1,
        learning_rate: 1e-3,
        batch_size: 4,
        seed: 7,
        ..TrainConfig::default()
    };
    let setup = TrainSetup {
        dataset: &grids,
        train_ids: &all[..4],
        val_ids: &all[4..],
        kind: ModelKind::MisLstm,
        train_config: train_config.clone(),
        model_config: ModelConfig {
            lstm_hidden: 16,
            subject_embed_dim: 4,
            ..ModelConfig::default()
        },
        block_config: BlockConfig::default(),
        encoder_config: ContinuousEncoderConfig {
            stages: vec![(8, 2), (16, 2)],
            embed_dim: 16,
            ..ContinuousEncoderConfig::default()
        },
        discrete_config: DiscreteEncoderConfig {
            filters_per_size: 2,
            ..DiscreteEncoderConfig::default()
        },
    };
    let artifacts = train(setup, None).unwrap();
    save_checkpoint(dir, &artifacts, &train_config).unwrap();
    grids
}

fn last_error() -> String {
    let mut buf = vec![0i8; 512];
    let n = mislstm_last_error_message(buf.as_mut_ptr(), buf.len());
    assert!(n >= 0);
    let bytes: Vec<u8> = buf
        .iter()
        .take_while(|&&b| b != 0)
        .map(|&b| b as u8)
        .collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn version_is_non_empty() {
    let v = unsafe { std::ffi::CStr::from_ptr(mislstm_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn model_load_predict_free_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let grids = tiny_checkpoint(dir.path());

    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut handle: *mut mislstm_model = std::ptr::null_mut();
    let status = unsafe { mislstm_model_load(path.as_ptr(), &mut handle) };
    assert_eq!(status, mislstm_status::MISLSTM_OK, "{}", last_error());
    assert!(!handle.is_null());
    assert_eq!(unsafe { mislstm_model_subject_count(handle) }, 2);

    let day = &grids.days[0];
    let cont: Vec<f32> = day.grid.continuous.iter().copied().collect();
    let disc: Vec<f32> = day.grid.discrete.iter().copied().collect();
    let mut logits = [0.0f32; TOTAL_LOGITS];
    let status = unsafe {
        mislstm_model_predict_day(
            handle,
            cont.as_ptr(),
            disc.as_ptr(),
            day.subject_idx as i32,
            logits.as_mut_ptr(),
        )
    };
    assert_eq!(status, mislstm_status::MISLSTM_OK, "{}", last_error());
    assert!(logits.iter().all(|v| v.is_finite()));

    // must match the in-process model bit for bit
    let (model, _) = mislstm_core::training::load_checkpoint(dir.path()).unwrap();
    let expected = model.infer_day(&day.grid, day.subject_idx).unwrap().to_flat();
    assert_eq!(logits.to_vec(), expected);

    // unknown subject sentinel (-1) works too
    let status = unsafe {
        mislstm_model_predict_day(handle, cont.as_ptr(), disc.as_ptr(), -1, logits.as_mut_ptr())
    };
    assert_eq!(status, mislstm_status::MISLSTM_OK);

    let mut classes = [0u8; 6];
    let status = unsafe { mislstm_logits_to_classes(logits.as_ptr(), classes.as_mut_ptr()) };
    assert_eq!(status, mislstm_status::MISLSTM_OK);
    assert!(classes
        .iter()
        .enumerate()
        .all(|(h, &c)| (c as usize) < mislstm_core::types::HEAD_CLASSES[h]));

    unsafe { mislstm_model_free(handle) };
}

#[test]
fn load_errors_set_message() {
    let path = CString::new("/nonexistent/checkpoint").unwrap();
    let mut handle: *mut mislstm_model = std::ptr::null_mut();
    let status = unsafe { mislstm_model_load(path.as_ptr(), &mut handle) };
    assert_eq!(status, mislstm_status::MISLSTM_ERR_IO);
    assert!(last_error().contains("checkpoint load failed"));
    let status = unsafe { mislstm_model_load(std::ptr::null(), &mut handle) };
    assert_eq!(status, mislstm_status::MISLSTM_ERR_INVALID_ARGUMENT);
}

#[test]
fn pool_votes_match_core_ensemble() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (n_models, n_days) = (3usize, 8usize);
    let flat: Vec<f32> = (0..n_models * n_days * TOTAL_LOGITS)
        .map(|_| rng.gen_range(-2.0f32..2.0))
        .collect();

    let mut handle: *mut mislstm_pool = std::ptr::null_mut();
    let status = unsafe { mislstm_pool_create(n_models, n_days, flat.as_ptr(), 0, &mut handle) };
    assert_eq!(status, mislstm_status::MISLSTM_OK, "{}", last_error());
    assert_eq!(
        unsafe { mislstm_pool_fit_thresholds(handle, 0.5) },
        mislstm_status::MISLSTM_OK
    );

    // reference pool through the core API
    let models: Vec<(String, Vec<(String, HeadLogits)>)> = (0..n_models)
        .map(|m| {
            let days = (0..n_days)
                .map(|d| {
                    let off = (m * n_days + d) * TOTAL_LOGITS;
                    (
                        format!("d{d:06}"),
                        HeadLogits::from_flat(&flat[off..off + TOTAL_LOGITS]).unwrap(),
                    )
                })
                .collect();
            (format!("m{m}"), days)
        })
        .collect();
    let mut reference = EnsemblePool::new(models).unwrap();
    reference.best_index = 0;
    reference.margin_kind = MarginKind::Top2;
    reference.fit_thresholds(0.5).unwrap();

    for (method, expected) in [
        (mislstm_vote_method::MISLSTM_VOTE_SOFT, reference.soft_vote()),
        (mislstm_vote_method::MISLSTM_VOTE_HARD, reference.hard_vote()),
        (
            mislstm_vote_method::MISLSTM_VOTE_UALRE,
            reference.ualre().unwrap(),
        ),
    ] {
        let mut out = vec![0u8; n_days * 6];
        let status = unsafe { mislstm_pool_vote(handle, method, out.as_mut_ptr()) };
        assert_eq!(status, mislstm_status::MISLSTM_OK, "{}", last_error());
        for (d, label) in expected.iter().enumerate() {
            let got: Vec<usize> = out[d * 6..(d + 1) * 6].iter().map(|&c| c as usize).collect();
            assert_eq!(got, label.classes().to_vec(), "method {method:?} day {d}");
        }
    }
    unsafe { mislstm_pool_free(handle) };
}

#[test]
fn ualre_without_thresholds_is_an_error() {
    let flat = vec![0.0f32; TOTAL_LOGITS];
    let mut handle: *mut mislstm_pool = std::ptr::null_mut();
    let status = unsafe { mislstm_pool_create(1, 1, flat.as_ptr(), 0, &mut handle) };
    assert_eq!(status, mislstm_status::MISLSTM_OK);
    let mut out = [0u8; 6];
    let status = unsafe {
        mislstm_pool_vote(
            handle,
            mislstm_vote_method::MISLSTM_VOTE_UALRE,
            out.as_mut_ptr(),
        )
    };
    assert_eq!(status, mislstm_status::MISLSTM_ERR_DATA);
    assert!(last_error().contains("thresholds"));
    unsafe { mislstm_pool_free(handle) };
}

#[test]
fn margin_and_macro_f1_match_core() {
    let scores = [0.2f32, 3.1, 2.9];
    let mut margin = 0.0f64;
    let status = unsafe { mislstm_logit_margin(scores.as_ptr(), 3, &mut margin) };
    assert_eq!(status, mislstm_status::MISLSTM_OK);
    assert_eq!(
        margin,
        mislstm_core::ensemble::logit_margin(&scores).unwrap()
    );
    let status = unsafe { mislstm_logit_margin(scores.as_ptr(), 1, &mut margin) };
    assert_eq!(status, mislstm_status::MISLSTM_ERR_INVALID_ARGUMENT);

    let preds = [0u32, 0, 1, 1];
    let labels = [0u32, 1, 1, 0];
    let mut f1 = 0.0f64;
    let status =
        unsafe { mislstm_macro_f1(preds.as_ptr(), labels.as_ptr(), 4, 2, &mut f1) };
    assert_eq!(status, mislstm_status::MISLSTM_OK);
    let expected = mislstm_core::evaluation::macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 0], 2).unwrap();
    assert_eq!(f1, expected);
}

#[test]
fn generated_header_exists_with_exports() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mislstm.h");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in [
        "mislstm_model_load",
        "mislstm_model_predict_day",
        "mislstm_pool_create",
        "mislstm_pool_vote",
        "mislstm_macro_f1",
        "typedef struct mislstm_model mislstm_model;",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
