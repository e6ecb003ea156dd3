//! Focal-loss training with best-validation-macro-F1 checkpointing.
//!
//! Per-day graphs are evaluated in parallel inside a mini-batch; the
//! per-day gradients are reduced in batch order so runs are bit-for-bit
//! reproducible for a fixed seed. Any non-finite loss aborts the run.

use std::io::Write;
use std::path::Path;

use ndarray::ArrayD;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{Real, Tape};
use crate::encoders::{ContinuousEncoderConfig, DiscreteEncoderConfig};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_predictions, MetricReport};
use crate::model::{predict, DayModel, ModelConfig, ModelKind};
use crate::nn::AdamW;
use crate::preprocess::GridDataset;
use crate::types::{BlockConfig, HeadLogits, LabelVector, HEAD_CLASSES, N_HEADS};

/// Per-class focal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalAlpha {
    /// All classes weighted 1.
    Uniform,
    /// Inverse training-frequency weights, normalized to mean 1 per head.
    Balanced,
    /// Explicit per-head, per-class weights.
    PerHead(Vec<Vec<f64>>),
}

/// Optimizer and loss settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub focal_gamma: f64,
    pub focal_alpha: FocalAlpha,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            batch_size: 16,
            epochs: 200,
            focal_gamma: 2.0,
            focal_alpha: FocalAlpha::Uniform,
            weight_decay: 1e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset: 30 epochs and a learning rate that can move a
    /// from-scratch model within that budget.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.focal_gamma < 0.0 {
            return Err(Error::Config("focal_gamma must be >= 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scalar focal loss: softmax probability of the target class, then
/// `-alpha * (1 - p_t)^gamma * ln(p_t)`.
pub fn focal_loss(scores: &[f64], target: usize, gamma: f64, alpha: f64) -> f64 {
    assert!(target < scores.len(), "target class out of range");
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = scores.iter().map(|&z| (z - max).exp()).sum();
    let pt = ((scores[target] - max).exp() / denom).max(1e-12);
    -alpha * (1.0 - pt).powf(gamma) * pt.ln()
}

/// Sum of per-head focal losses for one day.
pub fn total_loss(logits: &HeadLogits, label: &LabelVector, gamma: f64, alphas: &[Vec<f64>]) -> f64 {
    let classes = label.classes();
    logits
        .heads()
        .iter()
        .enumerate()
        .map(|(head, scores)| {
            let scores: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            focal_loss(&scores, classes[head], gamma, alphas[head][classes[head]])
        })
        .sum()
}

/// Resolve the alpha setting into per-head, per-class weights.
/// Balanced weights use Laplace-smoothed inverse label frequencies over the
/// training split, normalized to mean 1 within each head.
pub fn resolve_alphas(
    alpha: &FocalAlpha,
    train_labels: &[LabelVector],
) -> Result<Vec<Vec<f64>>> {
    match alpha {
        FocalAlpha::Uniform => Ok(HEAD_CLASSES.iter().map(|&k| vec![1.0; k]).collect()),
        FocalAlpha::PerHead(weights) => {
            if weights.len() != N_HEADS
                || weights
                    .iter()
                    .zip(HEAD_CLASSES.iter())
                    .any(|(w, &k)| w.len() != k)
            {
                return Err(Error::Config("per-head alpha shape mismatch".into()));
            }
            Ok(weights.clone())
        }
        FocalAlpha::Balanced => {
            if train_labels.is_empty() {
                return Err(Error::Data("balanced alpha needs training labels".into()));
            }
            let n = train_labels.len() as f64;
            let mut out = Vec::with_capacity(N_HEADS);
            for (head, &k) in HEAD_CLASSES.iter().enumerate() {
                let mut counts = vec![0.0f64; k];
                for label in train_labels {
                    counts[label.classes()[head]] += 1.0;
                }
                let inv: Vec<f64> = counts
                    .iter()
                    .map(|&c| (n + k as f64) / (c + 1.0))
                    .collect();
                let mean = inv.iter().sum::<f64>() / k as f64;
                out.push(inv.iter().map(|&v| v / mean).collect());
            }
            Ok(out)
        }
    }
}

/// One epoch of the metric history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_per_head: Vec<f64>,
    pub val_average: f64,
}

/// Outcome of a run: the best-epoch snapshot is what `model` holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointBundle {
    pub best_epoch: usize,
    pub best_average: f64,
    pub best_per_head: Vec<f64>,
    pub history: Vec<EpochMetrics>,
}

/// Everything produced by [`train`].
pub struct TrainArtifacts {
    pub model: DayModel<f32>,
    pub bundle: CheckpointBundle,
    /// (day_id, logits) for the training split, best-epoch parameters.
    pub train_logits: Vec<(String, HeadLogits)>,
    /// (day_id, logits) for the validation split, best-epoch parameters.
    pub val_logits: Vec<(String, HeadLogits)>,
    pub val_report: MetricReport,
}

/// Inputs to one training run.
pub struct TrainSetup<'a> {
    pub dataset: &'a GridDataset,
    pub train_ids: &'a [usize],
    pub val_ids: &'a [usize],
    pub kind: ModelKind,
    pub train_config: TrainConfig,
    pub model_config: ModelConfig,
    pub block_config: BlockConfig,
    pub encoder_config: ContinuousEncoderConfig,
    pub discrete_config: DiscreteEncoderConfig,
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ 0x747261696e; // domain constant
    for v in [a, b] {
        x ^= v;
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^= x >> 31;
    }
    x
}

/// Train one model and return the best-validation checkpoint.
pub fn train(setup: TrainSetup<'_>, mut log: Option<&mut dyn Write>) -> Result<TrainArtifacts> {
    setup.train_config.validate()?;
    if setup.train_ids.is_empty() || setup.val_ids.is_empty() {
        return Err(Error::Data("empty train or validation split".into()));
    }
    let dataset = setup.dataset;
    let mut model_config = setup.model_config.clone();
    model_config.n_subjects = dataset.subject_count();
    let mut model = DayModel::<f32>::new(
        setup.kind,
        model_config,
        setup.block_config,
        setup.encoder_config.clone(),
        setup.discrete_config.clone(),
        setup.train_config.seed,
    )?;

    let train_labels: Vec<LabelVector> = setup
        .train_ids
        .iter()
        .map(|&i| dataset.days[i].label)
        .collect();
    let alphas = resolve_alphas(&setup.train_config.focal_alpha, &train_labels)?;
    let gamma = setup.train_config.focal_gamma;

    let mut optimizer = AdamW::new(
        &model.store,
        setup.train_config.learning_rate,
        setup.train_config.weight_decay,
    );

    let mut history: Vec<EpochMetrics> = Vec::with_capacity(setup.train_config.epochs);
    let mut best: Option<(usize, f64, Vec<f64>, Vec<f32>)> = None;

    let mut order: Vec<usize> = setup.train_ids.to_vec();
    for epoch in 0..setup.train_config.epochs {
        let epoch_start = std::time::Instant::now();
        // seeded shuffle
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(setup.train_config.seed, 1, epoch as u64));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(setup.train_config.batch_size) {
            let results: Vec<Result<(f64, Vec<Option<ArrayD<f32>>>)>> = batch
                .par_iter()
                .map(|&day_idx| {
                    let day = &dataset.days[day_idx];
                    let mut tape = Tape::<f32>::new();
                    let vars = model.store.bind_all(&mut tape);
                    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        setup.train_config.seed,
                        2 + epoch as u64,
                        day_idx as u64,
                    ));
                    let out = model.forward_day(
                        &mut tape,
                        &vars,
                        &day.grid,
                        day.subject_idx,
                        Some(&mut dropout_rng),
                    )?;
                    let classes = day.label.classes();
                    let terms: Vec<_> = out
                        .heads
                        .iter()
                        .enumerate()
                        .map(|(head, &scores)| {
                            let flat = tape.reshape(scores, &[HEAD_CLASSES[head]]);
                            tape.focal_loss(
                                flat,
                                classes[head],
                                f32::from_f64(gamma),
                                f32::from_f64(alphas[head][classes[head]]),
                            )
                        })
                        .collect();
                    let loss = tape.add_scalars(&terms);
                    let loss_value = tape.value(loss)[[0]] as f64;
                    if !loss_value.is_finite() {
                        return Err(Error::Training(format!(
                            "non-finite loss at epoch {epoch}, day {} ({})",
                            day_idx,
                            day.day_id()
                        )));
                    }
                    let grads = tape.backward(loss);
                    Ok((loss_value, grads))
                })
                .collect();

            // fixed-order reduction keeps f32 sums reproducible
            let mut grad_sum: Vec<Option<ArrayD<f32>>> = vec![None; model.store.len()];
            let mut batch_loss = 0.0f64;
            for result in results {
                let (loss_value, grads) = result?;
                batch_loss += loss_value;
                for (slot, grad) in grads.into_iter().enumerate() {
                    let Some(grad) = grad else { continue };
                    match &mut grad_sum[slot] {
                        Some(g) => *g += &grad,
                        s @ None => *s = Some(grad),
                    }
                }
            }
            let scale = 1.0f32 / batch.len() as f32;
            for grad in grad_sum.iter_mut().flatten() {
                grad.mapv_inplace(|v| v * scale);
            }
            epoch_loss += batch_loss;
            optimizer.step(&mut model.store, &grad_sum);
        }
        let train_loss = epoch_loss / setup.train_ids.len() as f64;

        let report = evaluate_split(&model, dataset, setup.val_ids)?;
        let per_head: Vec<f64> = report.heads.iter().map(|h| h.macro_f1).collect();
        let metrics = EpochMetrics {
            epoch,
            train_loss,
            val_per_head: per_head.clone(),
            val_average: report.average,
        };
        if let Some(log) = log.as_deref_mut() {
            let event = serde_json::json!({
                "event": "epoch",
                "epoch": epoch,
                "train_loss": train_loss,
                "val_average": report.average,
                "val_per_head": per_head,
                "duration_ms": epoch_start.elapsed().as_millis() as u64,
            });
            writeln!(log, "{event}")?;
            log.flush()?;
        }
        // strictly-greater keeps the earliest epoch on ties
        if best.as_ref().map_or(true, |b| report.average > b.1) {
            best = Some((epoch, report.average, per_head.clone(), model.store.flat()));
        }
        history.push(metrics);
    }

    let (best_epoch, best_average, best_per_head, best_params) = best.expect("epochs >= 1");
    model.store.load_flat(&best_params)?;

    let bundle = CheckpointBundle {
        best_epoch,
        best_average,
        best_per_head,
        history,
    };
    let train_logits = dump_logits(&model, dataset, setup.train_ids)?;
    let val_logits = dump_logits(&model, dataset, setup.val_ids)?;
    let val_report = evaluate_split(&model, dataset, setup.val_ids)?;
    Ok(TrainArtifacts {
        model,
        bundle,
        train_logits,
        val_logits,
        val_report,
    })
}

/// Evaluate a model over a split (no dropout).
pub fn evaluate_split(
    model: &DayModel<f32>,
    dataset: &GridDataset,
    ids: &[usize],
) -> Result<MetricReport> {
    let predictions: Vec<Result<LabelVector>> = ids
        .par_iter()
        .map(|&i| {
            let day = &dataset.days[i];
            let logits = model.infer_day(&day.grid, day.subject_idx)?;
            Ok(predict(&logits))
        })
        .collect();
    let predictions: Vec<LabelVector> = predictions.into_iter().collect::<Result<_>>()?;
    let labels: Vec<LabelVector> = ids.iter().map(|&i| dataset.days[i].label).collect();
    evaluate_predictions(&predictions, &labels)
}

/// Best-epoch logits for a split, in split order.
pub fn dump_logits(
    model: &DayModel<f32>,
    dataset: &GridDataset,
    ids: &[usize],
) -> Result<Vec<(String, HeadLogits)>> {
    let out: Vec<Result<(String, HeadLogits)>> = ids
        .par_iter()
        .map(|&i| {
            let day = &dataset.days[i];
            Ok((day.day_id(), model.infer_day(&day.grid, day.subject_idx)?))
        })
        .collect();
    out.into_iter().collect()
}

/// Checkpoint directory metadata (`meta.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub model_config: ModelConfig,
    pub block_config: BlockConfig,
    pub encoder_config: ContinuousEncoderConfig,
    pub discrete_config: DiscreteEncoderConfig,
    pub train_config: TrainConfig,
    pub bundle: CheckpointBundle,
}

/// Write `params.bin` and `meta.json` into `dir`.
pub fn save_checkpoint(dir: &Path, artifacts: &TrainArtifacts, train_config: &TrainConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    artifacts.model.store.save_binary(&dir.join("params.bin"))?;
    let meta = CheckpointMeta {
        kind: artifacts.model.kind,
        model_config: artifacts.model.model_config.clone(),
        block_config: artifacts.model.block_config,
        encoder_config: artifacts.model.encoder_config.clone(),
        discrete_config: artifacts.model.discrete_config.clone(),
        train_config: train_config.clone(),
        bundle: artifacts.bundle.clone(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

/// Rebuild the model from a checkpoint directory.
pub fn load_checkpoint(dir: &Path) -> Result<(DayModel<f32>, CheckpointMeta)> {
    let meta: CheckpointMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    let mut model = DayModel::<f32>::new(
        meta.kind,
        meta.model_config.clone(),
        meta.block_config,
        meta.encoder_config.clone(),
        meta.discrete_config.clone(),
        meta.train_config.seed,
    )?;
    model.store.load_binary(&dir.join("params.bin"))?;
    Ok((model, meta))
}
