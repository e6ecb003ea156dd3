//! Batch command-line front end: generate, preprocess, train, evaluate,
//! ensemble, ablate, report.
//!
//! Every artifact-writing command takes an exclusive lock on its output
//! directory and writes a `manifest.json` with the full command line, the
//! resolved configuration, and SHA-256 hashes of its inputs, so any run can
//! be reproduced from its manifest alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use sha2::Digest;

use crate::encoders::{ContinuousEncoderConfig, DiscreteEncoderConfig};
use crate::ensemble::{read_logit_file, write_logit_file, write_threshold_file, EnsemblePool, MarginKind};
use crate::evaluation::{evaluate_predictions, format_f3, stratified_subject_split, MetricReport};
use crate::ingest::{build_dataset, parse_labels_file, parse_sensor_file};
use crate::model::{predict, CbamPlacement, ModelConfig, ModelKind};
use crate::preprocess::{load_cache, preprocess_dataset, save_cache, PreprocessConfig};
use crate::report::{ablation_chart, bar_chart, AblationGrid};
use crate::synthgen::{generate, parse_kv_config, SynthConfig};
use crate::training::{
    load_checkpoint, save_checkpoint, train, FocalAlpha, TrainConfig, TrainSetup,
};
use crate::types::{day_id, BlockConfig, Encoding, LabelVector};

#[derive(Parser)]
#[command(name = "mislstm", version, about = "Day-level sleep quality and stress prediction from lifelog streams")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic lifelog dataset.
    Generate(GenerateArgs),
    /// Convert sensor/label CSVs into a normalized grid cache.
    Preprocess(PreprocessArgs),
    /// Train one model and write a checkpoint plus logit dumps.
    Train(TrainArgs),
    /// Score a checkpoint or a stored logit file.
    Evaluate(EvaluateArgs),
    /// Combine logit files with soft voting, hard voting, or UALRE.
    Ensemble(EnsembleArgs),
    /// Sweep block length x encoding and emit the comparison grid.
    Ablate(AblateArgs),
    /// Render stored metrics as text tables and PNG charts.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Flat key=value config file (flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    /// Planted signal strength in [0, 1].
    #[arg(long)]
    strength: Option<f64>,
    #[arg(long)]
    missing: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    sensor: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Train fraction of the subject-stratified split.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Z-score discrete rows instead of max-scaling.
    #[arg(long)]
    standardize_discrete: bool,
    /// Dump the block images of one day (subject:date) as PNGs.
    #[arg(long)]
    dump_day: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Grid cache directory produced by `preprocess`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "mis_lstm")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "2|4|6|...", default_value_t = 4)]
    n_hours: usize,
    #[arg(long, default_value = "multi_channel")]
    encoding: String,
    /// Route discrete rows into the image instead of the 1-D branch.
    #[arg(long)]
    no_discrete_branch: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Inverse-frequency class weights from the training split.
    #[arg(long)]
    balanced_alpha: bool,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// CBAM placement: block_sequence, encoder_map, or none.
    #[arg(long, default_value = "block_sequence")]
    cbam: String,
    /// Use the full-length training schedule (200 epochs, lr 3e-5).
    #[arg(long)]
    paper_schedule: bool,
    /// Model id recorded in logit dumps.
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint directory (requires --data).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Which cached split to score.
    #[arg(long, default_value = "val")]
    split: String,
    /// Stored logit file (requires --labels).
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Logit files, one per model (repeatable).
    #[arg(long = "logits", num_args = 1..)]
    logits: Vec<PathBuf>,
    /// Pool manifest JSON: {"models": [{"id": ..., "logits": ...}]}.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    /// ualre, soft, hard, or all.
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Margin kind: top2 or top3.
    #[arg(long, default_value = "top2")]
    margin: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated training seeds averaged per cell.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding metrics.json and/or ablation.json.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Exclusive lock on an output directory, released on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "{} is locked by another run (remove {} if stale)",
                    dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let data = std::fs::read(path)
        .with_context(|| format!("cannot read input {}", path.display()))?;
    Ok(hex_digest(&data))
}

fn hex_digest(data: &[u8]) -> String {
    let mut hasher = sha2::Sha256::new();
    hasher.update(data);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_manifest(
    out: &Path,
    config: serde_json::Value,
    inputs: &[(&str, &Path)],
) -> anyhow::Result<()> {
    let mut input_hashes = BTreeMap::new();
    for (name, path) in inputs {
        input_hashes.insert(name.to_string(), sha256_file(path)?);
    }
    let manifest = serde_json::json!({
        "command": std::env::args().collect::<Vec<_>>(),
        "config": config,
        "inputs": input_hashes,
    });
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Ensemble(args) => cmd_ensemble(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let mut config = SynthConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        config = parse_kv_config(&text, config)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(subjects) = args.subjects {
        config.n_subjects = subjects;
    }
    if let Some(days) = args.days {
        config.days_per_subject = days;
    }
    if let Some(strength) = args.strength {
        config.signal_strength = strength;
    }
    if let Some(missing) = args.missing {
        config.missing_fraction = missing;
    }
    let dataset = generate(&config)?;
    let sensor = args.out.join("sensor.csv");
    let labels = args.out.join("labels.csv");
    dataset.write_files(&sensor, &labels)?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "n_subjects": config.n_subjects,
            "days_per_subject": config.days_per_subject,
            "seed": config.seed,
            "signal_strength": config.signal_strength,
            "missing_fraction": config.missing_fraction,
            "start_date": config.start_date,
        }),
        &[],
    )?;
    println!(
        "wrote {} days for {} subjects to {}",
        dataset.days.len(),
        config.n_subjects,
        args.out.display()
    );
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let records = parse_sensor_file(&args.sensor)?;
    let labels = parse_labels_file(&args.labels)?;
    let dataset = build_dataset(records, &labels);
    if dataset.dropped_unlabeled > 0 {
        eprintln!("warning: dropped {} unlabeled day(s)", dataset.dropped_unlabeled);
    }
    let days: Vec<(&str, NaiveDate)> = dataset
        .days
        .iter()
        .map(|d| (d.record.subject_id.as_str(), d.record.date))
        .collect();
    let (train_ids, val_ids) = stratified_subject_split(&days, args.ratio, args.seed)?;
    let config = PreprocessConfig {
        standardize_discrete: args.standardize_discrete,
        ..PreprocessConfig::default()
    };
    let grids = preprocess_dataset(&dataset, &config, &train_ids)?;
    save_cache(&args.out, &grids, &train_ids, &val_ids, &config, args.ratio, args.seed)?;

    if let Some(spec) = &args.dump_day {
        let day = grids
            .days
            .iter()
            .find(|d| d.day_id() == *spec)
            .with_context(|| format!("day {spec} not found in dataset"))?;
        let sequence = crate::imaging::build_block_sequence(&day.grid, &BlockConfig::default())?;
        let dir = args.out.join("png");
        for (b, image) in sequence.images.iter().enumerate() {
            crate::imaging::write_block_pngs(image, &dir, &format!("block{b}"))?;
        }
        println!("dumped {} block images to {}", sequence.images.len(), dir.display());
    }

    write_manifest(
        &args.out,
        serde_json::json!({
            "ratio": args.ratio,
            "split_seed": args.seed,
            "standardize_discrete": args.standardize_discrete,
        }),
        &[("sensor", args.sensor.as_path()), ("labels", args.labels.as_path())],
    )?;
    println!(
        "cached {} days ({} train / {} val) to {}",
        grids.days.len(),
        train_ids.len(),
        val_ids.len(),
        args.out.display()
    );
    Ok(())
}

fn resolve_train_configs(
    args: &TrainArgs,
) -> anyhow::Result<(ModelKind, TrainConfig, ModelConfig, BlockConfig)> {
    let kind: ModelKind = args.model.parse()?;
    let mut train_config = if args.paper_schedule {
        TrainConfig::default()
    } else {
        TrainConfig::desk()
    };
    train_config.seed = args.seed;
    if let Some(epochs) = args.epochs {
        train_config.epochs = epochs;
    }
    if let Some(lr) = args.lr {
        train_config.learning_rate = lr;
    }
    if let Some(batch) = args.batch_size {
        train_config.batch_size = batch;
    }
    if let Some(gamma) = args.gamma {
        train_config.focal_gamma = gamma;
    }
    if let Some(wd) = args.weight_decay {
        train_config.weight_decay = wd;
    }
    if args.balanced_alpha {
        train_config.focal_alpha = FocalAlpha::Balanced;
    }
    let encoding: Encoding = args.encoding.parse()?;
    let block_config = BlockConfig {
        n_hours: args.n_hours,
        encoding,
        discrete_in_image: args.no_discrete_branch,
        ..BlockConfig::default()
    };
    block_config.validate()?;
    let cbam_placement = match args.cbam.as_str() {
        "block_sequence" => CbamPlacement::BlockSequence,
        "encoder_map" => CbamPlacement::EncoderMap,
        "none" => CbamPlacement::None,
        other => bail!("unknown cbam placement {other:?}"),
    };
    let model_config = ModelConfig {
        cbam_placement,
        use_discrete_branch: !args.no_discrete_branch,
        ..ModelConfig::default()
    };
    Ok((kind, train_config, model_config, block_config))
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let (dataset, train_ids, val_ids, _index) = load_cache(&args.data)?;
    let (kind, train_config, model_config, block_config) = resolve_train_configs(&args)?;

    let mut log = std::io::BufWriter::new(std::fs::File::create(args.out.join("train.log.jsonl"))?);
    let setup = TrainSetup {
        dataset: &dataset,
        train_ids: &train_ids,
        val_ids: &val_ids,
        kind,
        train_config: train_config.clone(),
        model_config,
        block_config,
        encoder_config: ContinuousEncoderConfig::default(),
        discrete_config: DiscreteEncoderConfig::default(),
    };
    let artifacts = train(setup, Some(&mut log))?;
    drop(log);

    save_checkpoint(&args.out, &artifacts, &train_config)?;
    let model_id = args
        .model_id
        .clone()
        .unwrap_or_else(|| format!("{kind}-n{}-{}-seed{}", args.n_hours, args.encoding, args.seed));
    write_logit_file(&args.out.join("val_logits.jsonl"), &model_id, &artifacts.val_logits)?;
    write_logit_file(&args.out.join("train_logits.jsonl"), &model_id, &artifacts.train_logits)?;
    std::fs::write(
        args.out.join("metrics.json"),
        serde_json::to_string_pretty(&artifacts.val_report)?,
    )?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "model": kind,
            "train": train_config,
            "block": block_config,
            "model_id": model_id,
        }),
        &[("cache_index", args.data.join("index.json").as_path())],
    )?;
    print!("{}", artifacts.val_report.render_table(&model_id));
    println!(
        "best epoch {} val avg {}",
        artifacts.bundle.best_epoch,
        format_f3(artifacts.bundle.best_average)
    );
    Ok(())
}

/// Labels for a list of day ids, resolved through a labels CSV.
fn labels_for_days(
    labels_path: &Path,
    day_ids: &[String],
) -> anyhow::Result<Vec<LabelVector>> {
    let labels = parse_labels_file(labels_path)?;
    let by_id: BTreeMap<String, LabelVector> = labels
        .into_iter()
        .map(|((subject, date), label)| (day_id(&subject, date), label))
        .collect();
    day_ids
        .iter()
        .map(|d| {
            by_id
                .get(d)
                .copied()
                .with_context(|| format!("no label row for day {d}"))
        })
        .collect()
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let (report, label): (MetricReport, String) = match (&args.checkpoint, &args.logits) {
        (Some(checkpoint), None) => {
            let data = args
                .data
                .as_ref()
                .context("--checkpoint evaluation needs --data <cache>")?;
            let (dataset, train_ids, val_ids, _) = load_cache(data)?;
            let ids = match args.split.as_str() {
                "train" => train_ids,
                "val" => val_ids,
                other => bail!("unknown split {other:?}"),
            };
            let (model, meta) = load_checkpoint(checkpoint)?;
            let report = crate::training::evaluate_split(&model, &dataset, &ids)?;
            (report, format!("{}@{}", meta.kind, args.split))
        }
        (None, Some(logits_path)) => {
            let labels_path = args.labels.as_ref().context("--logits evaluation needs --labels")?;
            let (model_id, days) = read_logit_file(logits_path)?;
            let day_ids: Vec<String> = days.iter().map(|(d, _)| d.clone()).collect();
            let labels = labels_for_days(labels_path, &day_ids)?;
            let predictions: Vec<LabelVector> =
                days.iter().map(|(_, l)| predict(l)).collect();
            (evaluate_predictions(&predictions, &labels)?, model_id)
        }
        _ => bail!("pass exactly one of --checkpoint or --logits"),
    };
    std::fs::write(args.out.join("metrics.json"), serde_json::to_string_pretty(&report)?)?;
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    if let Some(p) = &args.logits {
        inputs.push(("logits", p.as_path()));
    }
    write_manifest(&args.out, serde_json::json!({"split": args.split}), &inputs)?;
    print!("{}", report.render_table(&label));
    Ok(())
}

#[derive(serde::Deserialize)]
struct PoolManifest {
    models: Vec<PoolEntry>,
}

#[derive(serde::Deserialize)]
struct PoolEntry {
    #[allow(dead_code)]
    id: Option<String>,
    logits: PathBuf,
}

fn cmd_ensemble(args: EnsembleArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let mut files = args.logits.clone();
    if let Some(pool_path) = &args.pool {
        let manifest: PoolManifest =
            serde_json::from_str(&std::fs::read_to_string(pool_path)?)?;
        let base = pool_path.parent().unwrap_or(Path::new("."));
        files.extend(manifest.models.into_iter().map(|m| {
            if m.logits.is_relative() {
                base.join(m.logits)
            } else {
                m.logits
            }
        }));
    }
    if files.is_empty() {
        bail!("no logit files given (use --logits or --pool)");
    }
    let models: Vec<(String, Vec<(String, crate::types::HeadLogits)>)> = files
        .iter()
        .map(|p| read_logit_file(p))
        .collect::<crate::error::Result<_>>()?;
    let mut pool = EnsemblePool::new(models)?;
    pool.margin_kind = match args.margin.as_str() {
        "top2" => MarginKind::Top2,
        "top3" => MarginKind::Top3,
        other => bail!("unknown margin kind {other:?}"),
    };
    let labels = labels_for_days(&args.labels, &pool.day_ids)?;
    pool.select_best(&labels)?;
    pool.fit_thresholds(args.quantile)?;
    write_threshold_file(&args.out.join("thresholds.json"), &pool)?;

    let methods: Vec<&str> = match args.method.as_str() {
        "all" => vec!["soft", "hard", "ualre"],
        m @ ("soft" | "hard" | "ualre") => vec![m],
        other => bail!("unknown method {other:?}"),
    };
    let mut summary = serde_json::Map::new();
    for method in methods {
        let predictions = match method {
            "soft" => pool.soft_vote(),
            "hard" => pool.hard_vote(),
            _ => pool.ualre()?,
        };
        let report = evaluate_predictions(&predictions, &labels)?;
        std::fs::write(
            args.out.join(format!("report_{method}.json")),
            serde_json::to_string_pretty(&report)?,
        )?;
        print!("{}", report.render_table(method));
        summary.insert(method.to_string(), serde_json::json!(report.average));
    }
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(summary))?,
    )?;
    let inputs: Vec<(String, &Path)> = files
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("logits_{i}"), p.as_path()))
        .collect();
    let input_refs: Vec<(&str, &Path)> =
        inputs.iter().map(|(n, p)| (n.as_str(), *p)).collect();
    write_manifest(
        &args.out,
        serde_json::json!({
            "method": args.method,
            "quantile": args.quantile,
            "margin": args.margin,
            "best_model": pool.model_ids[pool.best_index],
        }),
        &input_refs,
    )?;
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let (dataset, train_ids, val_ids, _) = load_cache(&args.data)?;
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse().context("bad seed list"))
        .collect::<anyhow::Result<_>>()?;
    let n_hours = [2usize, 4, 6];
    let encodings = [Encoding::StackedVertical, Encoding::MultiChannel];
    let mut cells = vec![vec![0.0f64; n_hours.len()]; encodings.len()];
    for (row, &encoding) in encodings.iter().enumerate() {
        for (col, &n) in n_hours.iter().enumerate() {
            let mut sum = 0.0;
            for &seed in &seeds {
                let mut train_config = TrainConfig::desk();
                train_config.seed = seed;
                if let Some(epochs) = args.epochs {
                    train_config.epochs = epochs;
                }
                let setup = TrainSetup {
                    dataset: &dataset,
                    train_ids: &train_ids,
                    val_ids: &val_ids,
                    kind: ModelKind::MisLstm,
                    train_config,
                    model_config: ModelConfig::default(),
                    block_config: BlockConfig {
                        n_hours: n,
                        encoding,
                        ..BlockConfig::default()
                    },
                    encoder_config: ContinuousEncoderConfig::default(),
                    discrete_config: DiscreteEncoderConfig::default(),
                };
                let artifacts = train(setup, None)?;
                sum += artifacts.bundle.best_average;
                eprintln!(
                    "ablate: {encoding} N={n} seed={seed} -> {}",
                    format_f3(artifacts.bundle.best_average)
                );
            }
            cells[row][col] = sum / seeds.len() as f64;
        }
    }
    let grid = AblationGrid {
        n_hours: n_hours.to_vec(),
        encodings: encodings.iter().map(|e| e.to_string()).collect(),
        cells,
        seeds,
    };
    std::fs::write(args.out.join("ablation.json"), serde_json::to_string_pretty(&grid)?)?;
    ablation_chart(&args.out.join("ablation.png"), &grid)?;
    write_manifest(
        &args.out,
        serde_json::json!({"seeds": grid.seeds, "epochs": args.epochs}),
        &[("cache_index", args.data.join("index.json").as_path())],
    )?;
    print!("{}", grid.render_table());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let _lock = DirLock::acquire(&args.out)?;
    let mut rendered = 0usize;
    let metrics_path = args.input.join("metrics.json");
    if metrics_path.exists() {
        let report: MetricReport = serde_json::from_str(&std::fs::read_to_string(&metrics_path)?)?;
        let table = report.render_table("model");
        std::fs::write(args.out.join("metrics.txt"), &table)?;
        let labels: Vec<String> = report.heads.iter().map(|h| h.name.to_uppercase()).collect();
        let values: Vec<f64> = report.heads.iter().map(|h| h.macro_f1).collect();
        bar_chart(&args.out.join("metrics.png"), "MACRO-F1 PER HEAD", &labels, &values)?;
        print!("{table}");
        rendered += 1;
    }
    let ablation_path = args.input.join("ablation.json");
    if ablation_path.exists() {
        let grid: AblationGrid = serde_json::from_str(&std::fs::read_to_string(&ablation_path)?)?;
        let table = grid.render_table();
        std::fs::write(args.out.join("ablation.txt"), &table)?;
        ablation_chart(&args.out.join("ablation.png"), &grid)?;
        print!("{table}");
        rendered += 1;
    }
    for method in ["soft", "hard", "ualre"] {
        let path = args.input.join(format!("report_{method}.json"));
        if path.exists() {
            let report: MetricReport = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let table = report.render_table(method);
            std::fs::write(args.out.join(format!("report_{method}.txt")), &table)?;
            print!("{table}");
            rendered += 1;
        }
    }
    if rendered == 0 {
        bail!("no metrics.json, ablation.json, or report_*.json under {}", args.input.display());
    }
    write_manifest(&args.out, serde_json::json!({"source": args.input}), &[])?;
    Ok(())
}
