//! Day-record preprocessing: clipping, resampling, aggregation, scaling.
//!
//! Continuous channels are clipped to per-channel bounds, linearly
//! interpolated onto the 1440-minute grid (nearest value held before the
//! first and after the last observation), and standardized with
//! training-split statistics. Discrete streams are aggregated into
//! ten-minute windows (counts and durations) and scaled by the
//! training-split per-row maximum into [0, 1]; a config switch z-scores
//! them instead.
//!
//! Grid cache format (one file per day, little-endian):
//! magic `MLGRID01`, then u32 continuous rows, u32 continuous cols,
//! u32 discrete rows, u32 discrete cols, continuous f32 data row-major,
//! discrete f32 data row-major, mask bytes (0/1) row-major. Channel
//! statistics live in a `stats.json` sidecar and day metadata in
//! `index.json`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::types::{
    ChannelStats, ContinuousChannel, DayFeatureGrid, DayRecord, DiscreteStream, LabelVector,
    StreamItem, MINUTES_PER_DAY, N_CONTINUOUS, N_DISCRETE, TRACKED_ACTIVITY_CODES,
    WINDOWS_PER_DAY,
};

/// Preprocessing settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Clip bounds in raw units, per continuous channel.
    pub clip_bounds: Vec<(f64, f64)>,
    /// Z-score discrete rows with training stats instead of max-scaling.
    pub standardize_discrete: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            clip_bounds: ContinuousChannel::ALL
                .iter()
                .map(|c| c.default_clip_bounds())
                .collect(),
            standardize_discrete: false,
        }
    }
}

/// Clipped and resampled but not yet normalized tensors for one day.
#[derive(Debug, Clone)]
pub struct RawDayGrid {
    /// 7 x 1440, clipped raw units.
    pub continuous: Array2<f32>,
    /// 9 x 144, window counts/durations.
    pub discrete: Array2<f32>,
    pub observed_mask: Array2<bool>,
}

/// One (fractional minute, value) sample.
type Sample = (f64, f64);

/// Linear interpolation of sorted samples onto integer minutes 0..1440.
/// Before the first and after the last sample the nearest value is held.
/// Empty input yields zeros. Shared by the pipeline and exposed for tests.
pub fn interpolate_minutes(samples: &[Sample]) -> Vec<f32> {
    let mut out = vec![0.0f32; MINUTES_PER_DAY];
    if samples.is_empty() {
        return out;
    }
    let mut left = 0usize; // greatest index with samples[left].0 <= t, once past the start
    for (t, slot) in out.iter_mut().enumerate() {
        let t = t as f64;
        if t <= samples[0].0 {
            *slot = samples[0].1 as f32;
            continue;
        }
        if t >= samples[samples.len() - 1].0 {
            *slot = samples[samples.len() - 1].1 as f32;
            continue;
        }
        while left + 1 < samples.len() && samples[left + 1].0 <= t {
            left += 1;
        }
        let (ul, vl) = samples[left];
        let (ur, vr) = samples[left + 1];
        *slot = if ur == ul {
            vl as f32
        } else {
            (vl + (vr - vl) * ((t - ul) / (ur - ul))) as f32
        };
    }
    out
}

/// Collect one channel's samples from a record: clip (optional), average
/// duplicate timestamps, sort by time.
fn channel_samples(
    record: &DayRecord,
    channel: ContinuousChannel,
    clip: Option<(f64, f64)>,
) -> Vec<Sample> {
    let day_start = record.day_start();
    let name = channel.item_name();
    let mut by_ts: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for reading in &record.readings {
        if &*reading.item != name || !reading.value.is_finite() {
            continue;
        }
        let value = match clip {
            Some((lo, hi)) => reading.value.clamp(lo, hi),
            None => reading.value,
        };
        let entry = by_ts.entry(reading.timestamp).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    by_ts
        .into_iter()
        .map(|(ts, (sum, n))| (((ts - day_start) as f64) / 60.0, sum / n as f64))
        .collect()
}

/// Resample one continuous channel onto the minute grid with its observed
/// mask (true where the minute contains at least one raw reading). No
/// clipping is applied here; the full pipeline clips first.
pub fn resample_continuous(
    record: &DayRecord,
    channel: ContinuousChannel,
) -> (Vec<f32>, Vec<bool>) {
    let samples = channel_samples(record, channel, None);
    let values = interpolate_minutes(&samples);
    let mut mask = vec![false; MINUTES_PER_DAY];
    for &(u, _) in &samples {
        let minute = u.floor() as i64;
        if (0..MINUTES_PER_DAY as i64).contains(&minute) {
            mask[minute as usize] = true;
        }
    }
    (values, mask)
}

/// Aggregate the discrete streams of one day into the 9 x 144 count grid.
pub fn aggregate_discrete(record: &DayRecord) -> Array2<f32> {
    let day_start = record.day_start();
    let mut grid = Array2::<f32>::zeros((N_DISCRETE, WINDOWS_PER_DAY));
    for reading in &record.readings {
        let Some(StreamItem::Discrete(stream)) = reading.stream_item() else {
            continue;
        };
        if !reading.value.is_finite() {
            continue;
        }
        let minute = (reading.timestamp - day_start) / 60;
        if !(0..MINUTES_PER_DAY as i64).contains(&minute) {
            continue;
        }
        let window = (minute / 10) as usize;
        let code = reading.value.round() as i64;
        match stream {
            DiscreteStream::Activity => {
                if let Some(row) = TRACKED_ACTIVITY_CODES.iter().position(|&c| c == code) {
                    grid[[row, window]] += 1.0;
                }
            }
            DiscreteStream::Ambience => {
                if (0..3).contains(&code) {
                    grid[[4 + code as usize, window]] += 1.0;
                }
            }
            DiscreteStream::ScreenStatus => {
                if code == 1 {
                    grid[[7, window]] += 1.0;
                }
            }
            DiscreteStream::AcStatus => {
                if code == 1 {
                    grid[[8, window]] += 1.0;
                }
            }
        }
    }
    grid
}

/// Clip and resample one record into raw grids.
pub fn raw_grid(record: &DayRecord, config: &PreprocessConfig) -> RawDayGrid {
    let mut continuous = Array2::<f32>::zeros((N_CONTINUOUS, MINUTES_PER_DAY));
    let mut mask = Array2::<bool>::from_elem((N_CONTINUOUS, MINUTES_PER_DAY), false);
    for (row, &channel) in ContinuousChannel::ALL.iter().enumerate() {
        let samples = channel_samples(record, channel, Some(config.clip_bounds[row]));
        let values = interpolate_minutes(&samples);
        for (t, &v) in values.iter().enumerate() {
            continuous[[row, t]] = v;
        }
        for &(u, _) in &samples {
            let minute = u.floor() as i64;
            if (0..MINUTES_PER_DAY as i64).contains(&minute) {
                mask[[row, minute as usize]] = true;
            }
        }
    }
    RawDayGrid {
        continuous,
        discrete: aggregate_discrete(record),
        observed_mask: mask,
    }
}

/// Fit normalization statistics on training-day raw grids only.
///
/// Continuous mean/std use the population convention over mask-true entries;
/// a std below 1e-6 is replaced by 1.0. Discrete per-row maxima below 1e-6
/// are replaced by 1.0.
pub fn fit_stats(train_grids: &[&RawDayGrid], config: &PreprocessConfig) -> Result<ChannelStats> {
    if train_grids.is_empty() {
        return Err(Error::Data("cannot fit stats on an empty training set".into()));
    }
    let mut mean = vec![0.0f32; N_CONTINUOUS];
    let mut std = vec![1.0f32; N_CONTINUOUS];
    for row in 0..N_CONTINUOUS {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for grid in train_grids {
            for (v, &m) in grid.continuous.row(row).iter().zip(grid.observed_mask.row(row)) {
                if m {
                    sum += *v as f64;
                    count += 1;
                }
            }
        }
        if count == 0 {
            continue; // empty channel keeps mean 0 / std 1
        }
        let mu = sum / count as f64;
        let mut ss = 0.0f64;
        for grid in train_grids {
            for (v, &m) in grid.continuous.row(row).iter().zip(grid.observed_mask.row(row)) {
                if m {
                    let d = *v as f64 - mu;
                    ss += d * d;
                }
            }
        }
        let sigma = (ss / count as f64).sqrt();
        mean[row] = mu as f32;
        std[row] = if sigma < 1e-6 { 1.0 } else { sigma as f32 };
    }

    let mut discrete_max = vec![0.0f32; N_DISCRETE];
    let mut discrete_mean = vec![0.0f32; N_DISCRETE];
    let mut discrete_std = vec![1.0f32; N_DISCRETE];
    for row in 0..N_DISCRETE {
        let mut max = 0.0f32;
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for grid in train_grids {
            for &v in grid.discrete.row(row) {
                max = max.max(v);
                sum += v as f64;
                count += 1;
            }
        }
        let mu = sum / count.max(1) as f64;
        let mut ss = 0.0f64;
        for grid in train_grids {
            for &v in grid.discrete.row(row) {
                let d = v as f64 - mu;
                ss += d * d;
            }
        }
        let sigma = (ss / count.max(1) as f64).sqrt();
        discrete_max[row] = if max < 1e-6 { 1.0 } else { max };
        discrete_mean[row] = mu as f32;
        discrete_std[row] = if sigma < 1e-6 { 1.0 } else { sigma as f32 };
    }

    Ok(ChannelStats {
        mean,
        std,
        clip_lo: config.clip_bounds.iter().map(|b| b.0 as f32).collect(),
        clip_hi: config.clip_bounds.iter().map(|b| b.1 as f32).collect(),
        discrete_max,
        discrete_mean: Some(discrete_mean),
        discrete_std: Some(discrete_std),
    })
}

/// Normalize a raw grid with fitted stats into the model-facing grid.
///
/// A continuous channel with no observation at all stays identically zero
/// (the channel mean in standardized units).
pub fn normalize_grid(
    raw: &RawDayGrid,
    stats: &ChannelStats,
    config: &PreprocessConfig,
) -> DayFeatureGrid {
    let mut continuous = raw.continuous.clone();
    for row in 0..N_CONTINUOUS {
        let empty = !raw.observed_mask.row(row).iter().any(|&m| m);
        for v in continuous.row_mut(row) {
            *v = if empty {
                0.0
            } else {
                (*v - stats.mean[row]) / stats.std[row]
            };
        }
    }
    let mut discrete = raw.discrete.clone();
    for row in 0..N_DISCRETE {
        if config.standardize_discrete {
            let (mu, sigma) = (
                stats.discrete_mean.as_ref().map_or(0.0, |m| m[row]),
                stats.discrete_std.as_ref().map_or(1.0, |s| s[row]),
            );
            for v in discrete.row_mut(row) {
                *v = (*v - mu) / sigma;
            }
        } else {
            for v in discrete.row_mut(row) {
                *v = (*v / stats.discrete_max[row]).clamp(0.0, 1.0);
            }
        }
    }
    DayFeatureGrid {
        continuous,
        discrete,
        observed_mask: raw.observed_mask.clone(),
    }
}

/// Clip, resample, and normalize one record (the full per-day pipeline).
pub fn transform(
    record: &DayRecord,
    stats: &ChannelStats,
    config: &PreprocessConfig,
) -> DayFeatureGrid {
    normalize_grid(&raw_grid(record, config), stats, config)
}

/// One fully preprocessed, labeled day.
#[derive(Debug, Clone)]
pub struct GridDay {
    pub subject_id: String,
    pub subject_idx: usize,
    pub date: NaiveDate,
    pub label: LabelVector,
    pub grid: DayFeatureGrid,
}

impl GridDay {
    pub fn day_id(&self) -> String {
        crate::types::day_id(&self.subject_id, self.date)
    }
}

/// Preprocessed dataset with the stats that produced it.
#[derive(Debug, Clone)]
pub struct GridDataset {
    pub days: Vec<GridDay>,
    pub subject_index: BTreeMap<String, usize>,
    pub stats: ChannelStats,
}

impl GridDataset {
    pub fn subject_count(&self) -> usize {
        self.subject_index.len()
    }
}

/// Run the pipeline over a labeled dataset. `train_ids` are indices into
/// `dataset.days` used to fit stats; validation days never influence them.
pub fn preprocess_dataset(
    dataset: &Dataset,
    config: &PreprocessConfig,
    train_ids: &[usize],
) -> Result<GridDataset> {
    use rayon::prelude::*;
    if config.clip_bounds.len() != N_CONTINUOUS {
        return Err(Error::Config("clip_bounds must cover 7 channels".into()));
    }
    let raw: Vec<RawDayGrid> = dataset
        .days
        .par_iter()
        .map(|day| raw_grid(&day.record, config))
        .collect();
    let train_grids: Vec<&RawDayGrid> = train_ids.iter().map(|&i| &raw[i]).collect();
    let stats = fit_stats(&train_grids, config)?;
    let days: Vec<GridDay> = dataset
        .days
        .iter()
        .zip(raw.iter())
        .map(|(day, raw)| {
            let grid = normalize_grid(raw, &stats, config);
            grid.validate()?;
            Ok(GridDay {
                subject_id: day.record.subject_id.clone(),
                subject_idx: dataset.subject_index[&day.record.subject_id],
                date: day.record.date,
                label: day.label,
                grid,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GridDataset {
        days,
        subject_index: dataset.subject_index.clone(),
        stats,
    })
}

const GRID_MAGIC: &[u8; 8] = b"MLGRID01";

/// Serialize one day grid into the documented binary layout.
pub fn write_grid_file(path: &Path, grid: &DayFeatureGrid) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(GRID_MAGIC)?;
    for dim in [
        grid.continuous.nrows(),
        grid.continuous.ncols(),
        grid.discrete.nrows(),
        grid.discrete.ncols(),
    ] {
        out.write_all(&(dim as u32).to_le_bytes())?;
    }
    for &v in grid.continuous.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    for &v in grid.discrete.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    for &m in grid.observed_mask.iter() {
        out.write_all(&[m as u8])?;
    }
    out.flush()?;
    Ok(())
}

/// Read one day grid back from the binary layout.
pub fn read_grid_file(path: &Path) -> Result<DayFeatureGrid> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let fail = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    if data.len() < 24 || &data[..8] != GRID_MAGIC {
        return Err(fail("bad magic"));
    }
    let dim = |i: usize| {
        u32::from_le_bytes(data[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize
    };
    let (cr, cc, dr, dc) = (dim(0), dim(1), dim(2), dim(3));
    let floats = cr * cc + dr * dc;
    let expected = 24 + floats * 4 + cr * cc;
    if data.len() != expected {
        return Err(fail("truncated grid file"));
    }
    let mut read_f32 = {
        let mut offset = 24usize;
        move |n: usize, data: &[u8]| {
            let values: Vec<f32> = (0..n)
                .map(|i| {
                    f32::from_le_bytes(
                        data[offset + 4 * i..offset + 4 * i + 4].try_into().unwrap(),
                    )
                })
                .collect();
            offset += 4 * n;
            values
        }
    };
    let cont = read_f32(cr * cc, &data);
    let disc = read_f32(dr * dc, &data);
    let mask_off = 24 + floats * 4;
    let mask: Vec<bool> = data[mask_off..mask_off + cr * cc]
        .iter()
        .map(|&b| b != 0)
        .collect();
    Ok(DayFeatureGrid {
        continuous: Array2::from_shape_vec((cr, cc), cont)
            .map_err(|e| fail(&e.to_string()))?,
        discrete: Array2::from_shape_vec((dr, dc), disc).map_err(|e| fail(&e.to_string()))?,
        observed_mask: Array2::from_shape_vec((cr, cc), mask)
            .map_err(|e| fail(&e.to_string()))?,
    })
}

/// One day entry of the cache index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheDay {
    pub subject_id: String,
    pub subject_idx: usize,
    pub date: NaiveDate,
    pub label: LabelVector,
    pub file: String,
    /// "train" or "val".
    pub split: String,
}

/// `index.json` of a grid cache directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheIndex {
    pub days: Vec<CacheDay>,
    pub subject_index: BTreeMap<String, usize>,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub preprocess: PreprocessConfig,
}

/// Persist a preprocessed dataset: per-day grid files, `stats.json`, and
/// `index.json` carrying the split membership.
pub fn save_cache(
    dir: &Path,
    dataset: &GridDataset,
    train_ids: &[usize],
    val_ids: &[usize],
    config: &PreprocessConfig,
    split_ratio: f64,
    split_seed: u64,
) -> Result<()> {
    let grids = dir.join("grids");
    std::fs::create_dir_all(&grids)?;
    let mut days = Vec::with_capacity(dataset.days.len());
    let is_train: std::collections::BTreeSet<usize> = train_ids.iter().copied().collect();
    let is_val: std::collections::BTreeSet<usize> = val_ids.iter().copied().collect();
    for (i, day) in dataset.days.iter().enumerate() {
        let file = format!("grids/{}_{}.grid", day.subject_id, day.date);
        write_grid_file(&dir.join(&file), &day.grid)?;
        let split = if is_train.contains(&i) {
            "train"
        } else if is_val.contains(&i) {
            "val"
        } else {
            return Err(Error::Data(format!("day {i} missing from both splits")));
        };
        days.push(CacheDay {
            subject_id: day.subject_id.clone(),
            subject_idx: day.subject_idx,
            date: day.date,
            label: day.label,
            file,
            split: split.to_string(),
        });
    }
    let index = CacheIndex {
        days,
        subject_index: dataset.subject_index.clone(),
        split_ratio,
        split_seed,
        preprocess: config.clone(),
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    std::fs::write(
        dir.join("stats.json"),
        serde_json::to_string_pretty(&dataset.stats)?,
    )?;
    Ok(())
}

/// Load a cache directory back into memory.
pub fn load_cache(dir: &Path) -> Result<(GridDataset, Vec<usize>, Vec<usize>, CacheIndex)> {
    let index: CacheIndex = serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    let stats: ChannelStats = serde_json::from_str(&std::fs::read_to_string(dir.join("stats.json"))?)?;
    stats.validate()?;
    let mut days = Vec::with_capacity(index.days.len());
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    for (i, day) in index.days.iter().enumerate() {
        let grid = read_grid_file(&dir.join(&day.file))?;
        grid.validate()?;
        match day.split.as_str() {
            "train" => train_ids.push(i),
            "val" => val_ids.push(i),
            other => return Err(Error::Data(format!("unknown split tag {other:?}"))),
        }
        days.push(GridDay {
            subject_id: day.subject_id.clone(),
            subject_idx: day.subject_idx,
            date: day.date,
            label: day.label,
            grid,
        });
    }
    Ok((
        GridDataset {
            days,
            subject_index: index.subject_index.clone(),
            stats,
        },
        train_ids,
        val_ids,
        index,
    ))
}
