//! Deterministic synthetic lifelog generator with planted label effects.
//!
//! Streams are emitted at their native rates (heart rate once a minute,
//! wrist light once every ten minutes, ambience once every two minutes, and
//! so on) and each target metric is tied to a documented generative rule so
//! that a correctly wired pipeline can actually learn the task:
//!
//! * `q1 = 1` raises morning (06-12h) wrist light by `strength * 250` lx.
//! * `q2 = 0` raises evening (18-24h) app usage by `strength * 20000` ms per
//!   interval and evening screen-on probability by `strength * 0.25`.
//! * `q3 = 0` raises evening (18-24h) heart rate by `strength * 15` bpm and
//!   the probability of loud evening ambience by `strength * 0.3`.
//! * `s1` shifts the daytime still-activity probability by
//!   `strength * 0.22 * (s1 - 1)`, which also scales GPS travel distance.
//! * `s2 = 1` raises night (00-06h) charging probability by
//!   `strength * 0.6` and Wi-Fi RSSI by `strength * 10` dBm.
//! * `s3 = 1` lowers evening (18-24h) wrist light by `strength * 150` lx.
//!
//! Each channel of each day independently loses one contiguous run of
//! samples (`missing_fraction` of the day) to exercise interpolation.
//!
//! Determinism: every (subject, day, channel) gets its own counter-derived
//! ChaCha stream, so equal configs produce byte-identical files regardless
//! of generation order.

use std::io::Write;

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{write_labels_csv, write_sensor_csv};
use crate::types::{LabelVector, HEAD_CLASSES, HEAD_NAMES, N_HEADS};

/// Generator settings.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub days_per_subject: usize,
    pub seed: u64,
    /// Scales every planted effect; 0 removes all label information.
    pub signal_strength: f64,
    /// Per-head class priors, each summing to 1.
    pub label_balance: [Vec<f64>; N_HEADS],
    /// Fraction of each channel-day dropped as one contiguous gap.
    pub missing_fraction: f64,
    /// Date of day 0 for every subject.
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 10,
            days_per_subject: 60,
            seed: 1,
            signal_strength: 1.0,
            label_balance: default_priors(),
            missing_fraction: 0.05,
            start_date: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
        }
    }
}

/// Uniform priors: 1/2 per class on binary heads, 1/3 on the ternary head.
pub fn default_priors() -> [Vec<f64>; N_HEADS] {
    [
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
    ]
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Config("n_subjects must be >= 2".into()));
        }
        if self.days_per_subject < 2 {
            return Err(Error::Config("days_per_subject must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::Config("signal_strength must be in [0, 1]".into()));
        }
        if !(0.0..0.5).contains(&self.missing_fraction) {
            return Err(Error::Config("missing_fraction must be in [0, 0.5)".into()));
        }
        for (head, priors) in self.label_balance.iter().enumerate() {
            if priors.len() != HEAD_CLASSES[head] {
                return Err(Error::Config(format!(
                    "priors for {} must have {} entries",
                    HEAD_NAMES[head], HEAD_CLASSES[head]
                )));
            }
            let sum: f64 = priors.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || priors.iter().any(|&p| p < 0.0) {
                return Err(Error::Config(format!(
                    "priors for {} must be non-negative and sum to 1",
                    HEAD_NAMES[head]
                )));
            }
        }
        Ok(())
    }
}

/// One generated subject-day.
#[derive(Debug, Clone)]
pub struct SynthDay {
    pub subject_id: String,
    pub date: NaiveDate,
    pub label: LabelVector,
    /// (timestamp, item name, value), channel-major then time-ordered.
    pub readings: Vec<(i64, &'static str, f64)>,
}

/// Full generated dataset, ordered by (subject, day).
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub days: Vec<SynthDay>,
}

impl SyntheticDataset {
    /// Serialize to the canonical sensor CSV bytes.
    pub fn sensor_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        let rows = self.days.iter().flat_map(|day| {
            day.readings
                .iter()
                .map(move |&(ts, item, value)| (day.subject_id.clone(), ts, item, value))
        });
        write_sensor_csv(&mut buf, rows).expect("in-memory write");
        buf
    }

    /// Serialize to the canonical labels CSV bytes.
    pub fn labels_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        let rows = self
            .days
            .iter()
            .map(|day| (day.subject_id.clone(), day.date, day.label));
        write_labels_csv(&mut buf, rows).expect("in-memory write");
        buf
    }

    pub fn write_files(
        &self,
        sensor_path: impl AsRef<std::path::Path>,
        labels_path: impl AsRef<std::path::Path>,
    ) -> Result<()> {
        let mut sensor = std::io::BufWriter::new(std::fs::File::create(sensor_path)?);
        sensor.write_all(&self.sensor_csv())?;
        sensor.flush()?;
        let mut labels = std::io::BufWriter::new(std::fs::File::create(labels_path)?);
        labels.write_all(&self.labels_csv())?;
        labels.flush()?;
        Ok(())
    }
}

// Counter-derived substreams: mixing the coordinates through splitmix64
// keeps (subject, day, channel) streams independent of generation order.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn substream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ 0x6d69736c73746d31); // domain constant
    for &t in tags {
        state = splitmix64(state ^ t);
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(i as u64 + 1));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Per-head label sequences whose class counts match the priors exactly
/// (largest-remainder rounding), independently shuffled per head. This keeps
/// marginals within rounding error of the configured priors at any size.
fn quota_labels(config: &SynthConfig) -> Vec<[usize; N_HEADS]> {
    let n = config.n_subjects * config.days_per_subject;
    let mut per_head: Vec<Vec<usize>> = Vec::with_capacity(N_HEADS);
    for (head, priors) in config.label_balance.iter().enumerate() {
        let mut counts: Vec<usize> = priors.iter().map(|p| (p * n as f64).floor() as usize).collect();
        let mut remainders: Vec<(usize, f64)> = priors
            .iter()
            .enumerate()
            .map(|(c, p)| (c, p * n as f64 - counts[c] as f64))
            .collect();
        remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let assigned: usize = counts.iter().sum();
        for k in 0..n - assigned {
            counts[remainders[k % remainders.len()].0] += 1;
        }
        let mut sequence: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(class, &count)| std::iter::repeat(class).take(count))
            .collect();
        let mut rng = substream(config.seed, &[2, head as u64]);
        // Fisher-Yates
        for i in (1..sequence.len()).rev() {
            let j = rng.gen_range(0..=i);
            sequence.swap(i, j);
        }
        per_head.push(sequence);
    }
    (0..n)
        .map(|i| std::array::from_fn(|head| per_head[head][i]))
        .collect()
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    Normal::new(mean, std).unwrap().sample(rng)
}

/// Subject-level baselines, drawn once per subject.
struct SubjectBaseline {
    hr: f64,
    light_day: f64,
    usage: f64,
    wifi_rssi: f64,
    wifi_count: f64,
    ble: f64,
}

impl SubjectBaseline {
    fn draw(seed: u64, subject: usize) -> Self {
        let mut rng = substream(seed, &[1, subject as u64]);
        SubjectBaseline {
            hr: normal(&mut rng, 70.0, 5.0),
            light_day: normal(&mut rng, 300.0, 60.0),
            usage: normal(&mut rng, 6000.0, 1500.0),
            wifi_rssi: normal(&mut rng, -60.0, 4.0),
            wifi_count: normal(&mut rng, 10.0, 2.0),
            ble: normal(&mut rng, -65.0, 4.0),
        }
    }
}

const MORNING: std::ops::Range<usize> = 360..720; // 06:00-12:00 in minutes
const EVENING: std::ops::Range<usize> = 1080..1440; // 18:00-24:00
const NIGHT: std::ops::Range<usize> = 0..360; // 00:00-06:00

/// Drop one contiguous run covering `fraction` of `n` sample slots.
/// Returns the kept index range complement, i.e. (gap_start, gap_len).
fn gap(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> (usize, usize) {
    let len = ((n as f64) * fraction).round() as usize;
    if len == 0 || len >= n {
        return (n, 0);
    }
    let start = rng.gen_range(0..=(n - len));
    (start, len)
}

fn channel_tag(name: &str) -> u64 {
    name.bytes().fold(0u64, |acc, b| splitmix64(acc ^ b as u64))
}

/// Generate the full dataset.
pub fn generate(config: &SynthConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut days = Vec::with_capacity(config.n_subjects * config.days_per_subject);
    let id_width = config.n_subjects.to_string().len().max(2);
    let labels = quota_labels(config);

    for subject in 0..config.n_subjects {
        let subject_id = format!("u{:0width$}", subject + 1, width = id_width);
        let baseline = SubjectBaseline::draw(config.seed, subject);

        for day_idx in 0..config.days_per_subject {
            let date = config.start_date + chrono::Days::new(day_idx as u64);
            let day_start = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
            let label = LabelVector::from_classes(labels[subject * config.days_per_subject + day_idx])?;

            let readings = generate_day_readings(config, &baseline, subject, day_idx, day_start, label);
            days.push(SynthDay {
                subject_id: subject_id.clone(),
                date,
                label,
                readings,
            });
        }
    }
    Ok(SyntheticDataset { days })
}

fn generate_day_readings(
    config: &SynthConfig,
    baseline: &SubjectBaseline,
    subject: usize,
    day_idx: usize,
    day_start: i64,
    label: LabelVector,
) -> Vec<(i64, &'static str, f64)> {
    let s = config.signal_strength;
    let mut out = Vec::with_capacity(9000);
    let channel_rng = |name: &str| {
        substream(
            config.seed,
            &[3, subject as u64, day_idx as u64, channel_tag(name)],
        )
    };

    // Day-level wander shared within a channel, drawn first so the gap
    // position never shifts the value stream.
    let emit = |out: &mut Vec<(i64, &'static str, f64)>,
                    name: &'static str,
                    step_min: usize,
                    rng: &mut ChaCha8Rng,
                    f: &mut dyn FnMut(&mut ChaCha8Rng, usize) -> f64| {
        let n = 1440 / step_min;
        let values: Vec<f64> = (0..n).map(|i| f(rng, i * step_min)).collect();
        let (gap_start, gap_len) = gap(rng, n, config.missing_fraction);
        for (i, &v) in values.iter().enumerate() {
            if i >= gap_start && i < gap_start + gap_len {
                continue;
            }
            out.push((day_start + (i * step_min * 60) as i64, name, v));
        }
    };

    // wHr: circadian floor at night, evening rise under high stress (q3=0).
    {
        let mut rng = channel_rng("wHr");
        let day_offset = normal(&mut rng, 0.0, 3.0);
        emit(&mut out, "wHr", 1, &mut rng, &mut |rng, minute| {
            let circadian = if NIGHT.contains(&minute) { -8.0 } else { 2.0 };
            let stress = if EVENING.contains(&minute) && label.q3 == 0 {
                s * 15.0
            } else {
                0.0
            };
            (baseline.hr + day_offset + circadian + stress + normal(rng, 0.0, 8.0)).max(35.0)
        });
    }

    // wLight: bright mornings when q1=1, dim evenings when s3=1.
    {
        let mut rng = channel_rng("wLight");
        let day_offset = normal(&mut rng, 0.0, 20.0);
        let base_day = baseline.light_day;
        emit(&mut out, "wLight", 10, &mut rng, &mut |rng, minute| {
            let mut level = if NIGHT.contains(&minute) {
                5.0
            } else if EVENING.contains(&minute) {
                200.0 - s * 150.0 * (label.s3 == 1) as u8 as f64
            } else {
                base_day + s * 250.0 * (label.q1 == 1 && MORNING.contains(&minute)) as u8 as f64
            };
            level += day_offset + normal(rng, 0.0, 30.0);
            level.max(0.0)
        });
    }

    // mUsageStats: heavier evening phone use under high fatigue (q2=0).
    {
        let mut rng = channel_rng("mUsageStats");
        emit(&mut out, "mUsageStats", 10, &mut rng, &mut |rng, minute| {
            let fatigue = if EVENING.contains(&minute) && label.q2 == 0 {
                s * 20_000.0
            } else {
                0.0
            };
            let night_damp = if NIGHT.contains(&minute) { 0.2 } else { 1.0 };
            (baseline.usage * night_damp + fatigue + normal(rng, 0.0, 3000.0)).max(0.0)
        });
    }

    // mWifiRssi / mWifiCount: RSSI carries the s2 effect, count is nuisance.
    {
        let mut rng = channel_rng("mWifiRssi");
        let shift = s * 10.0 * (label.s2 == 1) as u8 as f64;
        emit(&mut out, "mWifiRssi", 10, &mut rng, &mut |rng, _| {
            (baseline.wifi_rssi + shift + normal(rng, 0.0, 5.0)).clamp(-100.0, 0.0)
        });
        let mut rng = channel_rng("mWifiCount");
        emit(&mut out, "mWifiCount", 10, &mut rng, &mut |rng, _| {
            (baseline.wifi_count + normal(rng, 0.0, 2.0)).max(0.0).round()
        });
    }

    // mBle: pure nuisance channel.
    {
        let mut rng = channel_rng("mBle");
        emit(&mut out, "mBle", 10, &mut rng, &mut |rng, _| {
            (baseline.ble + normal(rng, 0.0, 5.0)).clamp(-100.0, 0.0)
        });
    }

    // mActivity + mGps: daytime stillness scales with s1; distance follows
    // the sampled activity code.
    {
        let mut rng = channel_rng("mActivity");
        let p_still_day = (0.40 + s * 0.22 * (label.s1 as f64 - 1.0)).clamp(0.05, 0.95);
        let codes: Vec<i64> = (0..1440)
            .map(|minute| {
                let night = !(360..1320).contains(&minute);
                let p_still = if night { 0.9 } else { p_still_day };
                if rng.gen::<f64>() < p_still {
                    3 // still
                } else {
                    match rng.gen::<f64>() {
                        u if u < 0.70 => 7, // walking
                        u if u < 0.90 => 0, // vehicle
                        _ => 1,             // bicycle
                    }
                }
            })
            .collect();
        let codes_for_gps = codes.clone();
        let mut i = 0usize;
        emit(&mut out, "mActivity", 1, &mut rng, &mut |_, _| {
            let c = codes[i];
            i += 1;
            c as f64
        });

        let mut rng = channel_rng("mGps");
        let mut j = 0usize;
        emit(&mut out, "mGps", 1, &mut rng, &mut |rng, _| {
            let code = codes_for_gps[j.min(codes_for_gps.len() - 1)];
            j += 1;
            let dist = match code {
                3 => normal(rng, 0.0, 2.0).abs(),
                7 => normal(rng, 80.0, 15.0),
                0 => normal(rng, 600.0, 150.0),
                _ => normal(rng, 250.0, 60.0),
            };
            dist.max(0.0)
        });
    }

    // mAmbience: loud evenings more likely under high stress (q3=0).
    {
        let mut rng = channel_rng("mAmbience");
        emit(&mut out, "mAmbience", 2, &mut rng, &mut |rng, minute| {
            let p_loud = if EVENING.contains(&minute) {
                0.2 + s * 0.3 * (label.q3 == 0) as u8 as f64
            } else {
                0.1
            };
            let u: f64 = rng.gen();
            if u < p_loud {
                2.0
            } else if u < p_loud + 0.4 {
                1.0
            } else {
                0.0
            }
        });
    }

    // mScreenStatus: evening screen-on probability rises with fatigue (q2=0).
    {
        let mut rng = channel_rng("mScreenStatus");
        emit(&mut out, "mScreenStatus", 1, &mut rng, &mut |rng, minute| {
            let p_on = if NIGHT.contains(&minute) {
                0.05
            } else if EVENING.contains(&minute) {
                (0.45 + s * 0.25 * (label.q2 == 0) as u8 as f64).min(0.98)
            } else {
                0.30
            };
            (rng.gen::<f64>() < p_on) as u8 as f64
        });
    }

    // mACStatus: night charging habit tied to s2.
    {
        let mut rng = channel_rng("mACStatus");
        let p_charge_night = 0.3 + s * 0.6 * (label.s2 == 1) as u8 as f64;
        emit(&mut out, "mACStatus", 1, &mut rng, &mut |rng, minute| {
            let p = if NIGHT.contains(&minute) {
                p_charge_night
            } else {
                0.05
            };
            (rng.gen::<f64>() < p) as u8 as f64
        });
    }

    out
}

/// Parse a flat `key=value` config file (one pair per line, `#` comments).
pub fn parse_kv_config(text: &str, base: SynthConfig) -> Result<SynthConfig> {
    let mut config = base;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
        match key {
            "n_subjects" => config.n_subjects = value.parse().map_err(|_| bad("integer"))?,
            "days_per_subject" => {
                config.days_per_subject = value.parse().map_err(|_| bad("integer"))?
            }
            "seed" => config.seed = value.parse().map_err(|_| bad("integer"))?,
            "signal_strength" => {
                config.signal_strength = value.parse().map_err(|_| bad("number"))?
            }
            "missing_fraction" => {
                config.missing_fraction = value.parse().map_err(|_| bad("number"))?
            }
            "start_date" => {
                config.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                    .map_err(|_| bad("date (YYYY-MM-DD)"))?
            }
            head if HEAD_NAMES.contains(&head) => {
                let idx = HEAD_NAMES.iter().position(|&h| h == head).unwrap();
                let priors: std::result::Result<Vec<f64>, _> =
                    value.split(':').map(str::parse).collect();
                config.label_balance[idx] = priors.map_err(|_| bad("priors (p0:p1[:p2])"))?;
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Marginal class frequencies of the generated labels, per head.
pub fn label_marginals(dataset: &SyntheticDataset) -> [Vec<f64>; N_HEADS] {
    let mut counts: [Vec<f64>; N_HEADS] =
        std::array::from_fn(|head| vec![0.0; HEAD_CLASSES[head]]);
    for day in &dataset.days {
        for (head, &class) in day.label.classes().iter().enumerate() {
            counts[head][class] += 1.0;
        }
    }
    let n = dataset.days.len().max(1) as f64;
    for head in counts.iter_mut() {
        for c in head.iter_mut() {
            *c /= n;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_day_record;

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            days_per_subject: 3,
            seed: 7,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn equal_seeds_equal_bytes() {
        let a = generate(&small_config()).unwrap();
        let b = generate(&small_config()).unwrap();
        assert_eq!(a.sensor_csv(), b.sensor_csv());
        assert_eq!(a.labels_csv(), b.labels_csv());
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&small_config()).unwrap();
        let b = generate(&SynthConfig {
            seed: 8,
            ..small_config()
        })
        .unwrap();
        assert_ne!(a.sensor_csv(), b.sensor_csv());
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SynthConfig {
            n_subjects: 1,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SynthConfig {
            signal_strength: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn generated_files_parse_cleanly_with_zero_violations() {
        let ds = generate(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sensor = dir.path().join("sensor.csv");
        let labels = dir.path().join("labels.csv");
        ds.write_files(&sensor, &labels).unwrap();

        let records = crate::ingest::parse_sensor_file(&sensor).unwrap();
        assert_eq!(records.len(), 6);
        for record in &records {
            assert!(validate_day_record(record).is_empty());
        }
        let labels = crate::ingest::parse_labels_file(&labels).unwrap();
        assert_eq!(labels.len(), 6);
        let dataset = crate::ingest::build_dataset(records, &labels);
        assert_eq!(dataset.days.len(), 6);
        assert_eq!(dataset.dropped_unlabeled, 0);
    }

    #[test]
    fn label_marginals_track_priors() {
        let config = SynthConfig {
            n_subjects: 10,
            days_per_subject: 20, // 200 days
            seed: 3,
            ..SynthConfig::default()
        };
        let ds = generate(&config).unwrap();
        let marginals = label_marginals(&ds);
        for (head, priors) in config.label_balance.iter().enumerate() {
            for (class, &p) in priors.iter().enumerate() {
                let got = marginals[head][class];
                assert!(
                    (got - p).abs() <= 0.05,
                    "head {} class {class}: {got:.3} vs prior {p:.3}",
                    HEAD_NAMES[head]
                );
            }
        }
    }

    /// Mean of evening (18-24h) heart-rate readings for one generated day.
    fn evening_hr_mean(day: &SynthDay) -> f64 {
        let day_start = day.date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let (mut sum, mut n) = (0.0, 0usize);
        for &(ts, item, value) in &day.readings {
            let minute = ((ts - day_start) / 60) as usize;
            if item == "wHr" && EVENING.contains(&minute) {
                sum += value;
                n += 1;
            }
        }
        sum / n.max(1) as f64
    }

    /// Best single-threshold accuracy for predicting a binary label from a
    /// scalar feature (scan over sorted midpoints, both polarities).
    fn best_threshold_accuracy(pairs: &[(f64, u8)]) -> f64 {
        let mut sorted: Vec<(f64, u8)> = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len() as f64;
        let total_pos: usize = sorted.iter().filter(|p| p.1 == 1).count();
        let mut best = 0.0f64;
        // pos_below: count of label-1 among items below the cut
        let mut pos_below = 0usize;
        for cut in 0..=sorted.len() {
            let below = cut as f64;
            // polarity A: predict 1 below the cut
            let acc_a = (pos_below as f64 + (n - below - (total_pos - pos_below) as f64)) / n;
            // polarity B: predict 0 below the cut
            let acc_b = ((below - pos_below as f64) + (total_pos - pos_below) as f64) / n;
            best = best.max(acc_a).max(acc_b);
            if cut < sorted.len() && sorted[cut].1 == 1 {
                pos_below += 1;
            }
        }
        best
    }

    #[test]
    fn evening_hr_threshold_predicts_q3_at_full_strength() {
        let ds = generate(&SynthConfig::default()).unwrap(); // 10x60, seed 1, strength 1
        let pairs: Vec<(f64, u8)> = ds
            .days
            .iter()
            .map(|d| (evening_hr_mean(d), d.label.q3))
            .collect();
        let acc = best_threshold_accuracy(&pairs);
        assert!(acc > 0.8, "threshold accuracy {acc:.3} <= 0.8");
    }

    #[test]
    fn zero_strength_removes_label_conditional_shift() {
        let ds = generate(&SynthConfig {
            n_subjects: 6,
            days_per_subject: 70,
            seed: 5,
            signal_strength: 0.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut by_class: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for day in &ds.days {
            by_class[day.label.q3 as usize].push(evening_hr_mean(day));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff = (mean(&by_class[0]) - mean(&by_class[1])).abs();
        assert!(diff < 2.0, "class-conditional gap {diff:.3} too large at strength 0");
    }

    #[test]
    fn kv_config_parses_and_validates() {
        let cfg = parse_kv_config(
            "n_subjects = 4\ndays_per_subject=10\nseed=9\nsignal_strength=0.5\ns1=0.2:0.3:0.5\n# comment\n",
            SynthConfig::default(),
        )
        .unwrap();
        assert_eq!(cfg.n_subjects, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.label_balance[3], vec![0.2, 0.3, 0.5]);
        assert!(parse_kv_config("nope=1", SynthConfig::default()).is_err());
        assert!(parse_kv_config("s1=0.5:0.5", SynthConfig::default()).is_err());
    }
}
