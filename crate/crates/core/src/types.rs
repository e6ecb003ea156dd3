//! Shared data model: sensor streams, day grids, labels, logits, and configs.
//!
//! Every stream reading carries one of 11 item names. The seven continuous
//! items map one-to-one onto rows of the continuous day grid; the four
//! discrete items expand into nine grid rows during windowed aggregation
//! (activity codes into four count rows, ambience levels into three, screen
//! and charging status into one row each), for 16 derived channels total.
//!
//! All types here are immutable value objects after construction and safe to
//! share across worker threads.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes in one day; width of the continuous grid.
pub const MINUTES_PER_DAY: usize = 1440;
/// Ten-minute windows in one day; width of the discrete grid.
pub const WINDOWS_PER_DAY: usize = 144;
/// Continuous channels (rows of the continuous grid).
pub const N_CONTINUOUS: usize = 7;
/// Discrete channels (rows of the aggregated discrete grid).
pub const N_DISCRETE: usize = 9;
/// Prediction heads, in order Q1, Q2, Q3, S1, S2, S3.
pub const N_HEADS: usize = 6;
/// Classes per head.
pub const HEAD_CLASSES: [usize; N_HEADS] = [2, 2, 2, 3, 2, 2];
/// Head names, lowercase, in head order.
pub const HEAD_NAMES: [&str; N_HEADS] = ["q1", "q2", "q3", "s1", "s2", "s3"];
/// Sum of `HEAD_CLASSES`; length of a flattened logit vector.
pub const TOTAL_LOGITS: usize = 13;

/// Continuous grid channels, in fixed row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContinuousChannel {
    /// Max Bluetooth RSSI per minute (dBm).
    BleRssi,
    /// Travel distance per minute (m).
    GpsDistance,
    /// Summed app usage time per minute (ms).
    UsageTime,
    /// Max Wi-Fi RSSI per minute (dBm).
    WifiRssi,
    /// Wi-Fi device count per minute.
    WifiCount,
    /// Mean heart rate per minute (bpm).
    HeartRate,
    /// Wrist ambient light per minute (lx).
    WristLight,
}

impl ContinuousChannel {
    pub const ALL: [ContinuousChannel; N_CONTINUOUS] = [
        ContinuousChannel::BleRssi,
        ContinuousChannel::GpsDistance,
        ContinuousChannel::UsageTime,
        ContinuousChannel::WifiRssi,
        ContinuousChannel::WifiCount,
        ContinuousChannel::HeartRate,
        ContinuousChannel::WristLight,
    ];

    /// Row index in the continuous grid.
    pub fn row(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Stream item name as it appears in sensor files.
    pub fn item_name(self) -> &'static str {
        match self {
            ContinuousChannel::BleRssi => "mBle",
            ContinuousChannel::GpsDistance => "mGps",
            ContinuousChannel::UsageTime => "mUsageStats",
            ContinuousChannel::WifiRssi => "mWifiRssi",
            ContinuousChannel::WifiCount => "mWifiCount",
            ContinuousChannel::HeartRate => "wHr",
            ContinuousChannel::WristLight => "wLight",
        }
    }

    /// Default clip bounds in raw units, per channel.
    pub fn default_clip_bounds(self) -> (f64, f64) {
        match self {
            ContinuousChannel::BleRssi => (-100.0, 0.0),
            ContinuousChannel::GpsDistance => (0.0, 3000.0),
            ContinuousChannel::UsageTime => (0.0, 240_000.0),
            ContinuousChannel::WifiRssi => (-100.0, 0.0),
            ContinuousChannel::WifiCount => (0.0, 100.0),
            ContinuousChannel::HeartRate => (30.0, 220.0),
            ContinuousChannel::WristLight => (0.0, 50_000.0),
        }
    }
}

/// Discrete stream items (raw event streams, pre-aggregation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscreteStream {
    /// Activity code per minute: 0 vehicle, 1 bicycle, 3 still, 7 walking.
    Activity,
    /// Ambient context level per two minutes: 0 low, 1 medium, 2 high.
    Ambience,
    /// Screen status per minute: 0 off, 1 on.
    ScreenStatus,
    /// Charging status per minute: 0 no, 1 charging.
    AcStatus,
}

impl DiscreteStream {
    pub const ALL: [DiscreteStream; 4] = [
        DiscreteStream::Activity,
        DiscreteStream::Ambience,
        DiscreteStream::ScreenStatus,
        DiscreteStream::AcStatus,
    ];

    pub fn item_name(self) -> &'static str {
        match self {
            DiscreteStream::Activity => "mActivity",
            DiscreteStream::Ambience => "mAmbience",
            DiscreteStream::ScreenStatus => "mScreenStatus",
            DiscreteStream::AcStatus => "mACStatus",
        }
    }
}

/// Activity codes counted by aggregation, in discrete-grid row order.
pub const TRACKED_ACTIVITY_CODES: [i64; 4] = [0, 1, 3, 7];

/// Names of the nine discrete grid rows, in row order.
pub const DISCRETE_ROW_NAMES: [&str; N_DISCRETE] = [
    "activity_vehicle",
    "activity_bicycle",
    "activity_still",
    "activity_walking",
    "ambience_low",
    "ambience_medium",
    "ambience_high",
    "screen_on",
    "charging",
];

/// A stream item name resolved against the closed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamItem {
    Continuous(ContinuousChannel),
    Discrete(DiscreteStream),
}

impl StreamItem {
    /// Every valid item name, continuous first.
    pub fn all() -> impl Iterator<Item = StreamItem> {
        ContinuousChannel::ALL
            .iter()
            .map(|&c| StreamItem::Continuous(c))
            .chain(DiscreteStream::ALL.iter().map(|&d| StreamItem::Discrete(d)))
    }

    /// Resolve a raw item name; `None` if outside the vocabulary.
    pub fn parse(name: &str) -> Option<StreamItem> {
        StreamItem::all().find(|item| item.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamItem::Continuous(c) => c.item_name(),
            StreamItem::Discrete(d) => d.item_name(),
        }
    }
}

/// One timestamped sensor reading.
///
/// `item` is kept as the raw name so that records built from unvalidated
/// sources can still be inspected; [`validate_day_record`] reports names
/// outside the vocabulary instead of refusing to represent them.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub item: Box<str>,
    pub value: f64,
}

impl SensorReading {
    pub fn new(timestamp: i64, item: &str, value: f64) -> Self {
        SensorReading {
            timestamp,
            item: item.into(),
            value,
        }
    }

    pub fn stream_item(&self) -> Option<StreamItem> {
        StreamItem::parse(&self.item)
    }
}

/// All readings of one subject on one calendar day.
#[derive(Debug, Clone)]
pub struct DayRecord {
    pub subject_id: String,
    pub date: NaiveDate,
    /// Sorted by timestamp.
    pub readings: Vec<SensorReading>,
}

impl DayRecord {
    /// Epoch second at which this day starts (UTC midnight).
    pub fn day_start(&self) -> i64 {
        self.date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()
    }

    /// Stable identifier `subject:date` used in logit dumps and reports.
    pub fn day_id(&self) -> String {
        day_id(&self.subject_id, self.date)
    }
}

/// Canonical day identifier shared by checkpoints, logit files, and reports.
pub fn day_id(subject_id: &str, date: NaiveDate) -> String {
    format!("{subject_id}:{date}")
}

/// One invariant violation found in a [`DayRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownItem { item: String },
    TimestampOutsideDay { timestamp: i64 },
    NonFiniteValue { item: String, timestamp: i64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UnknownItem { item } => write!(f, "unknown channel {item:?}"),
            Violation::TimestampOutsideDay { timestamp } => {
                write!(f, "timestamp {timestamp} outside day")
            }
            Violation::NonFiniteValue { item, timestamp } => {
                write!(f, "non-finite value for {item} at {timestamp}")
            }
        }
    }
}

/// Check every record invariant; returns all violations, never mutates.
pub fn validate_day_record(record: &DayRecord) -> Vec<Violation> {
    let start = record.day_start();
    let end = start + 86_400;
    let mut violations = Vec::new();
    for reading in &record.readings {
        if reading.stream_item().is_none() {
            violations.push(Violation::UnknownItem {
                item: reading.item.to_string(),
            });
        }
        if reading.timestamp < start || reading.timestamp >= end {
            violations.push(Violation::TimestampOutsideDay {
                timestamp: reading.timestamp,
            });
        }
        if !reading.value.is_finite() {
            violations.push(Violation::NonFiniteValue {
                item: reading.item.to_string(),
                timestamp: reading.timestamp,
            });
        }
    }
    violations
}

/// Ground-truth classes for one day: Q1-Q3 and S2-S3 binary, S1 ternary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    pub q1: u8,
    pub q2: u8,
    pub q3: u8,
    pub s1: u8,
    pub s2: u8,
    pub s3: u8,
}

impl LabelVector {
    pub fn new(q1: u8, q2: u8, q3: u8, s1: u8, s2: u8, s3: u8) -> Result<Self> {
        let v = LabelVector { q1, q2, q3, s1, s2, s3 };
        for (head, &class) in v.classes().iter().enumerate() {
            if class >= HEAD_CLASSES[head] {
                return Err(Error::Data(format!(
                    "label {}={} out of range 0..{}",
                    HEAD_NAMES[head], class, HEAD_CLASSES[head]
                )));
            }
        }
        Ok(v)
    }

    /// Classes in head order.
    pub fn classes(&self) -> [usize; N_HEADS] {
        [
            self.q1 as usize,
            self.q2 as usize,
            self.q3 as usize,
            self.s1 as usize,
            self.s2 as usize,
            self.s3 as usize,
        ]
    }

    pub fn from_classes(classes: [usize; N_HEADS]) -> Result<Self> {
        LabelVector::new(
            classes[0] as u8,
            classes[1] as u8,
            classes[2] as u8,
            classes[3] as u8,
            classes[4] as u8,
            classes[5] as u8,
        )
    }
}

/// Preprocessed tensors for one day: 7x1440 continuous, 9x144 discrete.
#[derive(Debug, Clone)]
pub struct DayFeatureGrid {
    pub continuous: Array2<f32>,
    pub discrete: Array2<f32>,
    /// True where the continuous grid entry is backed by a raw reading in
    /// that minute (as opposed to interpolated or held).
    pub observed_mask: Array2<bool>,
}

impl DayFeatureGrid {
    /// Verify the shape and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        if self.continuous.dim() != (N_CONTINUOUS, MINUTES_PER_DAY) {
            return Err(Error::Shape(format!(
                "continuous grid is {:?}, want ({N_CONTINUOUS}, {MINUTES_PER_DAY})",
                self.continuous.dim()
            )));
        }
        if self.discrete.dim() != (N_DISCRETE, WINDOWS_PER_DAY) {
            return Err(Error::Shape(format!(
                "discrete grid is {:?}, want ({N_DISCRETE}, {WINDOWS_PER_DAY})",
                self.discrete.dim()
            )));
        }
        if self.observed_mask.dim() != self.continuous.dim() {
            return Err(Error::Shape("mask/continuous shape mismatch".into()));
        }
        if self.continuous.iter().any(|v| !v.is_finite())
            || self.discrete.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Data("non-finite grid entry".into()));
        }
        Ok(())
    }
}

/// How the channel rasters of one block are arranged into an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// One image channel per sensor channel.
    MultiChannel,
    /// One grayscale image; channel rasters stacked along the height axis.
    StackedVertical,
}

impl std::str::FromStr for Encoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi_channel" => Ok(Encoding::MultiChannel),
            "stacked_vertical" => Ok(Encoding::StackedVertical),
            other => Err(Error::Config(format!("unknown encoding {other:?}"))),
        }
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Encoding::MultiChannel => "multi_channel",
            Encoding::StackedVertical => "stacked_vertical",
        })
    }
}

/// Block segmentation and rasterization settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockConfig {
    /// Hours per block; must divide 24.
    pub n_hours: usize,
    /// Vertical value bins per channel raster.
    pub raster_height: usize,
    /// Raster range in standardized units; values outside are clamped.
    pub value_range: (f32, f32),
    pub encoding: Encoding,
    /// Route the nine discrete rows into the image instead of the 1-D
    /// branch (the "without discrete branch" variant).
    pub discrete_in_image: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            n_hours: 4,
            raster_height: 64,
            value_range: (-3.0, 3.0),
            encoding: Encoding::MultiChannel,
            discrete_in_image: false,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_hours == 0 || 24 % self.n_hours != 0 {
            return Err(Error::Config(format!(
                "n_hours {} must divide 24",
                self.n_hours
            )));
        }
        if self.raster_height < 2 {
            return Err(Error::Config("raster_height must be >= 2".into()));
        }
        if self.value_range.0 >= self.value_range.1 {
            return Err(Error::Config("value_range lo must be < hi".into()));
        }
        Ok(())
    }

    /// Blocks per day.
    pub fn blocks_per_day(&self) -> usize {
        24 / self.n_hours
    }

    /// Image width in pixels (one-minute columns).
    pub fn block_width(&self) -> usize {
        60 * self.n_hours
    }

    /// Discrete slice width (ten-minute columns).
    pub fn discrete_block_width(&self) -> usize {
        6 * self.n_hours
    }

    /// Channels rasterized into the image.
    pub fn image_channels(&self) -> usize {
        if self.discrete_in_image {
            N_CONTINUOUS + N_DISCRETE
        } else {
            N_CONTINUOUS
        }
    }
}

/// Raw per-head scores emitted by a model for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadLogits {
    pub q1: Vec<f32>,
    pub q2: Vec<f32>,
    pub q3: Vec<f32>,
    pub s1: Vec<f32>,
    pub s2: Vec<f32>,
    pub s3: Vec<f32>,
}

impl HeadLogits {
    /// Build from a flat 13-score vector in head order.
    pub fn from_flat(flat: &[f32]) -> Result<Self> {
        if flat.len() != TOTAL_LOGITS {
            return Err(Error::Shape(format!(
                "flat logits length {} != {TOTAL_LOGITS}",
                flat.len()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite logit".into()));
        }
        Ok(HeadLogits {
            q1: flat[0..2].to_vec(),
            q2: flat[2..4].to_vec(),
            q3: flat[4..6].to_vec(),
            s1: flat[6..9].to_vec(),
            s2: flat[9..11].to_vec(),
            s3: flat[11..13].to_vec(),
        })
    }

    /// Score slices in head order.
    pub fn heads(&self) -> [&[f32]; N_HEADS] {
        [&self.q1, &self.q2, &self.q3, &self.s1, &self.s2, &self.s3]
    }

    pub fn head(&self, head: usize) -> &[f32] {
        self.heads()[head]
    }

    pub fn to_flat(&self) -> Vec<f32> {
        self.heads().concat()
    }

    pub fn validate(&self) -> Result<()> {
        for (head, scores) in self.heads().iter().enumerate() {
            if scores.len() != HEAD_CLASSES[head] {
                return Err(Error::Shape(format!(
                    "head {} has {} scores, want {}",
                    HEAD_NAMES[head],
                    scores.len(),
                    HEAD_CLASSES[head]
                )));
            }
            if scores.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite score in head {}",
                    HEAD_NAMES[head]
                )));
            }
        }
        Ok(())
    }

    /// Per-head argmax with ties broken toward the lower class index.
    pub fn argmax_classes(&self) -> [usize; N_HEADS] {
        let mut classes = [0usize; N_HEADS];
        for (head, scores) in self.heads().iter().enumerate() {
            classes[head] = argmax_low(scores);
        }
        classes
    }
}

/// Index of the maximum score; first occurrence wins on ties.
pub fn argmax_low(scores: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Training-split statistics used to normalize day grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelStats {
    /// Per continuous channel, over observed entries of training days.
    pub mean: Vec<f32>,
    /// Population convention (divide by n); values below 1e-6 replaced by 1.
    pub std: Vec<f32>,
    /// Clip bounds in raw units, per continuous channel.
    pub clip_lo: Vec<f32>,
    pub clip_hi: Vec<f32>,
    /// Per discrete row, max count over training days (>= 1).
    pub discrete_max: Vec<f32>,
    /// Per discrete row mean/std, used only when discrete z-scoring is on.
    #[serde(default)]
    pub discrete_mean: Option<Vec<f32>>,
    #[serde(default)]
    pub discrete_std: Option<Vec<f32>>,
}

impl ChannelStats {
    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != N_CONTINUOUS
            || self.std.len() != N_CONTINUOUS
            || self.clip_lo.len() != N_CONTINUOUS
            || self.clip_hi.len() != N_CONTINUOUS
        {
            return Err(Error::Shape("channel stats must cover 7 channels".into()));
        }
        if self.discrete_max.len() != N_DISCRETE {
            return Err(Error::Shape("discrete max must cover 9 rows".into()));
        }
        if self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Data("non-positive channel std".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(readings: Vec<SensorReading>) -> DayRecord {
        DayRecord {
            subject_id: "u01".into(),
            date: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
            readings,
        }
    }

    #[test]
    fn vocabulary_has_eleven_items_and_sixteen_channels() {
        assert_eq!(StreamItem::all().count(), 11);
        assert_eq!(N_CONTINUOUS + N_DISCRETE, 16);
        assert!(StreamItem::parse("wHr").is_some());
        assert!(StreamItem::parse("mWifiCount").is_some());
        assert!(StreamItem::parse("wFoo").is_none());
    }

    #[test]
    fn valid_record_passes() {
        // noon reading on the record's own date
        let start = NaiveDate::from_ymd_opt(2025, 1, 1)
            .unwrap()
            .and_hms_opt(12, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        let rec = day(vec![SensorReading::new(start, "wHr", 72.0)]);
        assert!(validate_day_record(&rec).is_empty());
    }

    #[test]
    fn unknown_item_is_reported() {
        let rec = day(vec![SensorReading::new(1735689600, "wFoo", 1.0)]);
        let v = validate_day_record(&rec);
        assert_eq!(
            v,
            vec![Violation::UnknownItem {
                item: "wFoo".into()
            }]
        );
    }

    #[test]
    fn next_day_timestamp_is_reported() {
        let next_day = 1735689600 + 86_400;
        let rec = day(vec![SensorReading::new(next_day, "wHr", 70.0)]);
        let v = validate_day_record(&rec);
        assert!(matches!(v[0], Violation::TimestampOutsideDay { .. }));
    }

    #[test]
    fn non_finite_value_is_reported() {
        let rec = day(vec![SensorReading::new(1735689600, "wHr", f64::NAN)]);
        let v = validate_day_record(&rec);
        assert!(matches!(v[0], Violation::NonFiniteValue { .. }));
    }

    #[test]
    fn label_vector_rejects_s1_out_of_range() {
        assert!(LabelVector::new(0, 0, 0, 3, 0, 0).is_err());
        for s1 in 0..3 {
            assert!(LabelVector::new(0, 0, 0, s1, 0, 0).is_ok());
        }
        assert!(LabelVector::new(2, 0, 0, 0, 0, 0).is_err());
    }

    #[test]
    fn head_logits_validation_and_argmax() {
        let logits = HeadLogits::from_flat(&[
            0.1, 0.9, // q1 -> 1
            0.5, 0.5, // q2 tie -> 0
            1.0, -1.0, // q3 -> 0
            0.1, 0.9, 0.3, // s1 -> 1
            0.0, 1.0, // s2 -> 1
            2.0, 1.0, // s3 -> 0
        ])
        .unwrap();
        logits.validate().unwrap();
        assert_eq!(logits.argmax_classes(), [1, 0, 0, 1, 1, 0]);
        assert!(HeadLogits::from_flat(&[0.0; 12]).is_err());
    }

    #[test]
    fn head_logits_json_roundtrip_is_bit_exact() {
        let flat: Vec<f32> = (0..13)
            .map(|i| (i as f32 * 0.37 - 1.9).sin() * 1e3 + 0.1234567)
            .collect();
        let logits = HeadLogits::from_flat(&flat).unwrap();
        let json = serde_json::to_string(&logits).unwrap();
        let back: HeadLogits = serde_json::from_str(&json).unwrap();
        for (a, b) in logits.to_flat().iter().zip(back.to_flat().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn block_config_validation() {
        assert!(BlockConfig::default().validate().is_ok());
        let bad = BlockConfig {
            n_hours: 5,
            ..BlockConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BlockConfig {
            raster_height: 1,
            ..BlockConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BlockConfig {
            value_range: (3.0, -3.0),
            ..BlockConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn block_config_shape_helpers() {
        let cfg = BlockConfig::default();
        assert_eq!(cfg.blocks_per_day(), 6);
        assert_eq!(cfg.block_width(), 240);
        assert_eq!(cfg.discrete_block_width(), 24);
    }
}
