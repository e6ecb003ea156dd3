//! Long-format CSV readers and writers for sensor streams and day labels.
//!
//! Sensor files: header `subject_id,timestamp,item,value`, one reading per
//! row, `timestamp` in integer epoch seconds (UTC). Label files: header
//! `subject_id,date,Q1,Q2,Q3,S1,S2,S3` with `date` as `YYYY-MM-DD`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate};

use crate::error::{Error, Result};
use crate::types::{DayRecord, LabelVector, SensorReading, StreamItem};

pub const SENSOR_HEADER: &str = "subject_id,timestamp,item,value";
pub const LABELS_HEADER: &str = "subject_id,date,Q1,Q2,Q3,S1,S2,S3";

/// Day records joined with their labels, ready for preprocessing.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub days: Vec<LabeledDay>,
    /// subject_id -> contiguous 0-based id, lexicographic by subject.
    pub subject_index: BTreeMap<String, usize>,
    /// Records that were dropped because no label row matched.
    pub dropped_unlabeled: usize,
}

#[derive(Debug, Clone)]
pub struct LabeledDay {
    pub record: DayRecord,
    pub label: LabelVector,
}

impl Dataset {
    pub fn subject_count(&self) -> usize {
        self.subject_index.len()
    }
}

fn utc_date_of(timestamp: i64) -> Result<NaiveDate> {
    DateTime::from_timestamp(timestamp, 0)
        .map(|dt| dt.date_naive())
        .ok_or_else(|| Error::Data(format!("timestamp {timestamp} out of range")))
}

/// Read a sensor CSV into one record per (subject, date), readings sorted by
/// timestamp. Groups are keyed on the reading's UTC calendar date.
pub fn parse_sensor_file(path: impl AsRef<Path>) -> Result<Vec<DayRecord>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    {
        let headers = reader.headers().map_err(|e| {
            Error::parse(&display, 1, format!("unreadable header: {e}"))
        })?;
        let expect: Vec<&str> = SENSOR_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::parse(
                &display,
                1,
                format!("header {:?} does not match {SENSOR_HEADER:?}", headers),
            ));
        }
    }

    let mut groups: BTreeMap<(String, NaiveDate), Vec<SensorReading>> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after header
        let row = row.map_err(|e| Error::parse(&display, line, e.to_string()))?;
        if row.len() != 4 {
            return Err(Error::parse(
                &display,
                line,
                format!("expected 4 fields, got {}", row.len()),
            ));
        }
        let subject = row[0].to_string();
        if subject.is_empty() {
            return Err(Error::parse(&display, line, "empty subject_id"));
        }
        let timestamp: i64 = row[1]
            .parse()
            .map_err(|_| Error::parse(&display, line, format!("bad timestamp {:?}", &row[1])))?;
        let item = &row[2];
        if StreamItem::parse(item).is_none() {
            return Err(Error::parse(
                &display,
                line,
                format!("unknown item {item:?}"),
            ));
        }
        let value: f64 = row[3]
            .parse()
            .map_err(|_| Error::parse(&display, line, format!("bad value {:?}", &row[3])))?;
        let date = utc_date_of(timestamp)?;
        groups
            .entry((subject, date))
            .or_default()
            .push(SensorReading::new(timestamp, item, value));
    }

    Ok(groups
        .into_iter()
        .map(|((subject_id, date), mut readings)| {
            readings.sort_by_key(|r| r.timestamp);
            DayRecord {
                subject_id,
                date,
                readings,
            }
        })
        .collect())
}

/// Read a labels CSV into a (subject, date) -> label map.
pub fn parse_labels_file(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<(String, NaiveDate), LabelVector>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    {
        let headers = reader.headers().map_err(|e| {
            Error::parse(&display, 1, format!("unreadable header: {e}"))
        })?;
        let expect: Vec<&str> = LABELS_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::parse(
                &display,
                1,
                format!("header {:?} does not match {LABELS_HEADER:?}", headers),
            ));
        }
    }

    let mut labels = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(&display, line, e.to_string()))?;
        if row.len() != 8 {
            return Err(Error::parse(
                &display,
                line,
                format!("expected 8 fields, got {}", row.len()),
            ));
        }
        let subject = row[0].to_string();
        let date = NaiveDate::parse_from_str(&row[1], "%Y-%m-%d")
            .map_err(|_| Error::parse(&display, line, format!("bad date {:?}", &row[1])))?;
        let mut classes = [0u8; 6];
        for (j, class) in classes.iter_mut().enumerate() {
            *class = row[2 + j].parse().map_err(|_| {
                Error::parse(&display, line, format!("bad class value {:?}", &row[2 + j]))
            })?;
        }
        let label = LabelVector::new(
            classes[0], classes[1], classes[2], classes[3], classes[4], classes[5],
        )
        .map_err(|e| Error::parse(&display, line, e.to_string()))?;
        let key = (subject, date);
        if labels.contains_key(&key) {
            return Err(Error::parse(
                &display,
                line,
                format!("duplicate label row for {}:{}", key.0, key.1),
            ));
        }
        labels.insert(key, label);
    }
    Ok(labels)
}

/// Join records with labels. Days without a label are dropped and counted;
/// the subject index covers the retained days, 0-based in lexicographic
/// subject order.
pub fn build_dataset(
    records: Vec<DayRecord>,
    labels: &BTreeMap<(String, NaiveDate), LabelVector>,
) -> Dataset {
    let mut days = Vec::new();
    let mut dropped = 0usize;
    for record in records {
        let key = (record.subject_id.clone(), record.date);
        match labels.get(&key) {
            Some(&label) => days.push(LabeledDay { record, label }),
            None => dropped += 1,
        }
    }
    days.sort_by(|a, b| {
        (&a.record.subject_id, a.record.date).cmp(&(&b.record.subject_id, b.record.date))
    });
    let mut subject_index = BTreeMap::new();
    for day in &days {
        let next = subject_index.len();
        subject_index
            .entry(day.record.subject_id.clone())
            .or_insert(next);
    }
    Dataset {
        days,
        subject_index,
        dropped_unlabeled: dropped,
    }
}

/// Write sensor rows in the canonical format; inverse of [`parse_sensor_file`].
pub fn write_sensor_csv(
    out: &mut impl Write,
    rows: impl IntoIterator<Item = (String, i64, &'static str, f64)>,
) -> Result<()> {
    writeln!(out, "{SENSOR_HEADER}")?;
    for (subject, timestamp, item, value) in rows {
        writeln!(out, "{subject},{timestamp},{item},{value:.3}")?;
    }
    Ok(())
}

/// Write label rows in the canonical format; inverse of [`parse_labels_file`].
pub fn write_labels_csv(
    out: &mut impl Write,
    rows: impl IntoIterator<Item = (String, NaiveDate, LabelVector)>,
) -> Result<()> {
    writeln!(out, "{LABELS_HEADER}")?;
    for (subject, date, label) in rows {
        writeln!(
            out,
            "{subject},{date},{},{},{},{},{},{}",
            label.q1, label.q2, label.q3, label.s1, label.s2, label.s3
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn single_row_maps_to_one_record() {
        let f = write_temp("subject_id,timestamp,item,value\nu01,1735689600,wHr,72.0\n");
        let records = parse_sensor_file(f.path()).unwrap();
        assert_eq!(records.len(), 1);
        let rec = &records[0];
        assert_eq!(rec.subject_id, "u01");
        assert_eq!(rec.date, NaiveDate::from_ymd_opt(2025, 1, 1).unwrap());
        assert_eq!(rec.readings.len(), 1);
        assert_eq!(&*rec.readings[0].item, "wHr");
        assert_eq!(rec.readings[0].value, 72.0);
    }

    #[test]
    fn header_only_file_yields_empty_collection() {
        let f = write_temp("subject_id,timestamp,item,value\n");
        assert!(parse_sensor_file(f.path()).unwrap().is_empty());
    }

    #[test]
    fn same_day_rows_group_into_one_record() {
        let f = write_temp(
            "subject_id,timestamp,item,value\n\
             u01,1735693200,wLight,15.0\n\
             u01,1735689600,wHr,72.0\n",
        );
        let records = parse_sensor_file(f.path()).unwrap();
        assert_eq!(records.len(), 1);
        // sorted by timestamp even though rows arrived reversed
        assert_eq!(&*records[0].readings[0].item, "wHr");
        assert_eq!(&*records[0].readings[1].item, "wLight");
    }

    #[test]
    fn unknown_item_errors_with_item_name() {
        let f = write_temp("subject_id,timestamp,item,value\nu01,1735689600,wFoo,1.0\n");
        let err = parse_sensor_file(f.path()).unwrap_err().to_string();
        assert!(err.contains("wFoo"), "{err}");
        assert!(err.contains(":2:"), "line number missing: {err}");
    }

    #[test]
    fn malformed_row_errors_with_line_number() {
        let f = write_temp("subject_id,timestamp,item,value\nu01,notatime,wHr,1.0\n");
        let err = parse_sensor_file(f.path()).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn labels_row_maps_directly() {
        let f = write_temp("subject_id,date,Q1,Q2,Q3,S1,S2,S3\nu01,2025-01-01,1,0,1,2,1,0\n");
        let labels = parse_labels_file(f.path()).unwrap();
        let key = ("u01".to_string(), NaiveDate::from_ymd_opt(2025, 1, 1).unwrap());
        assert_eq!(
            labels[&key],
            LabelVector::new(1, 0, 1, 2, 1, 0).unwrap()
        );
    }

    #[test]
    fn labels_s1_out_of_range_errors() {
        let f = write_temp("subject_id,date,Q1,Q2,Q3,S1,S2,S3\nu01,2025-01-01,0,0,0,3,0,0\n");
        assert!(parse_labels_file(f.path()).is_err());
    }

    #[test]
    fn duplicate_label_key_errors() {
        let f = write_temp(
            "subject_id,date,Q1,Q2,Q3,S1,S2,S3\n\
             u01,2025-01-01,0,0,0,0,0,0\n\
             u01,2025-01-01,1,1,1,1,1,1\n",
        );
        let err = parse_labels_file(f.path()).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    fn record(subject: &str, date: (i32, u32, u32)) -> DayRecord {
        DayRecord {
            subject_id: subject.into(),
            date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            readings: vec![],
        }
    }

    #[test]
    fn build_dataset_counts_and_indexes() {
        let mut labels = BTreeMap::new();
        for subject in ["b", "a"] {
            for d in 1..=3 {
                labels.insert(
                    (subject.to_string(), NaiveDate::from_ymd_opt(2025, 1, d).unwrap()),
                    LabelVector::new(0, 0, 0, 0, 0, 0).unwrap(),
                );
            }
        }
        let records: Vec<DayRecord> = ["b", "a"]
            .iter()
            .flat_map(|s| (1..=3).map(move |d| record(s, (2025, 1, d))))
            .collect();
        let ds = build_dataset(records, &labels);
        assert_eq!(ds.days.len(), 6);
        assert_eq!(ds.subject_index["a"], 0);
        assert_eq!(ds.subject_index["b"], 1);
        assert_eq!(ds.dropped_unlabeled, 0);
    }

    #[test]
    fn unlabeled_record_is_dropped_with_count() {
        let labels = BTreeMap::new();
        let ds = build_dataset(vec![record("a", (2025, 1, 1))], &labels);
        assert!(ds.days.is_empty());
        assert_eq!(ds.dropped_unlabeled, 1);
    }

    #[test]
    fn empty_inputs_give_empty_dataset() {
        let ds = build_dataset(vec![], &BTreeMap::new());
        assert!(ds.days.is_empty());
        assert!(ds.subject_index.is_empty());
    }

    #[test]
    fn sensor_roundtrip_is_identity() {
        let content = "subject_id,timestamp,item,value\n\
                       u01,1735689600,wHr,72.000\n\
                       u01,1735689660,wHr,73.500\n\
                       u02,1735689600,mGps,10.250\n";
        let f = write_temp(content);
        let records = parse_sensor_file(f.path()).unwrap();
        let mut buf = Vec::new();
        let rows = records.iter().flat_map(|r| {
            r.readings.iter().map(|reading| {
                (
                    r.subject_id.clone(),
                    reading.timestamp,
                    StreamItem::parse(&reading.item).unwrap().name(),
                    reading.value,
                )
            })
        });
        write_sensor_csv(&mut buf, rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), content);
    }
}
