//! Subject-stratified splitting, macro-F1, and metric reports.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{LabelVector, HEAD_CLASSES, HEAD_NAMES, N_HEADS};

/// Split day indices 80/20 (by `ratio`) inside every subject.
///
/// Per subject the day list is shuffled with a seeded RNG, `round(ratio*n)`
/// days (clamped so both sides stay non-empty) go to train and the rest to
/// validation; both returned index lists are ascending, which keeps days
/// chronological within each subject when the input is date-sorted.
pub fn stratified_subject_split(
    days: &[(&str, NaiveDate)],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&ratio) || ratio == 0.0 {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (subject, _)) in days.iter().enumerate() {
        by_subject.entry(subject).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (subject, mut ids) in by_subject {
        if ids.len() < 2 {
            return Err(Error::Data(format!(
                "subject {subject} has {} day(s); need at least 2 to split",
                ids.len()
            )));
        }
        // sort by date for a stable base order, then seeded shuffle
        ids.sort_by_key(|&i| days[i].1);
        let mut rng = subject_rng(seed, subject);
        use rand::Rng;
        for i in (1..ids.len()).rev() {
            let j = rng.gen_range(0..=i);
            ids.swap(i, j);
        }
        let k = ((ratio * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
        train.extend_from_slice(&ids[..k]);
        val.extend_from_slice(&ids[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

fn subject_rng(seed: u64, subject: &str) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut h = seed ^ 0x73706c6974; // domain constant
    for b in subject.bytes() {
        h = h.wrapping_mul(0x100000001b3).wrapping_add(b as u64);
    }
    rand_chacha::ChaCha8Rng::seed_from_u64(h)
}

/// Unweighted mean of per-class F1. A class absent from both predictions
/// and labels contributes F1 = 0.
pub fn macro_f1(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Data("macro_f1 on empty input".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if n_classes < 2 {
        return Err(Error::Config("n_classes must be >= 2".into()));
    }
    let confusion = confusion_matrix(predictions, labels, n_classes)?;
    let mut sum = 0.0;
    for c in 0..n_classes {
        let tp = confusion[c][c] as f64;
        let fp: f64 = (0..n_classes)
            .filter(|&l| l != c)
            .map(|l| confusion[c][l] as f64)
            .sum();
        let fn_: f64 = (0..n_classes)
            .filter(|&p| p != c)
            .map(|p| confusion[p][c] as f64)
            .sum();
        let denom = 2.0 * tp + fp + fn_;
        sum += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    Ok(sum / n_classes as f64)
}

/// Counts indexed `[predicted][actual]`.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &l) in predictions.iter().zip(labels.iter()) {
        if p >= n_classes || l >= n_classes {
            return Err(Error::Data(format!(
                "class {} outside 0..{n_classes}",
                p.max(l)
            )));
        }
        m[p][l] += 1;
    }
    Ok(m)
}

/// Per-head scores for one evaluation pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeadReport {
    pub name: String,
    pub macro_f1: f64,
    /// `[predicted][actual]` counts.
    pub confusion: Vec<Vec<usize>>,
}

/// Six head reports plus their arithmetic mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub heads: Vec<HeadReport>,
    pub average: f64,
}

/// Score predicted label vectors against ground truth.
pub fn evaluate_predictions(
    predictions: &[LabelVector],
    labels: &[LabelVector],
) -> Result<MetricReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut heads = Vec::with_capacity(N_HEADS);
    for head in 0..N_HEADS {
        let p: Vec<usize> = predictions.iter().map(|v| v.classes()[head]).collect();
        let l: Vec<usize> = labels.iter().map(|v| v.classes()[head]).collect();
        heads.push(HeadReport {
            name: HEAD_NAMES[head].to_string(),
            macro_f1: macro_f1(&p, &l, HEAD_CLASSES[head])?,
            confusion: confusion_matrix(&p, &l, HEAD_CLASSES[head])?,
        });
    }
    let average = heads.iter().map(|h| h.macro_f1).sum::<f64>() / N_HEADS as f64;
    Ok(MetricReport { heads, average })
}

/// Three-decimal display; decimal half-ties round up to match the
/// conventional table rounding of reported scores.
pub fn format_f3(v: f64) -> String {
    format!("{:.3}", v + 5e-10)
}

impl MetricReport {
    /// Aligned plain-text table: one row of per-head scores plus Avg.
    pub fn render_table(&self, row_label: &str) -> String {
        let mut header = format!("{:<16}", "model");
        let mut row = format!("{row_label:<16}");
        for h in &self.heads {
            header.push_str(&format!("{:>8}", h.name.to_uppercase()));
            row.push_str(&format!("{:>8}", format_f3(h.macro_f1)));
        }
        header.push_str(&format!("{:>8}", "Avg"));
        row.push_str(&format!("{:>8}", format_f3(self.average)));
        format!("{header}\n{row}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let p = vec![0, 1, 0, 1];
        assert_eq!(macro_f1(&p, &p, 2).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_binary_scores_one_third() {
        let labels = vec![0, 0, 1, 1];
        let preds = vec![0, 0, 0, 0];
        let f1 = macro_f1(&preds, &labels, 2).unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_contributes_zero() {
        // ternary, class 2 never appears, others perfect -> (1 + 1 + 0) / 3
        let labels = vec![0, 0, 1, 1];
        let preds = vec![0, 0, 1, 1];
        let f1 = macro_f1(&preds, &labels, 3).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        assert!(macro_f1(&[], &[], 2).is_err());
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
        assert!(macro_f1(&[2], &[0], 2).is_err());
    }

    #[test]
    fn joint_permutation_invariance() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let base = macro_f1(&preds, &labels, 3).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let p2: Vec<usize> = order.iter().map(|&i| preds[i]).collect();
            let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            assert_eq!(base, macro_f1(&p2, &l2, 3).unwrap());
        }
    }

    fn day_list(spec: &[(&'static str, usize)]) -> Vec<(&'static str, NaiveDate)> {
        let mut out = Vec::new();
        for &(subject, n) in spec {
            for d in 0..n {
                out.push((
                    subject,
                    NaiveDate::from_ymd_opt(2025, 1, 1).unwrap() + chrono::Days::new(d as u64),
                ));
            }
        }
        out
    }

    #[test]
    fn split_ratios_per_subject() {
        let days = day_list(&[("a", 50), ("b", 50)]);
        let (train, val) = stratified_subject_split(&days, 0.8, 7).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(val.len(), 20);
        // per subject exactly 40/10
        let a_train = train.iter().filter(|&&i| days[i].0 == "a").count();
        assert_eq!(a_train, 40);

        let days = day_list(&[("a", 5), ("b", 5)]);
        let (train, val) = stratified_subject_split(&days, 0.8, 7).unwrap();
        assert_eq!(train.len(), 8); // 4 per subject
        assert_eq!(val.len(), 2);
    }

    #[test]
    fn split_is_deterministic_and_a_partition() {
        let days = day_list(&[("a", 13), ("b", 9), ("c", 4)]);
        let (t1, v1) = stratified_subject_split(&days, 0.8, 3).unwrap();
        let (t2, v2) = stratified_subject_split(&days, 0.8, 3).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        let mut all: Vec<usize> = t1.iter().chain(v1.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..days.len()).collect::<Vec<_>>());
        // every subject on both sides
        for side in [&t1, &v1] {
            for subject in ["a", "b", "c"] {
                assert!(side.iter().any(|&i| days[i].0 == subject));
            }
        }
        // different seed, different assignment (with overwhelming likelihood)
        let (t3, _) = stratified_subject_split(&days, 0.8, 4).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn single_day_subject_is_rejected() {
        let days = day_list(&[("a", 1), ("b", 5)]);
        assert!(stratified_subject_split(&days, 0.8, 1).is_err());
    }

    #[test]
    fn report_average_and_rounding_match_reference_row() {
        let scores = [0.625, 0.626, 0.618, 0.486, 0.650, 0.682];
        let heads: Vec<HeadReport> = HEAD_NAMES
            .iter()
            .zip(scores.iter())
            .map(|(name, &f1)| HeadReport {
                name: name.to_string(),
                macro_f1: f1,
                confusion: vec![],
            })
            .collect();
        let average = scores.iter().sum::<f64>() / 6.0;
        let report = MetricReport { heads, average };
        assert_eq!(format_f3(report.average), "0.615");
        let table = report.render_table("main");
        assert!(table.contains("0.615"), "{table}");
        assert!(table.contains("Avg"), "{table}");
    }

    #[test]
    fn evaluate_predictions_composes_heads() {
        let labels = vec![
            LabelVector::new(0, 0, 0, 0, 0, 0).unwrap(),
            LabelVector::new(1, 1, 1, 1, 1, 1).unwrap(),
            LabelVector::new(0, 1, 0, 2, 1, 0).unwrap(),
        ];
        let report = evaluate_predictions(&labels, &labels).unwrap();
        assert!((report.average - 1.0).abs() < 1e-12);
        // five heads perfect, one wrong everywhere
        let mut preds = labels.clone();
        for p in &mut preds {
            p.s3 = 1 - p.s3;
        }
        let report = evaluate_predictions(&preds, &labels).unwrap();
        assert!((report.average - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(report.heads[5].macro_f1, 0.0);
    }
}
