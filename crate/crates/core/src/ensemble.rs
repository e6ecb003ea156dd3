//! Soft voting, hard voting, and the confidence-gated UALRE ensemble.
//!
//! UALRE, per day and head: if the best model's logit margin clears its
//! fitted threshold, its argmax is taken as-is. Otherwise the other models
//! vote, each admitted only if its own margin clears its own threshold, and
//! the modal vote wins (ties fall back to the best model's argmax, then the
//! lowest class index). With no confident voter the best model's argmax is
//! used.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{argmax_low, HeadLogits, LabelVector, HEAD_NAMES, N_HEADS};

/// Which gap defines the confidence margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    /// Largest minus second-largest score (default).
    Top2,
    /// Largest minus third-largest score; heads with only two classes fall
    /// back to the top-two gap.
    Top3,
}

/// Margin of one score vector under the given kind.
pub fn logit_margin_kind(scores: &[f32], kind: MarginKind) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::Data(format!(
            "margin needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    let mut sorted: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let reference = match kind {
        MarginKind::Top2 => sorted[1],
        MarginKind::Top3 => sorted[2.min(sorted.len() - 1)],
    };
    Ok(sorted[0] - reference)
}

/// Top-two logit margin (the default confidence signal).
pub fn logit_margin(scores: &[f32]) -> Result<f64> {
    logit_margin_kind(scores, MarginKind::Top2)
}

/// Aligned per-model logits over one shared day list.
#[derive(Debug, Clone)]
pub struct EnsemblePool {
    pub model_ids: Vec<String>,
    pub day_ids: Vec<String>,
    /// `logits[model][day]`.
    pub logits: Vec<Vec<HeadLogits>>,
    /// Index of the best individual model.
    pub best_index: usize,
    /// `thresholds[model][head]`; fitted before UALRE runs.
    pub thresholds: Option<Vec<Vec<f64>>>,
    pub margin_kind: MarginKind,
}

impl EnsemblePool {
    /// Build from per-model logit lists. Day sets must coincide; order
    /// follows the first model's file.
    pub fn new(models: Vec<(String, Vec<(String, HeadLogits)>)>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Data("ensemble pool needs at least one model".into()));
        }
        let day_ids: Vec<String> = models[0].1.iter().map(|(d, _)| d.clone()).collect();
        let mut model_ids = Vec::with_capacity(models.len());
        let mut logits = Vec::with_capacity(models.len());
        for (model_id, days) in models {
            let map: BTreeMap<&str, &HeadLogits> =
                days.iter().map(|(d, l)| (d.as_str(), l)).collect();
            if map.len() != day_ids.len() {
                return Err(Error::Data(format!(
                    "model {model_id} covers {} days, expected {}",
                    map.len(),
                    day_ids.len()
                )));
            }
            let aligned: Vec<HeadLogits> = day_ids
                .iter()
                .map(|d| {
                    map.get(d.as_str()).map(|&l| l.clone()).ok_or_else(|| {
                        Error::Data(format!("model {model_id} is missing day {d}"))
                    })
                })
                .collect::<Result<_>>()?;
            for l in &aligned {
                l.validate()?;
            }
            model_ids.push(model_id);
            logits.push(aligned);
        }
        Ok(EnsemblePool {
            model_ids,
            day_ids,
            logits,
            best_index: 0,
            thresholds: None,
            margin_kind: MarginKind::Top2,
        })
    }

    pub fn n_models(&self) -> usize {
        self.logits.len()
    }

    pub fn n_days(&self) -> usize {
        self.day_ids.len()
    }

    /// Pick the best model by validation average macro-F1 (ties go to the
    /// lower model index).
    pub fn select_best(&mut self, labels: &[LabelVector]) -> Result<usize> {
        if labels.len() != self.n_days() {
            return Err(Error::Shape(format!(
                "{} labels for {} days",
                labels.len(),
                self.n_days()
            )));
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for (m, model_logits) in self.logits.iter().enumerate() {
            let preds: Vec<LabelVector> = model_logits
                .iter()
                .map(|l| crate::model::predict(l))
                .collect();
            let report = crate::evaluation::evaluate_predictions(&preds, labels)?;
            if report.average > best.1 {
                best = (m, report.average);
            }
        }
        self.best_index = best.0;
        Ok(best.0)
    }

    /// Fit per-model, per-head margin thresholds as the `q`-quantile of
    /// each model's margins over the pool days (linear interpolation
    /// between order statistics).
    pub fn fit_thresholds(&mut self, q: f64) -> Result<()> {
        if self.n_days() < 2 {
            return Err(Error::Data("threshold fit needs at least 2 days".into()));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Config(format!("quantile {q} outside [0, 1]")));
        }
        let mut thresholds = Vec::with_capacity(self.n_models());
        for model_logits in &self.logits {
            let mut per_head = Vec::with_capacity(N_HEADS);
            for head in 0..N_HEADS {
                let mut margins: Vec<f64> = model_logits
                    .iter()
                    .map(|l| logit_margin_kind(l.head(head), self.margin_kind))
                    .collect::<Result<_>>()?;
                margins.sort_by(|a, b| a.total_cmp(b));
                per_head.push(quantile_sorted(&margins, q));
            }
            thresholds.push(per_head);
        }
        self.thresholds = Some(thresholds);
        Ok(())
    }

    /// Per-day soft vote: argmax of the mean raw logits across models.
    pub fn soft_vote(&self) -> Vec<LabelVector> {
        (0..self.n_days())
            .map(|day| {
                let mut classes = [0usize; N_HEADS];
                for (head, class) in classes.iter_mut().enumerate() {
                    let k = self.logits[0][day].head(head).len();
                    let mut mean = vec![0.0f32; k];
                    for model_logits in &self.logits {
                        for (m, &v) in mean.iter_mut().zip(model_logits[day].head(head)) {
                            *m += v / self.n_models() as f32;
                        }
                    }
                    *class = argmax_low(&mean);
                }
                LabelVector::from_classes(classes).expect("argmax in range")
            })
            .collect()
    }

    /// Per-day hard vote: modal class of per-model argmaxes; ties resolve
    /// to the best model's vote, then the lowest class index.
    pub fn hard_vote(&self) -> Vec<LabelVector> {
        (0..self.n_days())
            .map(|day| {
                let mut classes = [0usize; N_HEADS];
                for (head, class) in classes.iter_mut().enumerate() {
                    let votes: Vec<usize> = self
                        .logits
                        .iter()
                        .map(|model_logits| argmax_low(model_logits[day].head(head)))
                        .collect();
                    *class = modal_vote(&votes, votes[self.best_index]);
                }
                LabelVector::from_classes(classes).expect("argmax in range")
            })
            .collect()
    }

    /// Per-day UALRE decision; requires fitted thresholds.
    pub fn ualre(&self) -> Result<Vec<LabelVector>> {
        let thresholds = self
            .thresholds
            .as_ref()
            .ok_or_else(|| Error::Config("UALRE thresholds not fitted".into()))?;
        let best = self.best_index;
        Ok((0..self.n_days())
            .map(|day| {
                let mut classes = [0usize; N_HEADS];
                for (head, class) in classes.iter_mut().enumerate() {
                    let best_scores = self.logits[best][day].head(head);
                    let best_argmax = argmax_low(best_scores);
                    let best_margin =
                        logit_margin_kind(best_scores, self.margin_kind).expect("head len >= 2");
                    if best_margin >= thresholds[best][head] {
                        *class = best_argmax; // step 1: confident best model
                        continue;
                    }
                    // step 2: hard vote among other models' confident predictions
                    let confident: Vec<usize> = (0..self.n_models())
                        .filter(|&m| m != best)
                        .filter(|&m| {
                            let scores = self.logits[m][day].head(head);
                            let margin = logit_margin_kind(scores, self.margin_kind)
                                .expect("head len >= 2");
                            margin >= thresholds[m][head]
                        })
                        .map(|m| argmax_low(self.logits[m][day].head(head)))
                        .collect();
                    *class = if confident.is_empty() {
                        best_argmax // step 3: fallback
                    } else {
                        modal_vote(&confident, best_argmax)
                    };
                }
                LabelVector::from_classes(classes).expect("argmax in range")
            })
            .collect())
    }
}

/// Modal class of `votes`; ties go to `preferred` when it is among the
/// tied classes, otherwise to the lowest tied class index.
fn modal_vote(votes: &[usize], preferred: usize) -> usize {
    let k = votes.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k.max(preferred + 1)];
    for &v in votes {
        counts[v] += 1;
    }
    let top = *counts.iter().max().unwrap();
    if counts[preferred] == top {
        return preferred;
    }
    counts.iter().position(|&c| c == top).unwrap()
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

// ── file formats ────────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct LogitRecord {
    day_id: String,
    model_id: String,
    q1: Vec<f32>,
    q2: Vec<f32>,
    q3: Vec<f32>,
    s1: Vec<f32>,
    s2: Vec<f32>,
    s3: Vec<f32>,
}

/// Write one model's logits as JSON lines.
pub fn write_logit_file(
    path: &Path,
    model_id: &str,
    days: &[(String, HeadLogits)],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (day_id, logits) in days {
        let record = LogitRecord {
            day_id: day_id.clone(),
            model_id: model_id.to_string(),
            q1: logits.q1.clone(),
            q2: logits.q2.clone(),
            q3: logits.q3.clone(),
            s1: logits.s1.clone(),
            s2: logits.s2.clone(),
            s3: logits.s3.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a logit file; returns (model_id, per-day logits).
pub fn read_logit_file(path: &Path) -> Result<(String, Vec<(String, HeadLogits)>)> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut model_id: Option<String> = None;
    let mut days = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogitRecord = serde_json::from_str(&line).map_err(|e| {
            Error::parse(path.display().to_string(), i + 1, e.to_string())
        })?;
        let logits = HeadLogits {
            q1: record.q1,
            q2: record.q2,
            q3: record.q3,
            s1: record.s1,
            s2: record.s2,
            s3: record.s3,
        };
        logits
            .validate()
            .map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
        match &model_id {
            None => model_id = Some(record.model_id),
            Some(id) if *id != record.model_id => {
                return Err(Error::parse(
                    path.display().to_string(),
                    i + 1,
                    format!("mixed model ids {id:?} and {:?}", record.model_id),
                ))
            }
            _ => {}
        }
        days.push((record.day_id, logits));
    }
    let model_id =
        model_id.ok_or_else(|| Error::Data(format!("{}: empty logit file", path.display())))?;
    Ok((model_id, days))
}

/// Threshold file: `{model_id: {head: tau}}`.
pub fn write_threshold_file(path: &Path, pool: &EnsemblePool) -> Result<()> {
    let thresholds = pool
        .thresholds
        .as_ref()
        .ok_or_else(|| Error::Config("thresholds not fitted".into()))?;
    let mut map = serde_json::Map::new();
    for (model_id, per_head) in pool.model_ids.iter().zip(thresholds.iter()) {
        let mut heads = serde_json::Map::new();
        for (head, &tau) in per_head.iter().enumerate() {
            heads.insert(HEAD_NAMES[head].to_string(), serde_json::json!(tau));
        }
        map.insert(model_id.clone(), serde_json::Value::Object(heads));
    }
    std::fs::write(path, serde_json::to_string_pretty(&serde_json::Value::Object(map))?)?;
    Ok(())
}

/// Read a threshold file back into `pool.thresholds` (model order follows
/// the pool).
pub fn read_threshold_file(path: &Path, pool: &mut EnsemblePool) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::Data("threshold file must be a JSON object".into()))?;
    let mut thresholds = Vec::with_capacity(pool.n_models());
    for model_id in &pool.model_ids {
        let heads = map
            .get(model_id)
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Data(format!("no thresholds for model {model_id}")))?;
        let mut per_head = Vec::with_capacity(N_HEADS);
        for name in HEAD_NAMES {
            let tau = heads
                .get(name)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Data(format!("missing threshold {model_id}/{name}")))?;
            per_head.push(tau);
        }
        thresholds.push(per_head);
    }
    pool.thresholds = Some(thresholds);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits_from(flat: [f32; 13]) -> HeadLogits {
        HeadLogits::from_flat(&flat).unwrap()
    }

    /// Pool where every head of every model carries the same two scores.
    fn uniform_pool(per_model: &[(f32, f32)]) -> EnsemblePool {
        uniform_pool_days(per_model, 1)
    }

    fn uniform_pool_days(per_model: &[(f32, f32)], days: usize) -> EnsemblePool {
        let models = per_model
            .iter()
            .enumerate()
            .map(|(m, &(a, b))| {
                let logits = logits_from([a, b, a, b, a, b, a, b, 0.0, a, b, a, b]);
                (
                    format!("m{m}"),
                    (0..days).map(|d| (format!("d{d}"), logits.clone())).collect(),
                )
            })
            .collect();
        EnsemblePool::new(models).unwrap()
    }

    #[test]
    fn margin_examples() {
        assert_eq!(logit_margin(&[2.0, 0.5]).unwrap(), 1.5);
        assert_eq!(logit_margin(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((logit_margin(&[0.2, 3.1, 2.9]).unwrap() - 0.2).abs() < 1e-6);
        assert!(logit_margin(&[1.0]).is_err());
        // top-3 variant falls back to top-2 for binary heads
        assert_eq!(
            logit_margin_kind(&[3.0, 1.0, 0.5], MarginKind::Top3).unwrap(),
            2.5
        );
        assert_eq!(logit_margin_kind(&[3.0, 1.0], MarginKind::Top3).unwrap(), 2.0);
    }

    #[test]
    fn quantile_interpolates_between_order_statistics() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        assert_eq!(quantile_sorted(&sorted, 0.0), 1.0);
        assert_eq!(quantile_sorted(&sorted, 1.0), 4.0);
    }

    #[test]
    fn fit_thresholds_median_of_margins() {
        // four days with margins 1, 2, 3, 4 on every binary head
        let days: Vec<(String, HeadLogits)> = (0..4)
            .map(|d| {
                let m = (d + 1) as f32;
                (
                    format!("d{d}"),
                    logits_from([m, 0.0, m, 0.0, m, 0.0, m, 0.0, -50.0, m, 0.0, m, 0.0]),
                )
            })
            .collect();
        let mut pool = EnsemblePool::new(vec![("m0".into(), days)]).unwrap();
        pool.fit_thresholds(0.5).unwrap();
        let t = pool.thresholds.as_ref().unwrap();
        assert_eq!(t[0][0], 2.5);
        pool.fit_thresholds(0.0).unwrap();
        assert_eq!(pool.thresholds.as_ref().unwrap()[0][0], 1.0);
        pool.fit_thresholds(1.0).unwrap();
        assert_eq!(pool.thresholds.as_ref().unwrap()[0][0], 4.0);
    }

    #[test]
    fn soft_vote_examples() {
        // single model: identical to its own argmax
        let pool = uniform_pool(&[(3.0, 0.0)]);
        assert_eq!(pool.soft_vote()[0].q1, 0);
        // opposite logits tie, class 0 wins
        let pool = uniform_pool(&[(1.0, 2.0), (2.0, 1.0)]);
        assert_eq!(pool.soft_vote()[0].q1, 0);
        // hand-averaged example: (3,0), (0,1), (0,1) -> mean (1, 2/3)
        let pool = uniform_pool(&[(3.0, 0.0), (0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(pool.soft_vote()[0].q1, 0);
    }

    #[test]
    fn hard_vote_examples() {
        let pool = uniform_pool(&[(1.0, 0.0), (0.0, 1.0), (0.0, 2.0)]);
        assert_eq!(pool.hard_vote()[0].q1, 1); // majority 1
        // two-way tie resolves to the best model's vote
        let pool = uniform_pool(&[(1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(pool.hard_vote()[0].q1, 0);
        // single model
        let pool = uniform_pool(&[(0.0, 5.0)]);
        assert_eq!(pool.hard_vote()[0].q1, 1);
    }

    #[test]
    fn ualre_step_examples() {
        // step 1: confident best model wins regardless of others
        let mut pool = uniform_pool(&[(3.0, 0.1), (0.0, 9.0), (0.0, 9.0)]);
        pool.thresholds = Some(vec![vec![1.0; N_HEADS]; 3]);
        assert_eq!(pool.ualre().unwrap()[0].q1, 0);

        // step 2: uncertain best, one confident other model votes 1,
        // one unconfident model excluded
        let models = vec![
            ("best".to_string(), vec![("d0".to_string(), logits_from([0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.0, 0.6, 0.4, 0.6, 0.4]))]),
            ("m2".to_string(), vec![("d0".to_string(), logits_from([0.1, 2.5, 0.1, 2.5, 0.1, 2.5, 0.1, 2.5, 0.0, 0.1, 2.5, 0.1, 2.5]))]),
            ("m3".to_string(), vec![("d0".to_string(), logits_from([0.2, 0.3, 0.2, 0.3, 0.2, 0.3, 0.2, 0.3, 0.0, 0.2, 0.3, 0.2, 0.3]))]),
        ];
        let mut pool = EnsemblePool::new(models).unwrap();
        pool.thresholds = Some(vec![vec![1.0; N_HEADS]; 3]);
        assert_eq!(pool.ualre().unwrap()[0].q1, 1);

        // step 3: nobody confident, fall back to the best model's argmax
        let mut pool = uniform_pool(&[(0.6, 0.4), (0.4, 0.6)]);
        pool.thresholds = Some(vec![vec![10.0; N_HEADS]; 2]);
        assert_eq!(pool.ualre().unwrap()[0].q1, 0);

        // unfitted thresholds are an error
        let pool = uniform_pool(&[(1.0, 0.0)]);
        assert!(pool.ualre().is_err());
    }

    #[test]
    fn single_model_pool_collapses_all_strategies() {
        let mut pool = uniform_pool_days(&[(0.2, 1.7)], 2);
        pool.fit_thresholds(0.5).unwrap();
        let s = pool.soft_vote();
        let h = pool.hard_vote();
        let u = pool.ualre().unwrap();
        let p = crate::model::predict(&pool.logits[0][0]);
        assert_eq!(s[0], p);
        assert_eq!(h[0], p);
        assert_eq!(u[0], p);
    }

    #[test]
    fn minus_infinity_threshold_pins_ualre_to_best_model() {
        let mut pool = uniform_pool(&[(0.5, 0.49), (9.0, 0.0), (0.0, 9.0)]);
        pool.best_index = 0;
        pool.thresholds = Some(vec![
            vec![f64::NEG_INFINITY; N_HEADS],
            vec![0.0; N_HEADS],
            vec![0.0; N_HEADS],
        ]);
        let u = pool.ualre().unwrap();
        let p = crate::model::predict(&pool.logits[0][0]);
        assert_eq!(u[0], p);
    }

    #[test]
    fn shifting_all_logits_of_a_head_changes_nothing() {
        // dyadic scores keep the f32 shift arithmetic exact
        let mut pool = uniform_pool_days(&[(0.75, 0.25), (0.125, 1.0), (1.5, 0.375)], 2);
        pool.fit_thresholds(0.5).unwrap();
        let (s, h, u) = (pool.soft_vote(), pool.hard_vote(), pool.ualre().unwrap());

        let mut shifted = pool.clone();
        for model_logits in &mut shifted.logits {
            for logits in model_logits.iter_mut() {
                for v in logits.q1.iter_mut() {
                    *v += 32.0;
                }
            }
        }
        shifted.fit_thresholds(0.5).unwrap();
        assert_eq!(
            shifted.thresholds.as_ref().unwrap(),
            pool.thresholds.as_ref().unwrap()
        );
        assert_eq!(shifted.soft_vote(), s);
        assert_eq!(shifted.hard_vote(), h);
        assert_eq!(shifted.ualre().unwrap(), u);
    }

    #[test]
    fn best_model_selection_by_macro_f1() {
        // model 1 matches the labels, model 0 is inverted
        let labels = vec![
            LabelVector::new(0, 0, 0, 0, 0, 0).unwrap(),
            LabelVector::new(1, 1, 1, 1, 1, 1).unwrap(),
        ];
        let right = |c: u8| {
            let v = c as f32;
            logits_from([
                1.0 - v, v, 1.0 - v, v, 1.0 - v, v, 1.0 - v, v, -9.0, 1.0 - v, v, 1.0 - v, v,
            ])
        };
        let wrong = |c: u8| right(1 - c);
        let models = vec![
            (
                "bad".to_string(),
                vec![
                    ("d0".to_string(), wrong(0)),
                    ("d1".to_string(), wrong(1)),
                ],
            ),
            (
                "good".to_string(),
                vec![
                    ("d0".to_string(), right(0)),
                    ("d1".to_string(), right(1)),
                ],
            ),
        ];
        let mut pool = EnsemblePool::new(models).unwrap();
        assert_eq!(pool.select_best(&labels).unwrap(), 1);
    }

    #[test]
    fn logit_and_threshold_files_roundtrip() {
        let days: Vec<(String, HeadLogits)> = (0..3)
            .map(|d| {
                (
                    format!("u01:2025-01-0{}", d + 1),
                    logits_from([
                        0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3,
                    ]),
                )
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m0.jsonl");
        write_logit_file(&path, "m0", &days).unwrap();
        let (model_id, back) = read_logit_file(&path).unwrap();
        assert_eq!(model_id, "m0");
        assert_eq!(back.len(), 3);
        for ((da, la), (db, lb)) in days.iter().zip(back.iter()) {
            assert_eq!(da, db);
            assert_eq!(la.to_flat(), lb.to_flat());
        }

        let mut pool = EnsemblePool::new(vec![("m0".to_string(), days)]).unwrap();
        pool.fit_thresholds(0.5).unwrap();
        let tpath = dir.path().join("tau.json");
        write_threshold_file(&tpath, &pool).unwrap();
        let saved = pool.thresholds.clone().unwrap();
        pool.thresholds = None;
        read_threshold_file(&tpath, &mut pool).unwrap();
        assert_eq!(pool.thresholds.unwrap(), saved);
    }

    #[test]
    fn mismatched_day_sets_are_rejected()  {
        let l = logits_from([0.0; 13]);
        let models = vec![
            ("a".to_string(), vec![("d0".to_string(), l.clone())]),
            ("b".to_string(), vec![("d1".to_string(), l)]),
        ];
        assert!(EnsemblePool::new(models).is_err());
    }
}
