//! Regression, binary and multiclass evaluation metrics.
//!
//! The single-metric functions return errors for undefined cases; reports
//! keep going and record the metric as undefined instead.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compose::TaskKind;
use crate::error::{Error, Result};

pub const REGRESSION_METRICS: [&str; 6] = ["MSE", "RMSE", "MAE", "R2", "PCC", "Spearman"];
pub const BINARY_METRICS: [&str; 9] = [
    "ROC-AUC",
    "PR-AUC",
    "Range LogAUC",
    "Accuracy",
    "Precision",
    "Recall",
    "F1",
    "Precision@Recall",
    "Recall@Precision",
];
pub const MULTICLASS_METRICS: [&str; 6] = [
    "Micro-F1",
    "Micro-Precision",
    "Micro-Recall",
    "Accuracy",
    "Macro-F1",
    "Cohen's Kappa",
];

pub fn metric_names(task: &TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Regression => &REGRESSION_METRICS,
        TaskKind::Binary => &BINARY_METRICS,
        TaskKind::Multiclass { .. } => &MULTICLASS_METRICS,
    }
}

fn normalized(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '@')
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Canonical spelling of `name` for `task`; matching ignores case, spaces,
/// dashes and underscores.
pub fn resolve(task: &TaskKind, name: &str) -> Result<&'static str> {
    let key = normalized(name);
    let key = match key.as_str() {
        "r²" | "rsquared" => "r2".to_string(),
        "auroc" | "rocauc" | "auc" => "rocauc".to_string(),
        "auprc" | "prauc" | "averageprecision" => "prauc".to_string(),
        "logauc" => "rangelogauc".to_string(),
        "kappa" | "cohenkappa" | "cohenskappa" => "cohenskappa".to_string(),
        _ => key,
    };
    metric_names(task)
        .iter()
        .find(|m| normalized(m) == key)
        .copied()
        .ok_or_else(|| Error::UnknownMetric(name.to_string()))
}

/// Whether larger values are better; only error metrics are minimized.
pub fn higher_is_better(name: &str) -> bool {
    !matches!(name, "MSE" | "RMSE" | "MAE")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinaryOptions {
    pub threshold: f64,
    /// Target level for the precision@recall and recall@precision metrics.
    pub k: f64,
    pub log_auc_range: (f64, f64),
}

impl Default for BinaryOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            k: 0.9,
            log_auc_range: (0.001, 0.1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_rate: Option<f64>,
    /// `None` marks an undefined metric (e.g. AUC with one class present).
    pub metrics: BTreeMap<String, Option<f64>>,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in &self.metrics {
            let v = v.map_or_else(|| "undefined".to_string(), |x| format!("{x}"));
            out.push_str(&format!("\"{k}\",{v}\n"));
        }
        out
    }

    /// Write `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()? + "\n").map_err(|e| Error::io(&json, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        Ok(())
    }
}

fn check_lengths(a: usize, b: usize, min: usize) -> Result<()> {
    if a != b {
        return Err(Error::Invalid(format!("{a} predictions for {b} labels")));
    }
    if a < min {
        return Err(Error::Invalid(format!("need at least {min} samples, got {a}")));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn mse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), labels.len(), 1)?;
    Ok(preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / preds.len() as f64)
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), labels.len(), 1)?;
    Ok(preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn r2(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), labels.len(), 2)?;
    let m = mean(labels);
    let ss_tot: f64 = labels.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateInput("R2 is undefined for constant labels".into()));
    }
    let ss_res: f64 = preds.iter().zip(labels).map(|(p, y)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn pcc(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), labels.len(), 2)?;
    let (mp, ml) = (mean(preds), mean(labels));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (p, y) in preds.iter().zip(labels) {
        sxy += (p - mp) * (y - ml);
        sxx += (p - mp).powi(2);
        syy += (y - ml).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation is undefined for constant predictions or labels".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), labels.len(), 2)?;
    pcc(&average_ranks(preds), &average_ranks(labels))
}

fn check_binary(scores: &[f64], labels: &[f64]) -> Result<(usize, usize)> {
    check_lengths(scores.len(), labels.len(), 1)?;
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Invalid(format!("binary label {bad} is not 0 or 1")));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("score {bad} is not finite")));
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve from the rank-sum statistic, ties counted half.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1.0).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Confusion counts at each distinct score threshold, highest first:
/// `(threshold, tp, fp)` predicting positive when `score >= threshold`.
fn threshold_counts(scores: &[f64], labels: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in idx.iter().enumerate() {
        if labels[i] == 1.0 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = idx.get(pos + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

/// Area under the precision-recall curve by step integration over the
/// distinct thresholds (average precision).
pub fn pr_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (_, tp, fp) in threshold_counts(scores, labels) {
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// ROC curve points `(fpr, tpr)` from (0, 0) to (1, 1).
fn roc_points(scores: &[f64], labels: &[f64], pos: usize, neg: usize) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(
        threshold_counts(scores, labels)
            .into_iter()
            .map(|(_, tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)),
    );
    pts
}

/// Normalized area under TPR against log10 FPR over `range`, with the ROC
/// curve linearly interpolated in FPR.
pub fn range_log_auc(scores: &[f64], labels: &[f64], range: (f64, f64)) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi <= 1.0) {
        return Err(Error::Invalid(format!("log AUC range {range:?} must satisfy 0 < lo < hi <= 1")));
    }
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let pts = roc_points(scores, labels, pos, neg);
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let (a, b) = (x0.max(lo), x1.min(hi));
        if b <= a {
            continue;
        }
        let slope = (y1 - y0) / (x1 - x0);
        let intercept = y0 - slope * x0;
        // integral of (intercept + slope x) d ln x over [a, b]
        area += intercept * (b / a).ln() + slope * (b - a);
    }
    Ok(area / (hi / lo).ln())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn at(scores: &[f64], labels: &[f64], threshold: f64) -> Result<Self> {
        check_binary(scores, labels)?;
        let mut c = Confusion {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y == 1.0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64
    }

    /// Zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Best precision over thresholds whose recall reaches `k`.
pub fn precision_at_recall(scores: &[f64], labels: &[f64], k: f64) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::SingleClass);
    }
    Ok(threshold_counts(scores, labels)
        .into_iter()
        .filter(|&(_, tp, _)| tp as f64 / pos as f64 >= k)
        .map(|(_, tp, fp)| ratio(tp, tp + fp))
        .fold(0.0, f64::max))
}

/// Best recall over thresholds whose precision reaches `k`; zero if none does.
pub fn recall_at_precision(scores: &[f64], labels: &[f64], k: f64) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::SingleClass);
    }
    Ok(threshold_counts(scores, labels)
        .into_iter()
        .filter(|&(_, tp, fp)| ratio(tp, tp + fp) >= k)
        .map(|(_, tp, _)| tp as f64 / pos as f64)
        .fold(0.0, f64::max))
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass | Error::DegenerateInput(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> Result<MetricReport> {
    check_lengths(preds.len(), labels.len(), 2)?;
    let m = mse(preds, labels)?;
    let metrics = BTreeMap::from([
        ("MSE".to_string(), Some(m)),
        ("RMSE".to_string(), Some(m.sqrt())),
        ("MAE".to_string(), Some(mae(preds, labels)?)),
        ("R2".to_string(), defined(r2(preds, labels))?),
        ("PCC".to_string(), defined(pcc(preds, labels))?),
        ("Spearman".to_string(), defined(spearman(preds, labels))?),
    ]);
    Ok(MetricReport {
        task: "regression".into(),
        n_samples: preds.len(),
        positive_rate: None,
        metrics,
    })
}

pub fn binary_metrics(scores: &[f64], labels: &[f64], opts: &BinaryOptions) -> Result<MetricReport> {
    let (pos, _) = check_binary(scores, labels)?;
    let c = Confusion::at(scores, labels, opts.threshold)?;
    let metrics = BTreeMap::from([
        ("ROC-AUC".to_string(), defined(roc_auc(scores, labels))?),
        ("PR-AUC".to_string(), defined(pr_auc(scores, labels))?),
        (
            "Range LogAUC".to_string(),
            defined(range_log_auc(scores, labels, opts.log_auc_range))?,
        ),
        ("Accuracy".to_string(), Some(c.accuracy())),
        ("Precision".to_string(), Some(c.precision())),
        ("Recall".to_string(), Some(c.recall())),
        ("F1".to_string(), Some(c.f1())),
        (
            "Precision@Recall".to_string(),
            defined(precision_at_recall(scores, labels, opts.k))?,
        ),
        (
            "Recall@Precision".to_string(),
            defined(recall_at_precision(scores, labels, opts.k))?,
        ),
    ]);
    Ok(MetricReport {
        task: "binary".into(),
        n_samples: scores.len(),
        positive_rate: Some(pos as f64 / scores.len() as f64),
        metrics,
    })
}

/// `k x k` counts, rows are true classes and columns predictions.
pub fn confusion_matrix(preds: &[usize], labels: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(preds.len(), labels.len(), 1)?;
    let mut m = vec![vec![0; k]; k];
    for (&p, &y) in preds.iter().zip(labels) {
        if p >= k || y >= k {
            return Err(Error::Invalid(format!("class {} outside [0, {k})", p.max(y))));
        }
        m[y][p] += 1;
    }
    Ok(m)
}

pub fn multiclass_metrics(preds: &[usize], labels: &[usize], k: usize) -> Result<MetricReport> {
    let m = confusion_matrix(preds, labels, k)?;
    let n = preds.len() as f64;
    let correct: usize = (0..k).map(|c| m[c][c]).sum();
    let accuracy = correct as f64 / n;
    // single-label: micro precision, recall and F1 all equal accuracy
    let macro_f1 = (0..k)
        .map(|c| {
            let tp = m[c][c];
            let predicted: usize = (0..k).map(|r| m[r][c]).sum();
            let actual: usize = m[c].iter().sum();
            ratio(2 * tp, predicted + actual)
        })
        .sum::<f64>()
        / k as f64;
    let expected: f64 = (0..k)
        .map(|c| {
            let predicted: usize = (0..k).map(|r| m[r][c]).sum();
            let actual: usize = m[c].iter().sum();
            predicted as f64 * actual as f64
        })
        .sum::<f64>()
        / (n * n);
    let kappa = if (1.0 - expected).abs() < 1e-15 {
        1.0
    } else {
        (accuracy - expected) / (1.0 - expected)
    };
    let metrics = BTreeMap::from([
        ("Micro-F1".to_string(), Some(accuracy)),
        ("Micro-Precision".to_string(), Some(accuracy)),
        ("Micro-Recall".to_string(), Some(accuracy)),
        ("Accuracy".to_string(), Some(accuracy)),
        ("Macro-F1".to_string(), Some(macro_f1)),
        ("Cohen's Kappa".to_string(), Some(kappa)),
    ]);
    Ok(MetricReport {
        task: "multiclass".into(),
        n_samples: preds.len(),
        positive_rate: None,
        metrics,
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Report for model outputs (`scores`, one row per sample as produced by
/// prediction) restricted to `names`.
pub fn evaluate(
    task: &TaskKind,
    scores: &[Vec<f64>],
    labels: &[f64],
    names: &[String],
    opts: &BinaryOptions,
) -> Result<MetricReport> {
    if names.is_empty() {
        return Err(Error::Invalid("no metrics requested".into()));
    }
    let wanted: Vec<&str> = names.iter().map(|n| resolve(task, n)).collect::<Result<_>>()?;
    let mut report = match task {
        TaskKind::Regression => {
            let p: Vec<f64> = scores.iter().map(|r| r[0]).collect();
            regression_metrics(&p, labels)?
        }
        TaskKind::Binary => {
            let p: Vec<f64> = scores.iter().map(|r| r[0]).collect();
            binary_metrics(&p, labels, opts)?
        }
        TaskKind::Multiclass { classes } => {
            let p: Vec<usize> = scores.iter().map(|r| argmax(r)).collect();
            let y: Vec<usize> = labels.iter().map(|&v| v as usize).collect();
            multiclass_metrics(&p, &y, *classes)?
        }
    };
    report.metrics.retain(|k, _| wanted.contains(&k.as_str()));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_hand_cases() {
        let r = regression_metrics(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert_eq!(r.get("MSE"), Some(2.0));
        assert_eq!(r.get("MAE"), Some(1.0));
        assert!((r.get("RMSE").unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let y = [0.3, 1.2, -4.0, 2.5];
        let r = regression_metrics(&y, &y).unwrap();
        for (m, v) in [("MSE", 0.0), ("R2", 1.0), ("PCC", 1.0), ("Spearman", 1.0)] {
            assert!((r.get(m).unwrap() - v).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn constant_labels_flag_undefined() {
        let r = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.metrics["R2"], None);
        assert_eq!(r.metrics["PCC"], None);
        assert!(matches!(pcc(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn auc_hand_cases() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [0.0, 0.0, 1.0, 1.0];
        assert!((roc_auc(&s, &y).unwrap() - 0.75).abs() < 1e-12);
        let sep = [0.1, 0.2, 0.8, 0.9];
        assert_eq!(roc_auc(&sep, &y).unwrap(), 1.0);
        assert_eq!(pr_auc(&sep, &y).unwrap(), 1.0);
        assert!((range_log_auc(&sep, &y, (0.001, 0.1)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(roc_auc(&s, &[1.0; 4]), Err(Error::SingleClass)));
        let r = binary_metrics(&s, &[1.0; 4], &BinaryOptions::default()).unwrap();
        assert_eq!(r.metrics["ROC-AUC"], None);
    }

    #[test]
    fn at_k_metrics() {
        let s = [0.9, 0.8, 0.7, 0.6, 0.5];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0];
        // recall >= 0.9 needs all three positives: best precision 3/4
        assert!((precision_at_recall(&s, &y, 0.9).unwrap() - 0.75).abs() < 1e-12);
        // precision >= 0.9 only at the top threshold: recall 1/3
        assert!((recall_at_precision(&s, &y, 0.9).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn multiclass_identities() {
        let y = [0, 1, 2, 2, 1, 0, 3];
        let r = multiclass_metrics(&y, &y, 4).unwrap();
        assert!(r.metrics.values().all(|v| *v == Some(1.0)));
        let p = [0, 2, 2, 1, 1, 0, 0];
        let r = multiclass_metrics(&p, &y, 4).unwrap();
        assert_eq!(r.get("Micro-F1"), r.get("Accuracy"));
    }

    #[test]
    fn name_counts_and_lookup() {
        assert_eq!(REGRESSION_METRICS.len() + BINARY_METRICS.len() + MULTICLASS_METRICS.len(), 21);
        assert_eq!(resolve(&TaskKind::Binary, "roc_auc").unwrap(), "ROC-AUC");
        assert_eq!(resolve(&TaskKind::Binary, "auprc").unwrap(), "PR-AUC");
        assert_eq!(resolve(&TaskKind::Multiclass { classes: 3 }, "kappa").unwrap(), "Cohen's Kappa");
        assert!(matches!(resolve(&TaskKind::Regression, "F1"), Err(Error::UnknownMetric(_))));
    }

    #[test]
    fn evaluate_subset() {
        let scores = vec![vec![0.2], vec![0.7], vec![0.9]];
        let r = evaluate(
            &TaskKind::Binary,
            &scores,
            &[0.0, 1.0, 1.0],
            &["roc-auc".into(), "PR-AUC".into()],
            &BinaryOptions::default(),
        )
        .unwrap();
        assert_eq!(r.metrics.len(), 2);
        assert!(evaluate(&TaskKind::Binary, &scores, &[0.0, 1.0, 1.0], &[], &BinaryOptions::default()).is_err());
    }
}
