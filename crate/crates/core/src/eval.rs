//! Series-level scoring of detections against ground-truth annotations.

use serde::{Deserialize, Serialize};

use crate::bootstrap::DetectionResult;
use crate::error::{Error, Result};
use crate::signal::AnnotatedSeries;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, detected: bool, truth: bool) {
        match (detected, truth) {
            (true, true) => self.tp += 1,
            (false, true) => self.fn_ += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// `tp / (tp + fn)`, or `None` with no positives.
    pub fn sensitivity(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// `tn / (tn + fp)`, or `None` with no negatives.
    pub fn specificity(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesScore {
    pub name: String,
    pub detected: bool,
    pub truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub counts: ConfusionCounts,
    pub per_series: Vec<SeriesScore>,
    /// Spread across repeated runs, present when more than one run was
    /// aggregated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity_runs: Option<MeanSd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specificity_runs: Option<MeanSd>,
}

/// `(detected, truth_positive)` for one series. On a positive series a
/// detection counts only if a flagged interval overlaps an annotation.
pub fn score_series(result: &DetectionResult, truth: &AnnotatedSeries) -> (bool, bool) {
    let positive = !truth.annotations.is_empty();
    if !result.change_detected {
        return (false, positive);
    }
    if !positive {
        return (true, false);
    }
    let hit = result
        .flagged
        .iter()
        .any(|&(s, e)| truth.annotations.iter().any(|a| a.overlaps(s, e)));
    (hit, true)
}

pub fn aggregate(scores: &[SeriesScore]) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut counts = ConfusionCounts::default();
    for s in scores {
        counts.add(s.detected, s.truth);
    }
    Ok(EvalReport {
        sensitivity: counts.sensitivity(),
        specificity: counts.specificity(),
        counts,
        per_series: scores.to_vec(),
        sensitivity_runs: None,
        specificity_runs: None,
    })
}

fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanSd { mean, sd })
}

/// Pools every run's scores and adds mean ± sd of the per-run rates.
pub fn aggregate_runs(runs: &[Vec<SeriesScore>]) -> Result<EvalReport> {
    let pooled: Vec<SeriesScore> = runs.iter().flatten().cloned().collect();
    let mut report = aggregate(&pooled)?;
    if runs.len() > 1 {
        let per_run: Vec<EvalReport> = runs.iter().map(|r| aggregate(r)).collect::<Result<_>>()?;
        let sens: Vec<f64> = per_run.iter().filter_map(|r| r.sensitivity).collect();
        let spec: Vec<f64> = per_run.iter().filter_map(|r| r.specificity).collect();
        report.sensitivity_runs = mean_sd(&sens);
        report.specificity_runs = mean_sd(&spec);
    }
    Ok(report)
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.1}", 100.0 * x))
}

impl EvalReport {
    /// Plain-text table; the header names the scoring unit.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# scored per series part: one binary decision per file\n");
        let width = self
            .per_series
            .iter()
            .map(|s| s.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        out.push_str(&format!("{:<width$}  {:>8}  {:>5}  outcome\n", "name", "detected", "truth"));
        for s in &self.per_series {
            let outcome = match (s.detected, s.truth) {
                (true, true) => "TP",
                (false, true) => "FN",
                (true, false) => "FP",
                (false, false) => "TN",
            };
            out.push_str(&format!(
                "{:<width$}  {:>8}  {:>5}  {outcome}\n",
                s.name, s.detected, s.truth
            ));
        }
        let c = &self.counts;
        out.push_str(&format!(
            "\ntp {}  fn {}  tn {}  fp {}\nsensitivity % {}\nspecificity % {}\n",
            c.tp,
            c.fn_,
            c.tn,
            c.fp,
            pct(self.sensitivity),
            pct(self.specificity)
        ));
        if let (Some(a), Some(b)) = (self.sensitivity_runs, self.specificity_runs) {
            out.push_str(&format!(
                "runs: sensitivity % {:.1} +- {:.1}, specificity % {:.1} +- {:.1}\n",
                100.0 * a.mean,
                100.0 * a.sd,
                100.0 * b.mean,
                100.0 * b.sd
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::BootstrapSample;
    use crate::detector::{ChangeStatistic, WassersteinSeries};
    use crate::signal::Annotation;
    use proptest::prelude::*;

    fn result(detected: bool, flagged: Vec<(usize, usize)>) -> DetectionResult {
        DetectionResult {
            threshold: 1.0,
            flagged,
            series: WassersteinSeries {
                taus: vec![],
                values: vec![],
                source_spans: vec![],
                unconverged: 0,
            },
            statistic: ChangeStatistic { value: 0.0, argmax_tau: 0 },
            change_detected: detected,
            bootstrap: BootstrapSample {
                statistics: vec![],
                threshold: 1.0,
                redraws: 0,
                unconverged: 0,
            },
        }
    }

    fn series(ann: Option<(usize, usize)>) -> AnnotatedSeries {
        let mut s = AnnotatedSeries::new("s", vec![0.0; 100], 1.0).unwrap();
        if let Some((a, b)) = ann {
            s.add_annotation(Annotation::new(a, b, "AFL")).unwrap();
        }
        s
    }

    fn sc(detected: bool, truth: bool) -> SeriesScore {
        SeriesScore { name: "x".into(), detected, truth }
    }

    #[test]
    fn scoring_cases() {
        assert_eq!(score_series(&result(false, vec![]), &series(None)), (false, false));
        assert_eq!(score_series(&result(true, vec![(10, 30)]), &series(Some((20, 40)))), (true, true));
        assert_eq!(score_series(&result(true, vec![(50, 60)]), &series(None)), (true, false));
        // detection elsewhere on a positive series is a miss, not a false alarm
        assert_eq!(score_series(&result(true, vec![(0, 20)]), &series(Some((20, 40)))), (false, true));
        assert_eq!(score_series(&result(false, vec![]), &series(Some((20, 40)))), (false, true));
    }

    #[test]
    fn rates() {
        let r = aggregate(&[sc(true, true)]).unwrap();
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.specificity, None);
        let r = aggregate(&[sc(false, false), sc(false, false), sc(false, false), sc(true, false)]).unwrap();
        assert_eq!(r.specificity, Some(0.75));

        let mut scores = Vec::new();
        scores.extend(std::iter::repeat_n(sc(true, true), 97));
        scores.extend(std::iter::repeat_n(sc(false, true), 3));
        scores.extend(std::iter::repeat_n(sc(false, false), 96));
        scores.extend(std::iter::repeat_n(sc(true, false), 4));
        let r = aggregate(&scores).unwrap();
        assert_eq!(r.counts, ConfusionCounts { tp: 97, fp: 4, tn: 96, fn_: 3 });
        assert!((r.sensitivity.unwrap() - 0.97).abs() < 1e-12);
        assert!((r.specificity.unwrap() - 0.96).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn runs_spread() {
        let a = vec![sc(true, true), sc(false, false)];
        let b = vec![sc(false, true), sc(false, false)];
        let r = aggregate_runs(&[a, b]).unwrap();
        let s = r.sensitivity_runs.unwrap();
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!((s.sd - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.specificity_runs.unwrap().sd, 0.0);
        assert_eq!(r.counts.total(), 4);
    }

    #[test]
    fn table_and_json() {
        let r = aggregate(&[sc(true, true), sc(true, false)]).unwrap();
        let t = r.to_table();
        assert!(t.starts_with("# scored per series part"));
        assert!(t.contains("TP") && t.contains("FP"));
        let js = serde_json::to_value(&r).unwrap();
        assert_eq!(js["counts"]["fn"], 0);
        let back: EvalReport = serde_json::from_value(js).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn duplication_and_swap(v in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let s: Vec<SeriesScore> = v.iter().map(|&(d, t)| sc(d, t)).collect();
            let one = aggregate(&s).unwrap();
            let twice = aggregate(&[s.clone(), s.clone()].concat()).unwrap();
            prop_assert_eq!(one.sensitivity, twice.sensitivity);
            prop_assert_eq!(one.specificity, twice.specificity);
            prop_assert_eq!(one.counts.total(), s.len());
            let swapped: Vec<SeriesScore> = v.iter().map(|&(d, t)| sc(!d, !t)).collect();
            let sw = aggregate(&swapped).unwrap();
            prop_assert_eq!(sw.sensitivity, one.specificity);
            prop_assert_eq!(sw.specificity, one.sensitivity);
        }
    }
}
