//! Average precision per label, mean average precision across labels, and
//! before/after reports.
//!
//! AP is the non-interpolated retrieval average: scores are sorted
//! descending (ties keep instance order) and
//! `AP = (1/R) Σ_{k relevant} (relevant in top k) / k`.
//! A label with no relevant instance is not evaluable and is left out of
//! MAP.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelMatrix;
use crate::discovery::RelationshipSet;
use crate::error::{Error, Result};
use crate::pipeline::PredictionTable;

/// Instance indices by descending score; ties keep index order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// `None` when no instance is relevant.
pub fn average_precision(scores: &[f64], truth: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and truth differ in length");
    let relevant = truth.iter().filter(|&&t| t).count();
    if relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in ranking(scores).iter().enumerate() {
        if truth[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / relevant as f64)
}

/// Mean of the evaluable APs.
pub fn map_score(aps: &[Option<f64>]) -> Result<f64> {
    let vals: Vec<f64> = aps.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(Error::NoEvaluableLabels);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// `100 · (after − before) / before`; zero when both are equal.
pub fn improvement_pct(before: f64, after: f64) -> f64 {
    if after == before {
        0.0
    } else {
        100.0 * (after - before) / before
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelComparison {
    pub label: String,
    pub ap_before: Option<f64>,
    pub ap_after: Option<f64>,
}

impl LabelComparison {
    pub fn delta(&self) -> Option<f64> {
        Some(self.ap_after? - self.ap_before?)
    }
}

/// Before/after scores on one test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub map_before: f64,
    pub map_after: f64,
    pub improvement_pct: f64,
    pub per_label: Vec<LabelComparison>,
}

/// Scores both tables against `truth`. Both must list the truth's
/// instances in order (by row) and contain a column for every truth label.
pub fn compare(before: &PredictionTable, after: &PredictionTable, truth: &LabelMatrix) -> Result<Comparison> {
    let n = truth.n_instances();
    for (which, t) in [("before", before), ("after", after)] {
        if t.n_instances() != n {
            return Err(Error::CoverageMismatch(format!(
                "{which} table has {} instances, truth has {n}",
                t.n_instances()
            )));
        }
    }
    if before.ids() != after.ids() {
        return Err(Error::CoverageMismatch("before and after cover different instances".into()));
    }
    let mut per_label = Vec::with_capacity(truth.n_labels());
    for (j, name) in truth.names().iter().enumerate() {
        let column = |t: &PredictionTable, which: &str| {
            t.column(name)
                .ok_or_else(|| Error::CoverageMismatch(format!("{which} table lacks label `{name}`")))
        };
        let (b, a) = (column(before, "before")?, column(after, "after")?);
        per_label.push(LabelComparison {
            label: name.clone(),
            ap_before: average_precision(&b, truth.column(j)),
            ap_after: average_precision(&a, truth.column(j)),
        });
    }
    let map_before = map_score(&per_label.iter().map(|l| l.ap_before).collect::<Vec<_>>())?;
    let map_after = map_score(&per_label.iter().map(|l| l.ap_after).collect::<Vec<_>>())?;
    Ok(Comparison {
        map_before,
        map_after,
        improvement_pct: improvement_pct(map_before, map_after),
        per_label,
    })
}

/// Mean and sample standard deviation (zero for fewer than two values).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub stdev: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stdev = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanStd { mean, stdev }
    }
}

/// Relationship counts found on one training split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipCounts {
    pub positive_entailments: usize,
    pub reduced_entailments: usize,
    pub exclusions: usize,
    pub coexhaustions: usize,
    pub equivalences: usize,
    pub minsup_excl: usize,
}

impl From<&RelationshipSet> for RelationshipCounts {
    fn from(r: &RelationshipSet) -> Self {
        RelationshipCounts {
            positive_entailments: r.positive_entailments.len(),
            reduced_entailments: r.reduced_entailments.len(),
            exclusions: r.exclusions.len(),
            coexhaustions: r.coexhaustions.len(),
            equivalences: r.equivalences.len(),
            minsup_excl: r.minsup_excl,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationshipStats {
    pub positive_entailments: MeanStd,
    pub reduced_entailments: MeanStd,
    pub exclusions: MeanStd,
    pub coexhaustions: MeanStd,
    pub equivalences: MeanStd,
    pub minsup_excl: MeanStd,
}

/// Per-fold input to [`EvaluationReport::from_folds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEvaluation {
    pub fold: usize,
    pub n_test: usize,
    pub relationships: RelationshipCounts,
    /// `None` when no label is evaluable on this fold's test split.
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: String,
    /// Mean AP over the folds where the label is evaluable.
    pub ap_before: Option<f64>,
    pub ap_after: Option<f64>,
    pub folds_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub map_before: MeanStd,
    pub map_after: MeanStd,
    /// From the mean MAPs.
    pub improvement_pct: f64,
    pub per_label: Vec<LabelSummary>,
    pub relationships: RelationshipStats,
    pub folds: Vec<FoldEvaluation>,
}

impl EvaluationReport {
    /// Aggregates fold results. Folds without evaluable labels count toward
    /// relationship statistics but not MAP.
    pub fn from_folds(folds: Vec<FoldEvaluation>) -> Result<Self> {
        let scored: Vec<&Comparison> = folds.iter().filter_map(|f| f.comparison.as_ref()).collect();
        if scored.is_empty() {
            return Err(Error::NoEvaluableLabels);
        }
        let map_before = MeanStd::of(&scored.iter().map(|c| c.map_before).collect::<Vec<_>>());
        let map_after = MeanStd::of(&scored.iter().map(|c| c.map_after).collect::<Vec<_>>());

        let mut per_label: Vec<LabelSummary> = Vec::new();
        for c in &scored {
            for l in &c.per_label {
                if !per_label.iter().any(|s| s.label == l.label) {
                    per_label.push(LabelSummary {
                        label: l.label.clone(),
                        ap_before: None,
                        ap_after: None,
                        folds_evaluated: 0,
                    });
                }
            }
        }
        for s in &mut per_label {
            let pairs: Vec<(f64, f64)> = scored
                .iter()
                .filter_map(|c| c.per_label.iter().find(|l| l.label == s.label))
                .filter_map(|l| Some((l.ap_before?, l.ap_after?)))
                .collect();
            s.folds_evaluated = pairs.len();
            if !pairs.is_empty() {
                let k = pairs.len() as f64;
                s.ap_before = Some(pairs.iter().map(|p| p.0).sum::<f64>() / k);
                s.ap_after = Some(pairs.iter().map(|p| p.1).sum::<f64>() / k);
            }
        }

        let stat = |f: fn(&RelationshipCounts) -> usize| {
            MeanStd::of(&folds.iter().map(|x| f(&x.relationships) as f64).collect::<Vec<_>>())
        };
        let relationships = RelationshipStats {
            positive_entailments: stat(|r| r.positive_entailments),
            reduced_entailments: stat(|r| r.reduced_entailments),
            exclusions: stat(|r| r.exclusions),
            coexhaustions: stat(|r| r.coexhaustions),
            equivalences: stat(|r| r.equivalences),
            minsup_excl: stat(|r| r.minsup_excl),
        };
        Ok(EvaluationReport {
            improvement_pct: improvement_pct(map_before.mean, map_after.mean),
            map_before,
            map_after,
            per_label,
            relationships,
            folds,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned plain-text table, three decimals.
    pub fn to_text(&self) -> String {
        let ms = |m: &MeanStd| format!("{:.3} ± {:.3}", m.mean, m.stdev);
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut s = String::new();
        let _ = writeln!(s, "MAP before       {}", ms(&self.map_before));
        let _ = writeln!(s, "MAP after        {}", ms(&self.map_after));
        let _ = writeln!(s, "improvement      {:.3}%", self.improvement_pct);
        let r = &self.relationships;
        let _ = writeln!(s, "entailments      {}", ms(&r.positive_entailments));
        let _ = writeln!(s, "  reduced        {}", ms(&r.reduced_entailments));
        let _ = writeln!(s, "exclusions       {}", ms(&r.exclusions));
        let _ = writeln!(s, "coexhaustions    {}", ms(&r.coexhaustions));
        let _ = writeln!(s, "equivalences     {}", ms(&r.equivalences));
        let _ = writeln!(s, "minsup (excl)    {}", ms(&r.minsup_excl));
        let _ = writeln!(s);
        let width = self.per_label.iter().map(|l| l.label.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>9}  {:>9}", "label", "AP before", "AP after", "delta");
        for l in &self.per_label {
            let delta = l.ap_before.zip(l.ap_after).map(|(b, a)| a - b);
            let _ = writeln!(
                s,
                "{:<width$}  {:>9}  {:>9}  {:>9}",
                l.label,
                opt(l.ap_before),
                opt(l.ap_after),
                opt(delta)
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>4}  {:>6}  {:>10}  {:>9}  {:>9}", "fold", "n_test", "MAP before", "MAP after", "impr%");
        for f in &self.folds {
            let (b, a, i) = match &f.comparison {
                Some(c) => (format!("{:.3}", c.map_before), format!("{:.3}", c.map_after), format!("{:.3}", c.improvement_pct)),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(s, "{:>4}  {:>6}  {:>10}  {:>9}  {:>9}", f.fold, f.n_test, b, a, i);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]), Some(1.0));
    }

    #[test]
    fn single_relevant_second() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.2, 0.1], &[false, true, false, false]), Some(0.5));
    }

    #[test]
    fn ties_keep_instance_order() {
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]), Some(0.5));
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]), Some(1.0));
    }

    #[test]
    fn no_relevant_is_not_evaluable() {
        assert_eq!(average_precision(&[0.3, 0.2], &[false, false]), None);
        assert!(matches!(map_score(&[None, None]), Err(Error::NoEvaluableLabels)));
    }

    #[test]
    fn map_examples() {
        assert_eq!(map_score(&[Some(1.0), Some(0.5)]).unwrap(), 0.75);
        assert_eq!(map_score(&[None, Some(0.6)]).unwrap(), 0.6);
    }

    fn table(cols: &[&str], rows: &[&[f64]]) -> PredictionTable {
        let mut t = PredictionTable::new(cols.iter().map(|s| s.to_string()).collect()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            t.push_row(i.to_string(), r.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn fixing_one_inversion() {
        let truth = LabelMatrix::from_rows(
            vec!["x".into(), "y".into()],
            &[vec![true, true], vec![false, false], vec![true, false], vec![false, true]],
        )
        .unwrap();
        let before = table(&["x", "y"], &[&[0.9, 0.9], &[0.6, 0.1], &[0.5, 0.2], &[0.1, 0.8]]);
        let after = table(&["x", "y"], &[&[0.9, 0.9], &[0.4, 0.1], &[0.5, 0.2], &[0.1, 0.8]]);
        let c = compare(&before, &after, &truth).unwrap();
        assert!(c.per_label[0].delta().unwrap() > 0.0);
        assert_eq!(c.per_label[1].delta(), Some(0.0));
        assert!(c.improvement_pct > 0.0);

        let same = compare(&before, &before, &truth).unwrap();
        assert_eq!(same.improvement_pct, 0.0);
        assert_eq!(format!("{:.3}", same.improvement_pct), "0.000");

        let swapped = compare(&after, &before, &truth).unwrap();
        assert!(swapped.improvement_pct < 0.0);
    }

    #[test]
    fn coverage_mismatch() {
        let truth = LabelMatrix::from_rows(vec!["x".into()], &[vec![true], vec![false]]).unwrap();
        let short = table(&["x"], &[&[0.1]]);
        let ok = table(&["x"], &[&[0.1], &[0.2]]);
        assert!(matches!(compare(&short, &ok, &truth), Err(Error::CoverageMismatch(_))));
        let other = table(&["z"], &[&[0.1], &[0.2]]);
        assert!(matches!(compare(&ok, &other, &truth), Err(Error::CoverageMismatch(_))));
    }

    #[test]
    fn report_round_trip() {
        let truth = LabelMatrix::from_rows(vec!["x".into()], &[vec![true], vec![false]]).unwrap();
        let t = table(&["x"], &[&[0.1], &[0.2]]);
        let fold = |i| FoldEvaluation {
            fold: i,
            n_test: 2,
            relationships: RelationshipCounts {
                positive_entailments: i,
                ..Default::default()
            },
            comparison: Some(compare(&t, &t, &truth).unwrap()),
        };
        let r = EvaluationReport::from_folds(vec![fold(0), fold(1), fold(2)]).unwrap();
        assert_eq!(r.relationships.positive_entailments, MeanStd { mean: 1.0, stdev: 1.0 });
        assert_eq!(r.improvement_pct, 0.0);
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_text().contains("0.000%"));
    }

    fn brute_ap(scores: &[f64], truth: &[bool]) -> Option<f64> {
        let n = scores.len();
        // rank of i = instances strictly above it, plus equal scores earlier in order
        let rank = |i: usize| {
            (0..n).filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i)).count() + 1
        };
        let rel: Vec<usize> = (0..n).filter(|&i| truth[i]).collect();
        if rel.is_empty() {
            return None;
        }
        let total: f64 = rel
            .iter()
            .map(|&i| {
                let k = rank(i);
                let hits = rel.iter().filter(|&&j| rank(j) <= k).count();
                hits as f64 / k as f64
            })
            .sum();
        Some(total / rel.len() as f64)
    }

    proptest! {
        #[test]
        fn matches_precision_at_rank(cases in prop::collection::vec((0u8..6, any::<bool>()), 10)) {
            let scores: Vec<f64> = cases.iter().map(|c| c.0 as f64 / 5.0).collect();
            let truth: Vec<bool> = cases.iter().map(|c| c.1).collect();
            let (a, b) = (average_precision(&scores, &truth), brute_ap(&scores, &truth));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn rank_invariant(cases in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..30)) {
            let scores: Vec<f64> = cases.iter().map(|c| c.0).collect();
            let truth: Vec<bool> = cases.iter().map(|c| c.1).collect();
            let moved: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 7.0).collect();
            prop_assert_eq!(average_precision(&scores, &truth), average_precision(&moved, &truth));
        }
    }
}
