//! Corpus-level aggregation and detector scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, Rect, Scalar};
use crate::matching::{harmonic, max_bipartite_matching, ratio_or_one, Counts, MatchKind};
use crate::model::Layout;

/// Per-diagram outcome, tagged with the diagram's layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramCounts {
    pub layout: Layout,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub mode: MatchKind,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_layout: BTreeMap<Layout, Counts>,
}

impl MatchReport {
    pub fn counts(&self) -> Counts {
        Counts::new(self.tp, self.fp, self.fn_)
    }
}

/// Micro-aggregates TP/FP/FN over the corpus.
pub fn aggregate(diagrams: &[DiagramCounts], mode: MatchKind) -> MatchReport {
    let total: Counts = diagrams.iter().map(|d| d.counts).sum();
    let mut per_layout: BTreeMap<Layout, Counts> = BTreeMap::new();
    for d in diagrams {
        *per_layout.entry(d.layout).or_default() += d.counts;
    }
    MatchReport {
        mode,
        tp: total.tp,
        fp: total.fp,
        fn_: total.fn_,
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        per_layout,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-diagram P/R/F1 averaged with equal weight per diagram.
pub fn macro_average(diagrams: &[DiagramCounts]) -> Scores {
    if diagrams.is_empty() {
        return Scores { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let n = diagrams.len() as f64;
    let (p, r, f) = diagrams.iter().fold((0.0, 0.0, 0.0), |acc, d| {
        (acc.0 + d.counts.precision(), acc.1 + d.counts.recall(), acc.2 + d.counts.f1())
    });
    Scores { precision: p / n, recall: r / n, f1: f / n }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub matched: usize,
    pub n_gt: usize,
    pub n_pred: usize,
}

impl DetectionCounts {
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.matched, self.n_pred)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_one(self.matched, self.n_gt)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

impl std::ops::Add for DetectionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { matched: self.matched + o.matched, n_gt: self.n_gt + o.n_gt, n_pred: self.n_pred + o.n_pred }
    }
}

/// One-to-one box matching at `IoU > iou_threshold`.
pub fn detection_counts<T: Scalar>(gt: &[Rect<T>], pred: &[Rect<T>], iou_threshold: T) -> DetectionCounts {
    let m = max_bipartite_matching(gt.len(), pred.len(), |i, j| iou(&gt[i], &pred[j]) > iou_threshold);
    DetectionCounts { matched: m.iter().flatten().count(), n_gt: gt.len(), n_pred: pred.len() }
}

/// Detector precision and recall; each is 1 when its denominator is 0.
pub fn detector_pr<T: Scalar>(gt: &[Rect<T>], pred: &[Rect<T>], iou_threshold: T) -> (f64, f64) {
    let c = detection_counts(gt, pred, iou_threshold);
    (c.precision(), c.recall())
}
