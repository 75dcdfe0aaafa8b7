//! Component, reaction and corpus-instance matching.
//!
//! A reaction pair matches when every role admits a perfect one-to-one
//! pairing of components under the mode's component predicate. Reaction
//! sets are then paired by maximum-cardinality bipartite matching.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::iou;
use crate::model::{Component, ComponentKind, ReactionAnnotation};
use crate::text::text_match;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    /// Molecules only, conditions folded into reactants.
    Soft,
    /// Every component by box overlap, roles respected.
    Hard,
    /// Molecules by overlap, text by content where both sides carry it.
    Hybrid,
}

impl MatchKind {
    pub const ALL: [MatchKind; 3] = [MatchKind::Soft, MatchKind::Hard, MatchKind::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::Soft => "soft",
            MatchKind::Hard => "hard",
            MatchKind::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for MatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "soft" => Ok(MatchKind::Soft),
            "hard" => Ok(MatchKind::Hard),
            "hybrid" => Ok(MatchKind::Hybrid),
            other => Err(format!("unknown match mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchMode {
    pub kind: MatchKind,
    /// Boxes match when IoU is strictly greater than this.
    pub iou_threshold: f64,
    /// Texts match when the edit ratio is at most this.
    pub edit_ratio_threshold: f64,
}

impl MatchMode {
    pub const DEFAULT_IOU: f64 = 0.5;
    pub const DEFAULT_EDIT_RATIO: f64 = 0.2;

    pub fn new(kind: MatchKind) -> Self {
        Self { kind, iou_threshold: Self::DEFAULT_IOU, edit_ratio_threshold: Self::DEFAULT_EDIT_RATIO }
    }

    pub fn soft() -> Self {
        Self::new(MatchKind::Soft)
    }

    pub fn hard() -> Self {
        Self::new(MatchKind::Hard)
    }

    pub fn hybrid() -> Self {
        Self::new(MatchKind::Hybrid)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("iou_threshold", self.iou_threshold), ("edit_ratio_threshold", self.edit_ratio_threshold)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

/// Maximum-cardinality bipartite matching by augmenting paths.
///
/// Left vertices are processed in ascending order and each tries right
/// vertices in ascending order, so results are deterministic. Returns the
/// partner of each left vertex.
pub fn max_bipartite_matching(n_left: usize, n_right: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
    let adj: Vec<Vec<usize>> = (0..n_left).map(|i| (0..n_right).filter(|&j| edge(i, j)).collect()).collect();
    let mut right_of: Vec<Option<usize>> = vec![None; n_right];

    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], right_of: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if right_of[v].is_none_or(|w| augment(w, adj, seen, right_of)) {
                right_of[v] = Some(u);
                return true;
            }
        }
        false
    }

    for u in 0..n_left {
        let mut seen = vec![false; n_right];
        augment(u, &adj, &mut seen, &mut right_of);
    }
    let mut left_of = vec![None; n_left];
    for (v, u) in right_of.iter().enumerate() {
        if let Some(u) = u {
            left_of[*u] = Some(v);
        }
    }
    left_of
}

fn perfect_matching(gt: &[&Component], pred: &[&Component], mode: &MatchMode) -> bool {
    if gt.len() != pred.len() {
        return false;
    }
    let m = max_bipartite_matching(gt.len(), pred.len(), |i, j| component_matches(gt[i], pred[j], mode));
    m.iter().all(Option::is_some)
}

/// Component-level predicate. Kinds must agree; `idt` never matches `txt`.
pub fn component_matches(gt: &Component, pred: &Component, mode: &MatchMode) -> bool {
    if gt.kind != pred.kind {
        return false;
    }
    let boxes = || match (&gt.bbox, &pred.bbox) {
        (Some(a), Some(b)) => Some(iou(a, b) > mode.iou_threshold),
        _ => None,
    };
    let contents = || match (&gt.content, &pred.content) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    if gt.kind == ComponentKind::Mol {
        return boxes().unwrap_or(false);
    }
    match mode.kind {
        // Text without boxes on either side can only be compared verbatim.
        MatchKind::Hard | MatchKind::Soft => boxes().or_else(|| contents().map(|(a, b)| a == b)).unwrap_or(false),
        MatchKind::Hybrid => contents()
            .map(|(a, b)| text_match(a, b, mode.edit_ratio_threshold))
            .or_else(boxes)
            .unwrap_or(false),
    }
}

/// Role lists after the mode's transformation: supplements dropped always;
/// under soft, text dropped and conditions merged into reactants.
fn prepared(r: &ReactionAnnotation, kind: MatchKind) -> [Vec<&Component>; 3] {
    let keep = |c: &&Component| match kind {
        MatchKind::Soft => c.is_mol(),
        _ => c.kind != ComponentKind::Supplement,
    };
    let reactants: Vec<&Component> = r.reactants.iter().filter(keep).collect();
    let conditions: Vec<&Component> = r.conditions.iter().filter(keep).collect();
    let products: Vec<&Component> = r.products.iter().filter(keep).collect();
    match kind {
        MatchKind::Soft => [reactants.into_iter().chain(conditions).collect(), Vec::new(), products],
        _ => [reactants, conditions, products],
    }
}

pub fn reaction_matches(gt: &ReactionAnnotation, pred: &ReactionAnnotation, mode: &MatchMode) -> bool {
    let g = prepared(gt, mode.kind);
    let p = prepared(pred, mode.kind);
    g.iter().zip(p.iter()).all(|(gr, pr)| perfect_matching(gr, pr, mode))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    /// `(gt ordinal, pred ordinal)`, ascending by gt ordinal.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

pub(crate) fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evaluation {
    pub assignment: Assignment,
    pub counts: Counts,
}

/// Pairs ground-truth and predicted reactions one-to-one, maximizing the
/// number of matched pairs.
pub fn evaluate(gt: &[ReactionAnnotation], pred: &[ReactionAnnotation], mode: &MatchMode) -> Evaluation {
    let partner = max_bipartite_matching(gt.len(), pred.len(), |i, j| reaction_matches(&gt[i], &pred[j], mode));
    let mut assignment = Assignment::default();
    let mut pred_used = vec![false; pred.len()];
    for (i, p) in partner.iter().enumerate() {
        match p {
            Some(j) => {
                assignment.pairs.push((i, *j));
                pred_used[*j] = true;
            }
            None => assignment.unmatched_gt.push(i),
        }
    }
    assignment.unmatched_pred = (0..pred.len()).filter(|&j| !pred_used[j]).collect();
    let counts = Counts::new(assignment.pairs.len(), assignment.unmatched_pred.len(), assignment.unmatched_gt.len());
    Evaluation { assignment, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::BBox;

    fn b(a: [f64; 4]) -> BBox {
        BBox::from_array(a).unwrap()
    }

    fn mol(a: [f64; 4]) -> Component {
        Component::mol(b(a))
    }

    fn sample() -> ReactionAnnotation {
        ReactionAnnotation::new(
            vec![mol([0.0, 0.0, 0.1, 0.1])],
            vec![mol([0.2, 0.0, 0.3, 0.1]), Component::txt("NaH THF")],
            vec![mol([0.5, 0.0, 0.6, 0.1]), Component::idt("1a")],
        )
    }

    #[test]
    fn identity_matches_in_every_mode() {
        let r = sample();
        for kind in MatchKind::ALL {
            assert!(reaction_matches(&r, &r, &MatchMode::new(kind)), "{kind}");
        }
    }

    #[test]
    fn condition_molecule_as_reactant() {
        let gt = sample();
        let mut pred = gt.clone();
        let cond = pred.conditions.remove(0);
        pred.reactants.push(cond);
        assert!(reaction_matches(&gt, &pred, &MatchMode::soft()));
        assert!(!reaction_matches(&gt, &pred, &MatchMode::hard()));
        assert!(!reaction_matches(&gt, &pred, &MatchMode::hybrid()));
    }

    #[test]
    fn soft_ignores_text_hybrid_checks_it() {
        let gt = sample();
        let mut pred = gt.clone();
        pred.conditions[1] = Component::txt("DMF, 80°C");
        assert!(reaction_matches(&gt, &pred, &MatchMode::soft()));
        assert!(!reaction_matches(&gt, &pred, &MatchMode::hybrid()));
        pred.conditions[1] = Component::txt("NaH THE");
        assert!(reaction_matches(&gt, &pred, &MatchMode::hybrid()));
        // Hard compares box-less text verbatim.
        assert!(!reaction_matches(&gt, &pred, &MatchMode::hard()));
    }

    #[test]
    fn idt_never_matches_txt() {
        let gt = ReactionAnnotation::new(vec![mol([0.0, 0.0, 0.1, 0.1])], vec![], vec![Component::idt("1a")]);
        let pred = ReactionAnnotation::new(vec![mol([0.0, 0.0, 0.1, 0.1])], vec![], vec![Component::txt("1a")]);
        assert!(!reaction_matches(&gt, &pred, &MatchMode::hybrid()));
    }

    #[test]
    fn supplements_are_ignored() {
        let gt = sample();
        let mut pred = gt.clone();
        pred.conditions.push(Component::text(ComponentKind::Supplement, "see SI"));
        for kind in MatchKind::ALL {
            assert!(reaction_matches(&gt, &pred, &MatchMode::new(kind)));
        }
    }

    #[test]
    fn extra_predicted_component_fails() {
        let gt = sample();
        let mut pred = gt.clone();
        pred.products.push(mol([0.8, 0.8, 0.9, 0.9]));
        for kind in MatchKind::ALL {
            assert!(!reaction_matches(&gt, &pred, &MatchMode::new(kind)));
        }
    }

    #[test]
    fn bros_text_by_box_under_hybrid() {
        let tb = b([0.3, 0.0, 0.4, 0.05]);
        let gt = ReactionAnnotation::new(vec![mol([0.0, 0.0, 0.1, 0.1])], vec![Component::txt("NaH").with_bbox(tb)], vec![mol([0.5, 0.0, 0.6, 0.1])]);
        let mut pred = gt.clone();
        pred.conditions[0].content = None;
        assert!(reaction_matches(&gt, &pred, &MatchMode::hybrid()));
        assert!(reaction_matches(&gt, &pred, &MatchMode::hard()));
    }

    #[test]
    fn evaluate_counts() {
        let r = sample();
        let e = evaluate(&[r.clone(), r.clone(), r.clone()], &[r.clone(), r.clone(), r.clone()], &MatchMode::hybrid());
        assert_eq!(e.counts, Counts::new(3, 0, 0));
        let e = evaluate(&[r.clone(), r], &[], &MatchMode::soft());
        assert_eq!(e.counts, Counts::new(0, 0, 2));
        assert_eq!(e.assignment.unmatched_gt, vec![0, 1]);
    }

    #[test]
    fn augmenting_path_beats_greedy() {
        // gt0 fits pred0 and pred1, gt1 only pred0: greedy would strand gt1.
        let edges = [[true, true], [true, false]];
        let m = max_bipartite_matching(2, 2, |i, j| edges[i][j]);
        assert_eq!(m, vec![Some(1), Some(0)]);
    }

    #[test]
    fn counts_conventions() {
        let c = Counts::new(2, 1, 1);
        assert!((c.precision() - 2.0 / 3.0).abs() < 1e-9);
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-9);
        let e = Counts::default();
        assert_eq!((e.precision(), e.recall(), e.f1()), (1.0, 1.0, 1.0));
        assert_eq!(Counts::new(0, 3, 2).f1(), 0.0);
    }

    #[test]
    fn mode_thresholds_validated() {
        assert!(MatchMode::soft().validate().is_ok());
        let bad = MatchMode { iou_threshold: 0.0, ..MatchMode::soft() };
        assert!(bad.validate().is_err());
    }
}
