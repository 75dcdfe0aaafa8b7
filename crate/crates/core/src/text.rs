//! Edit-distance text comparison for text components.

use crate::model::normalize_text;

/// Levenshtein distance over Unicode scalar values, two-row DP.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Distance normalized by the longer string (at least 1).
pub fn edit_ratio(gt: &str, pred: &str) -> f64 {
    let (gt, pred) = (normalize_text(gt), normalize_text(pred));
    let denom = gt.chars().count().max(pred.chars().count()).max(1);
    levenshtein(&gt, &pred) as f64 / denom as f64
}

/// True iff the normalized edit ratio is at most `threshold`.
pub fn text_match(gt: &str, pred: &str, threshold: f64) -> bool {
    edit_ratio(gt, pred) <= threshold
}
