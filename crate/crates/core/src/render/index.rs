use std::cmp::Ordering;

use crate::geometry::{iou, median, same_box, Rect, Scalar};
use crate::BBox;

/// Reading order over boxes: rows first (y-center quantized by the median
/// box height), then x-center. Returns positions into `boxes`.
///
/// The full sort key falls back to raw coordinates, so the result does not
/// depend on the input order.
pub fn reading_order<T: Scalar>(boxes: &[Rect<T>]) -> Vec<usize> {
    let mut heights: Vec<T> = boxes.iter().map(|b| b.height()).collect();
    let Some(band) = median(&mut heights) else {
        return Vec::new();
    };
    let key = |b: &Rect<T>| {
        let (cx, cy) = b.center();
        let row = (cy / band).floor().to_i64().unwrap_or(0);
        (row, cx.to_f64().unwrap(), cy.to_f64().unwrap(), b.to_array().map(|v| v.to_f64().unwrap()))
    };
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (key(&boxes[i]), key(&boxes[j]));
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then_with(|| a.3.iter().zip(b.3.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal))
            .then(i.cmp(&j))
    });
    order
}

/// Dense 1-based index over molecule boxes, as drawn on a visual prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoxIndex {
    boxes: Vec<BBox>,
}

impl BoxIndex {
    /// Takes `boxes` as already ordered: `boxes[0]` gets index 1.
    pub fn from_ordered(boxes: Vec<BBox>) -> Self {
        Self { boxes }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, index: u32) -> Option<&BBox> {
        (index as usize).checked_sub(1).and_then(|i| self.boxes.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &BBox)> {
        self.boxes.iter().enumerate().map(|(i, b)| (i as u32 + 1, b))
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn index_of(&self, bbox: &BBox) -> Option<u32> {
        self.boxes.iter().position(|b| same_box(b, bbox)).map(|p| p as u32 + 1)
    }

    /// Index of the box overlapping `bbox` most, if that overlap exceeds
    /// `threshold`. Ties go to the lower index.
    pub fn best_match(&self, bbox: &BBox, threshold: f64) -> Option<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (i, b) in self.iter() {
            let v = iou(b, bbox);
            if v > threshold && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Assigns indices `1..=N` in reading order.
pub fn assign_indices(boxes: &[BBox]) -> BoxIndex {
    BoxIndex::from_ordered(reading_order(boxes).into_iter().map(|i| boxes[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(a: [f64; 4]) -> BBox {
        BBox::from_array(a).unwrap()
    }

    #[test]
    fn row_then_column() {
        let left = b([0.1, 0.4, 0.2, 0.5]);
        let right = b([0.6, 0.41, 0.7, 0.51]);
        let idx = assign_indices(&[right, left]);
        assert_eq!(idx.get(1), Some(&left));
        assert_eq!(idx.get(2), Some(&right));

        let top = b([0.5, 0.1, 0.6, 0.2]);
        let bottom = b([0.1, 0.6, 0.2, 0.7]);
        let idx = assign_indices(&[bottom, top]);
        assert_eq!(idx.index_of(&top), Some(1));
        assert_eq!(idx.index_of(&bottom), Some(2));
        assert!(idx.get(0).is_none() && idx.get(3).is_none());
    }

    #[test]
    fn empty() {
        assert!(assign_indices(&[]).is_empty());
    }

    fn arb_boxes() -> impl Strategy<Value = Vec<BBox>> {
        prop::collection::vec((0.0f64..0.9, 0.0f64..0.9, 0.02f64..0.1, 0.02f64..0.1), 0..12)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| b([x, y, x + w, y + h])).collect())
    }

    proptest! {
        #[test]
        fn permutation_invariant_bijection(boxes in arb_boxes(), seed in any::<u64>()) {
            let idx = assign_indices(&boxes);
            prop_assert_eq!(idx.len(), boxes.len());
            for bx in &boxes {
                prop_assert!(idx.index_of(bx).is_some());
            }
            let mut shuffled = boxes.clone();
            let n = shuffled.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            prop_assert_eq!(assign_indices(&shuffled), idx);
        }
    }
}
