//! Reference implementations written from the metric definitions, kept
//! independent of the library code they check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rxndp_core::render::PixelRect;
use rxndp_core::{BBox, Component, ComponentKind, MatchKind, PromptKind, ReactionAnnotation};

/// Classic two-row DP over chars.
pub fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Trims and collapses whitespace runs to one space.
pub fn squash(s: &str) -> String {
    let mut out = String::new();
    for w in s.split(|c: char| c.is_whitespace()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

pub fn oracle_text_match(gt: &str, pred: &str, threshold: f64) -> bool {
    let (gt, pred) = (&squash(gt), &squash(pred));
    let d = dp_levenshtein(gt, pred) as f64;
    let n = gt.chars().count().max(pred.chars().count()).max(1) as f64;
    d / n <= threshold
}

pub fn oracle_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn arr(c: &Component) -> Option<[f64; 4]> {
    c.bbox.map(|b| b.to_array())
}

/// Component predicate for components that carry both box and (for text)
/// content: molecules by IoU; text by IoU under hard, by edit ratio under
/// hybrid.
pub fn oracle_component(gt: &Component, pred: &Component, kind: MatchKind) -> bool {
    if gt.kind != pred.kind {
        return false;
    }
    let overlap = || match (arr(gt), arr(pred)) {
        (Some(a), Some(b)) => oracle_iou(a, b) > 0.5,
        _ => false,
    };
    match (gt.kind, kind) {
        (ComponentKind::Mol, _) => overlap(),
        (_, MatchKind::Hybrid) => oracle_text_match(gt.content.as_deref().unwrap(), pred.content.as_deref().unwrap(), 0.2),
        _ => overlap(),
    }
}

fn roles(r: &ReactionAnnotation, kind: MatchKind) -> [Vec<Component>; 3] {
    match kind {
        MatchKind::Soft => {
            let mols = |v: &[Component]| v.iter().filter(|c| c.kind == ComponentKind::Mol).cloned().collect::<Vec<_>>();
            let mut left = mols(&r.reactants);
            left.extend(mols(&r.conditions));
            [left, Vec::new(), mols(&r.products)]
        }
        _ => {
            let keep = |v: &[Component]| v.iter().filter(|c| c.kind != ComponentKind::Supplement).cloned().collect::<Vec<_>>();
            [keep(&r.reactants), keep(&r.conditions), keep(&r.products)]
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Some permutation pairs every role's components one-to-one.
pub fn oracle_reaction(gt: &ReactionAnnotation, pred: &ReactionAnnotation, kind: MatchKind) -> bool {
    let (g, p) = (roles(gt, kind), roles(pred, kind));
    g.iter().zip(p.iter()).all(|(gr, pr)| {
        gr.len() == pr.len() && permutations(gr.len()).iter().any(|perm| perm.iter().enumerate().all(|(i, &j)| oracle_component(&gr[i], &pr[j], kind)))
    })
}

/// Largest number of pairs over every injective pairing of reactions.
pub fn brute_force_tp(gt: &[ReactionAnnotation], pred: &[ReactionAnnotation], kind: MatchKind) -> usize {
    let edge: Vec<Vec<bool>> = gt.iter().map(|g| pred.iter().map(|p| oracle_reaction(g, p, kind)).collect()).collect();
    fn go(i: usize, used: &mut Vec<bool>, edge: &[Vec<bool>]) -> usize {
        if i == edge.len() {
            return 0;
        }
        let mut best = go(i + 1, used, edge);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(go(i + 1, used, edge) + usize::from(edge[i][j]));
                used[j] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; pred.len()], &edge)
}

const POOL: [[f64; 4]; 5] = [[0.05, 0.05, 0.25, 0.25], [0.35, 0.05, 0.55, 0.25], [0.65, 0.05, 0.85, 0.25], [0.05, 0.5, 0.25, 0.7], [0.35, 0.5, 0.55, 0.7]];
const TEXTS: [&str; 5] = ["NaH THF", "Pd/C, H2", "H2O, 25°C", "1a", "reflux"];

fn jittered(rng: &mut ChaCha8Rng, a: [f64; 4]) -> [f64; 4] {
    // small shifts keep IoU near 1, large ones push it below 0.5
    let d = if rng.random_bool(0.7) { rng.random_range(-0.01..0.01) } else { rng.random_range(0.06..0.12) };
    [a[0] + d, a[1], a[2] + d, a[3]]
}

fn random_component(rng: &mut ChaCha8Rng) -> Component {
    let b = BBox::from_array(POOL[rng.random_range(0..POOL.len())]).unwrap();
    match rng.random_range(0..5) {
        0 => Component::txt(TEXTS[rng.random_range(0..TEXTS.len())]).with_bbox(b),
        1 => Component::idt(TEXTS[rng.random_range(0..TEXTS.len())]).with_bbox(b),
        _ => Component::mol(b),
    }
}

fn typo(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut c: Vec<char> = s.chars().collect();
    let i = rng.random_range(0..c.len());
    c[i] = if c[i] == 'x' { 'y' } else { 'x' };
    c.into_iter().collect()
}

fn mutate(rng: &mut ChaCha8Rng, r: &ReactionAnnotation) -> ReactionAnnotation {
    let mut r = r.clone();
    for c in r.components_mut() {
        if rng.random_bool(0.3) {
            if let Some(b) = c.bbox {
                c.bbox = Some(BBox::from_array(jittered(rng, b.to_array())).unwrap_or(b));
            }
        }
        if rng.random_bool(0.2) {
            if let Some(t) = c.content.clone() {
                c.content = Some(typo(rng, &t));
            }
        }
    }
    if rng.random_bool(0.2) && !r.conditions.is_empty() {
        let c = r.conditions.remove(0);
        r.reactants.push(c);
    }
    if rng.random_bool(0.1) && !r.products.is_empty() {
        r.products.pop();
    }
    r.reactants.reverse();
    r
}

fn random_reaction(rng: &mut ChaCha8Rng) -> ReactionAnnotation {
    let n = rng.random_range(2..=6);
    let mut r = ReactionAnnotation::default();
    r.reactants.push(Component::mol(BBox::from_array(POOL[rng.random_range(0..POOL.len())]).unwrap()));
    r.products.push(Component::mol(BBox::from_array(POOL[rng.random_range(0..POOL.len())]).unwrap()));
    for _ in 2..n {
        let c = random_component(rng);
        match rng.random_range(0..3) {
            0 => r.reactants.push(c),
            1 => r.conditions.push(c),
            _ => r.products.push(c),
        }
    }
    r
}

/// Up to four reactions per side, two to six components each; predictions
/// are mostly perturbed copies so that matches are frequent.
pub fn random_instance(seed: u64) -> (Vec<ReactionAnnotation>, Vec<ReactionAnnotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt: Vec<ReactionAnnotation> = (0..rng.random_range(0..=4)).map(|_| random_reaction(&mut rng)).collect();
    let n_pred = rng.random_range(0..=4);
    let pred = (0..n_pred)
        .map(|_| {
            if !gt.is_empty() && rng.random_bool(0.75) {
                let k = rng.random_range(0..gt.len());
                mutate(&mut rng, &gt[k])
            } else {
                random_reaction(&mut rng)
            }
        })
        .collect();
    (gt, pred)
}

pub const BROS_EXAMPLE: &str = r#"[{
  "reactants": [{"category": "structure",
        "bbox": [0.1, 0.2, 0.3, 0.4]}],
  "conditions": [{"category": "text",
        "bbox": [0.32, 0.21, 0.4, 0.25]}],
  "products": [{"category": "structure",
        "bbox": [0.45, 0.2, 0.6, 0.4]}]
}]"#;

pub const BIVP_EXAMPLE: &str = r#"[
  {
    "reactants": [
    {"type": "mol", "index": 1},
    {"type": "txt", "content": "NaCl"}
    ],
    "conditions": [
    {"type": "mol", "index": 3},
    {"type": "txt", "content": "H2O, 25°C"}
    ],
    "products": [
    {"type": "mol", "index": 2},
    {"type": "idt", "content": "1a"}
    ]
  }
]"#;

const SPLICE: &[&str] = &["[", "]", "{", "}", "\"", ",", ":", "-1", "0", "1e309", "null", "true", "\\", "\"mol\"", "\"index\"", "\"bbox\"", "[0.1,0.2]", "```", "°", "\u{0}"];

/// One to four byte- or token-level edits of `payload`.
pub fn mutate_payload(rng: &mut ChaCha8Rng, payload: &str) -> String {
    let mut b = payload.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let n = b.len();
        let at = rng.random_range(0..=n);
        match rng.random_range(0..6) {
            0 if n > 0 => {
                b.remove(at.min(n - 1));
            }
            1 if n > 0 => b[at.min(n - 1)] = rng.random(),
            2 => {
                let s = SPLICE[rng.random_range(0..SPLICE.len())];
                b.splice(at..at, s.bytes());
            }
            3 => b.truncate(at),
            4 if n > 0 => {
                let (lo, hi) = (rng.random_range(0..n), rng.random_range(0..n));
                let chunk = b[lo.min(hi)..lo.max(hi)].to_vec();
                b.splice(at..at, chunk);
            }
            _ => {
                let s = SPLICE[rng.random_range(0..SPLICE.len())];
                let end = (at + s.len()).min(n);
                b.splice(at..end, s.bytes());
            }
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

/// Reads the integer written at a label: samples every glyph cell from the
/// top-left of the text area and template-matches against the digit glyphs.
pub fn decode_label(img: &image::RgbImage, rect: PixelRect, style: &rxndp_core::VisualPromptStyle) -> Option<u32> {
    use rxndp_core::render::font::{glyph, pixel_on, ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH};
    let (s, pad) = (style.glyph_scale() as i64, style.padding_px as i64);
    let (x0, y0) = (rect.left + pad, rect.top + pad);
    let text_w = rect.width() - 2 * pad;
    let n = (text_w + s) / (ADVANCE as i64 * s);
    if n < 1 || (n * ADVANCE as i64 - 1) * s != text_w {
        return None;
    }
    let mut digits = String::new();
    for k in 0..n {
        let ox = x0 + k * ADVANCE as i64 * s;
        let ink = |col: u32, row: u32| {
            let (x, y) = (ox + col as i64 * s + s / 2, y0 + row as i64 * s + s / 2);
            img.get_pixel(x as u32, y as u32).0 != [255, 255, 255]
        };
        let d = ('0'..='9').find(|&c| {
            let g = glyph(c);
            (0..GLYPH_HEIGHT).all(|row| (0..GLYPH_WIDTH).all(|col| ink(col, row) == pixel_on(&g, col, row)))
        })?;
        digits.push(d);
    }
    digits.parse().ok()
}

/// SHA-256 of each shipped template.
pub const PINNED: [(PromptKind, &str); 7] = [
    (PromptKind::Bros, "d540a59050699b9ede0377c9f11022f5bfe2017f39ea3deb6cc47511f00d4204"),
    (PromptKind::Bivp, "4c2ba6b1b5b7aeb18d9ec556de5046184e3924f6d90bc094eff2f37a90a7cd4b"),
    (PromptKind::VqaReactionCount, "ff567b05fd5be4b04a406dfd4ffa4917625950cd5ea960e6980b36f7ca00633f"),
    (PromptKind::VqaStructureCount, "91c4ffb887e7bb16fd140a3f757f38ec5932d43ce5247578fc13c3680aead46c"),
    (PromptKind::VqaCyclic, "963f13a9694a66d307ddcb22fe81964ed2a9587655edf27d44a4edd995727b8b"),
    (PromptKind::VqaTree, "a02e151ceaa3476f93e313bd596cd145e98f6a2859fce79956f4b01887ab7ef6"),
    (PromptKind::Ocr, "2a80b9de37cead987385045250dd5277daddcce1b5d2cf9db7aa3d6ad7952c55"),
];


/// Changed pixels lying outside every stroke ring and label rect, or
/// inside a box interior without a label over it.
pub fn stray_pixels(before: &image::RgbImage, after: &image::RgbImage, boxes: &[PixelRect], labels: &[PixelRect], stroke: i64) -> usize {
    after
        .enumerate_pixels()
        .filter(|(x, y, p)| *p != before.get_pixel(*x, *y))
        .filter(|(x, y, _)| {
            let (x, y) = (*x as i64, *y as i64);
            let in_ring = boxes.iter().any(|b| b.expand(stroke).contains(x, y) && !b.contains(x, y));
            let in_label = labels.iter().any(|l| l.contains(x, y));
            !(in_ring || in_label)
        })
        .count()
}
