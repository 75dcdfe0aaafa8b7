//! Pixel placement of a [`DiagramSpec`]. Pure geometry; no randomness.

use std::f64::consts::PI;

use super::{DiagramSpec, SynthError};
use crate::model::Layout;
use crate::render::font;
use crate::render::PixelRect;

pub const TEXT_SCALE: u32 = 2;
pub const STROKE: f64 = 3.0;
pub const ARROW_HEAD: f64 = 12.0;
const MARGIN: f64 = 28.0;
const GAP: f64 = 14.0;
const ARROW_MIN: f64 = 70.0;
const LINE_PITCH: f64 = 22.0;
const TEXT_CLEAR: f64 = 8.0;
const PLUS: f64 = 16.0;
const PLUS_GAP: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TextBox {
    pub text: String,
    pub rect: PixelRect,
}

#[derive(Debug, Clone)]
pub struct Plan {
    /// Target rectangle per molecule (spec order).
    pub molecules: Vec<PixelRect>,
    /// One arrow per reaction, tail to head.
    pub arrows: Vec<((f64, f64), (f64, f64))>,
    pub pluses: Vec<(f64, f64)>,
    /// Condition texts per reaction.
    pub conditions: Vec<Vec<TextBox>>,
    /// Identifier text per molecule.
    pub identifiers: Vec<Option<TextBox>>,
}

fn text_dims(text: &str) -> (f64, f64) {
    let (w, h) = font::text_size(text, TEXT_SCALE);
    (w as f64, h as f64)
}

fn rect_at(left: f64, top: f64, w: f64, h: f64) -> PixelRect {
    let (l, t) = (left.round() as i64, top.round() as i64);
    PixelRect::new(l, t, l + w as i64, t + h as i64)
}

fn centered(cx: f64, cy: f64, w: f64, h: f64) -> PixelRect {
    rect_at(cx - w / 2.0, cy - h / 2.0, w, h)
}

fn center(r: &PixelRect) -> (f64, f64) {
    ((r.left + r.right) as f64 / 2.0, (r.top + r.bottom) as f64 / 2.0)
}

/// Texts stacked upward so the last line ends `TEXT_CLEAR` above `y`.
fn stack_above(texts: &[String], cx: f64, y: f64) -> Vec<TextBox> {
    let n = texts.len();
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (w, h) = text_dims(t);
            let bottom = y - TEXT_CLEAR - (n - 1 - i) as f64 * LINE_PITCH;
            TextBox { text: t.clone(), rect: rect_at(cx - w / 2.0, bottom - h, w, h) }
        })
        .collect()
}

fn stack_below(texts: &[String], cx: f64, y: f64) -> Vec<TextBox> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (w, h) = text_dims(t);
            TextBox { text: t.clone(), rect: rect_at(cx - w / 2.0, y + TEXT_CLEAR + i as f64 * LINE_PITCH, w, h) }
        })
        .collect()
}

/// Texts stacked vertically around `cy`, flush against `x` on one side.
fn stack_beside(texts: &[String], x: f64, cy: f64, right: bool) -> Vec<TextBox> {
    let top0 = cy - (texts.len() as f64 * LINE_PITCH - (LINE_PITCH - 14.0)) / 2.0;
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (w, h) = text_dims(t);
            let left = if right { x + 10.0 } else { x - 10.0 - w };
            TextBox { text: t.clone(), rect: rect_at(left, top0 + i as f64 * LINE_PITCH, w, h) }
        })
        .collect()
}

/// Block of texts centered on `(cx, cy)`.
fn stack_block(texts: &[String], cx: f64, cy: f64) -> Vec<TextBox> {
    let top0 = cy - (texts.len() as f64 * LINE_PITCH - (LINE_PITCH - 14.0)) / 2.0;
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (w, h) = text_dims(t);
            TextBox { text: t.clone(), rect: rect_at(cx - w / 2.0, top0 + i as f64 * LINE_PITCH, w, h) }
        })
        .collect()
}

fn block_dims(texts: &[String]) -> (f64, f64) {
    let w = texts.iter().map(|t| text_dims(t).0).fold(0.0, f64::max);
    let h = if texts.is_empty() { 0.0 } else { texts.len() as f64 * LINE_PITCH - (LINE_PITCH - 14.0) };
    (w, h)
}

fn horizontal_len(texts: &[String]) -> f64 {
    ARROW_MIN.max(block_dims(texts).0 + 16.0)
}

fn vertical_len(texts: &[String]) -> f64 {
    ARROW_MIN.max(block_dims(texts).1 + 16.0)
}

/// Distance along unit direction `u` from the center of a `w x h` box to
/// its border grown by `pad`.
fn exit_distance(w: f64, h: f64, pad: f64, u: (f64, f64)) -> f64 {
    let hx = w / 2.0 + pad;
    let hy = h / 2.0 + pad;
    let tx = if u.0.abs() < 1e-12 { f64::INFINITY } else { hx / u.0.abs() };
    let ty = if u.1.abs() < 1e-12 { f64::INFINITY } else { hy / u.1.abs() };
    tx.min(ty)
}

struct Builder<'a> {
    spec: &'a DiagramSpec,
    plan: Plan,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a DiagramSpec) -> Self {
        let n_mol = spec.molecules.len();
        Self {
            spec,
            plan: Plan {
                molecules: vec![PixelRect::new(0, 0, 0, 0); n_mol],
                arrows: vec![((0.0, 0.0), (0.0, 0.0)); spec.reactions.len()],
                pluses: Vec::new(),
                conditions: vec![Vec::new(); spec.reactions.len()],
                identifiers: vec![None; n_mol],
            },
        }
    }

    fn dims(&self, m: usize) -> (f64, f64) {
        let s = &self.spec.molecules[m];
        (s.width as f64, s.height as f64)
    }

    fn texts(&self, r: usize) -> &[String] {
        &self.spec.reactions[r].conditions
    }

    fn place(&mut self, m: usize, cx: f64, cy: f64) {
        let (w, h) = self.dims(m);
        self.plan.molecules[m] = centered(cx, cy, w, h);
    }

    fn horizontal_arrow(&mut self, r: usize, from: usize, to: usize) {
        let (a, b) = (self.plan.molecules[from], self.plan.molecules[to]);
        let y = center(&a).1;
        let (x0, x1) = if a.right <= b.left { (a.right as f64 + GAP, b.left as f64 - GAP) } else { (a.left as f64 - GAP, b.right as f64 + GAP) };
        self.plan.arrows[r] = ((x0, y), (x1, y));
        self.plan.conditions[r] = stack_above(self.texts(r), (x0 + x1) / 2.0, y - STROKE);
    }

    fn vertical_arrow(&mut self, r: usize, from: usize, to: usize, text_right: bool) {
        let (a, b) = (self.plan.molecules[from], self.plan.molecules[to]);
        let x = center(&a).0;
        let (y0, y1) = if a.bottom <= b.top { (a.bottom as f64 + GAP, b.top as f64 - GAP) } else { (a.top as f64 - GAP, b.bottom as f64 + GAP) };
        self.plan.arrows[r] = ((x, y0), (x, y1));
        self.plan.conditions[r] = stack_beside(self.texts(r), x, (y0 + y1) / 2.0, text_right);
    }

    fn identifiers(&mut self) {
        for (m, s) in self.spec.molecules.iter().enumerate() {
            if let Some(id) = &s.identifier {
                let r = self.plan.molecules[m];
                let (w, h) = text_dims(id);
                self.plan.identifiers[m] = Some(TextBox { text: id.clone(), rect: rect_at(r.right as f64 + TEXT_CLEAR, r.bottom as f64 - h, w, h) });
            }
        }
    }

    fn single_line(&mut self) {
        let (w_canvas, h_canvas) = (self.spec.canvas.0 as f64, self.spec.canvas.1 as f64);
        let rx = &self.spec.reactions;
        // [co-reactant +] m0 -> m1 -> ... ; the chain follows reaction order
        let co: Vec<usize> = rx[0].reactants[1..].to_vec();
        let chain: Vec<usize> = std::iter::once(rx[0].reactants[0]).chain(rx.iter().map(|r| r.products[0])).collect();
        let mut total = 0.0;
        for &c in &co {
            total += self.dims(c).0 + 2.0 * PLUS_GAP + PLUS;
        }
        for &m in &chain {
            total += self.dims(m).0;
        }
        for r in 0..rx.len() {
            total += horizontal_len(self.texts(r)) + 2.0 * GAP;
        }
        let mut x = (w_canvas - total) / 2.0;
        let cy = h_canvas / 2.0;
        for &c in &co {
            let w = self.dims(c).0;
            self.place(c, x + w / 2.0, cy);
            x += w + PLUS_GAP;
            self.plan.pluses.push((x + PLUS / 2.0, cy));
            x += PLUS + PLUS_GAP;
        }
        for (k, &m) in chain.iter().enumerate() {
            let w = self.dims(m).0;
            self.place(m, x + w / 2.0, cy);
            x += w;
            if k < rx.len() {
                x += horizontal_len(self.texts(k)) + 2.0 * GAP;
            }
        }
        for (r, pair) in chain.windows(2).enumerate() {
            self.horizontal_arrow(r, pair[0], pair[1]);
        }
    }

    fn multi_line(&mut self) {
        let (w_canvas, h_canvas) = (self.spec.canvas.0 as f64, self.spec.canvas.1 as f64);
        let rx = &self.spec.reactions;
        let chain: Vec<usize> = std::iter::once(rx[0].reactants[0]).chain(rx.iter().map(|r| r.products[0])).collect();
        let per_row = multi_line_per_row(rx.len());
        let rows = chain.len().div_ceil(per_row);
        let col_w = chain.iter().map(|&m| self.dims(m).0).fold(0.0, f64::max);
        let row_h = chain.iter().map(|&m| self.dims(m).1).fold(0.0, f64::max);
        let mut h_len: f64 = ARROW_MIN;
        let mut v_len: f64 = ARROW_MIN;
        for r in 0..rx.len() {
            if (r + 1) % per_row == 0 {
                v_len = v_len.max(vertical_len(self.texts(r)));
            } else {
                h_len = h_len.max(horizontal_len(self.texts(r)));
            }
        }
        let col_pitch = col_w + 2.0 * GAP + h_len;
        let row_pitch = row_h + 2.0 * GAP + v_len;
        let grid_w = (per_row - 1) as f64 * col_pitch + col_w;
        let grid_h = (rows - 1) as f64 * row_pitch + row_h;
        let x0 = (w_canvas - grid_w) / 2.0 + col_w / 2.0;
        let y0 = (h_canvas - grid_h) / 2.0 + row_h / 2.0;
        let col_of = |k: usize| {
            let (row, pos) = (k / per_row, k % per_row);
            if row % 2 == 0 { pos } else { per_row - 1 - pos }
        };
        for (k, &m) in chain.iter().enumerate() {
            self.place(m, x0 + col_of(k) as f64 * col_pitch, y0 + (k / per_row) as f64 * row_pitch);
        }
        for r in 0..rx.len() {
            let (a, b) = (chain[r], chain[r + 1]);
            if (r + 1) % per_row == 0 {
                let right = per_row == 1 || col_of(r) == per_row - 1;
                self.vertical_arrow(r, a, b, right);
            } else {
                self.horizontal_arrow(r, a, b);
            }
        }
    }

    fn tree(&mut self) {
        let (w_canvas, h_canvas) = (self.spec.canvas.0 as f64, self.spec.canvas.1 as f64);
        let rx = &self.spec.reactions;
        let root = rx[0].reactants[0];
        // reaction 0: right, 1: down, 2: up, 3..: extend the right chain
        let mut chain = vec![root, rx[0].products[0]];
        let mut chain_rx = vec![0];
        for (r, reaction) in rx.iter().enumerate().skip(3) {
            chain.push(reaction.products[0]);
            chain_rx.push(r);
        }
        let mut total: f64 = chain.iter().map(|&m| self.dims(m).0).sum();
        for &r in &chain_rx {
            total += horizontal_len(self.texts(r)) + 2.0 * GAP;
        }
        let mut x = (w_canvas - total) / 2.0;
        let cy = h_canvas / 2.0;
        for (k, &m) in chain.iter().enumerate() {
            let w = self.dims(m).0;
            self.place(m, x + w / 2.0, cy);
            x += w;
            if k < chain_rx.len() {
                x += horizontal_len(self.texts(chain_rx[k])) + 2.0 * GAP;
            }
        }
        let root_rect = self.plan.molecules[root];
        let rc = center(&root_rect);
        for (r, down) in [(1usize, true), (2, false)] {
            if r >= rx.len() {
                continue;
            }
            let m = rx[r].products[0];
            let (_, h) = self.dims(m);
            let len = vertical_len(self.texts(r)) + 2.0 * GAP;
            let cy_m = if down { root_rect.bottom as f64 + len + h / 2.0 } else { root_rect.top as f64 - len - h / 2.0 };
            self.place(m, rc.0, cy_m);
            self.vertical_arrow(r, root, m, true);
        }
        for (k, &r) in chain_rx.iter().enumerate() {
            self.horizontal_arrow(r, chain[k], chain[k + 1]);
        }
    }

    fn cyclic(&mut self) -> Result<(), SynthError> {
        let (w_canvas, h_canvas) = (self.spec.canvas.0 as f64, self.spec.canvas.1 as f64);
        let rx = &self.spec.reactions;
        let ring: Vec<usize> = rx.iter().map(|r| r.reactants[0]).collect();
        let (cx, cy) = (w_canvas / 2.0, h_canvas / 2.0);
        if ring.len() == 2 {
            let (a, b) = (ring[0], ring[1]);
            let len = horizontal_len(self.texts(0)).max(horizontal_len(self.texts(1)));
            let (wa, wb) = (self.dims(a).0, self.dims(b).0);
            let total = wa + wb + len + 2.0 * GAP;
            let left = cx - total / 2.0;
            self.place(a, left + wa / 2.0, cy);
            self.place(b, left + total - wb / 2.0, cy);
            let (ra, rb) = (self.plan.molecules[a], self.plan.molecules[b]);
            let (x0, x1) = (ra.right as f64 + GAP, rb.left as f64 - GAP);
            let (ya, yb) = (cy - 12.0, cy + 12.0);
            self.plan.arrows[0] = ((x0, ya), (x1, ya));
            self.plan.arrows[1] = ((x1, yb), (x0, yb));
            self.plan.conditions[0] = stack_above(self.texts(0), (x0 + x1) / 2.0, ya - STROKE);
            self.plan.conditions[1] = stack_below(self.texts(1), (x0 + x1) / 2.0, yb + STROKE);
            return Ok(());
        }
        let n = ring.len();
        let max_w = ring.iter().map(|&m| self.dims(m).0).fold(0.0, f64::max);
        let max_h = ring.iter().map(|&m| self.dims(m).1).fold(0.0, f64::max);
        let rx_radius = w_canvas / 2.0 - max_w / 2.0 - MARGIN - 24.0;
        let ry_radius = h_canvas / 2.0 - max_h / 2.0 - MARGIN - 24.0;
        if rx_radius <= 0.0 || ry_radius <= 0.0 {
            return Err(SynthError::CanvasTooSmall);
        }
        for (i, &m) in ring.iter().enumerate() {
            let a = -PI / 2.0 + 2.0 * PI * i as f64 / n as f64;
            self.place(m, cx + rx_radius * a.cos(), cy + ry_radius * a.sin());
        }
        for r in 0..n {
            let (a, b) = (ring[r], ring[(r + 1) % n]);
            let (ca, cb) = (center(&self.plan.molecules[a]), center(&self.plan.molecules[b]));
            let (dx, dy) = (cb.0 - ca.0, cb.1 - ca.1);
            let d = (dx * dx + dy * dy).sqrt();
            let u = (dx / d, dy / d);
            let (wa, ha) = self.dims(a);
            let (wb, hb) = self.dims(b);
            let ta = exit_distance(wa, ha, GAP, u);
            let tb = exit_distance(wb, hb, GAP, u);
            if d - ta - tb < 40.0 {
                return Err(SynthError::CanvasTooSmall);
            }
            let from = (ca.0 + u.0 * ta, ca.1 + u.1 * ta);
            let to = (cb.0 - u.0 * tb, cb.1 - u.1 * tb);
            self.plan.arrows[r] = (from, to);
            let mid = ((from.0 + to.0) / 2.0, (from.1 + to.1) / 2.0);
            let mut normal = (-u.1, u.0);
            if normal.0 * (mid.0 - cx) + normal.1 * (mid.1 - cy) < 0.0 {
                normal = (-normal.0, -normal.1);
            }
            let (bw, bh) = block_dims(self.texts(r));
            let reach = (normal.0.abs() * bw + normal.1.abs() * bh) / 2.0 + TEXT_CLEAR + STROKE;
            self.plan.conditions[r] = stack_block(self.texts(r), mid.0 + normal.0 * reach, mid.1 + normal.1 * reach);
        }
        Ok(())
    }
}

/// Molecules per row in the multi-line snake for a chain of `n` reactions.
pub fn multi_line_per_row(n: usize) -> usize {
    (n + 1).div_ceil(2).clamp(1, 3)
}

fn seg_rect_distance(a: (f64, f64), b: (f64, f64), r: &PixelRect) -> f64 {
    // sample the segment; exact enough at pixel scale
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let steps = (len.ceil() as usize).max(1);
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            let dx = (r.left as f64 - x).max(x - r.right as f64).max(0.0);
            let dy = (r.top as f64 - y).max(y - r.bottom as f64).max(0.0);
            (dx * dx + dy * dy).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

impl Plan {
    pub fn text_boxes(&self) -> impl Iterator<Item = &TextBox> {
        self.conditions.iter().flatten().chain(self.identifiers.iter().flatten())
    }

    fn plus_rect(p: (f64, f64)) -> PixelRect {
        centered(p.0, p.1, PLUS, PLUS)
    }

    /// Checks clearances that keep every element a separate blob and
    /// everything on the canvas.
    pub fn check(&self, canvas: (u32, u32)) -> Result<(), SynthError> {
        let bounds = PixelRect::new(MARGIN as i64, MARGIN as i64, canvas.0 as i64 - MARGIN as i64, canvas.1 as i64 - MARGIN as i64);
        let inside = |r: &PixelRect| r.left >= bounds.left && r.top >= bounds.top && r.right <= bounds.right && r.bottom <= bounds.bottom;
        let fail = |what: &str| Err(SynthError::Collision(what.to_string()));
        if !self.molecules.iter().all(inside) || !self.text_boxes().all(|t| inside(&t.rect)) {
            return Err(SynthError::CanvasTooSmall);
        }
        for (i, a) in self.molecules.iter().enumerate() {
            if self.molecules[..i].iter().any(|b| a.expand(24).intersects(b)) {
                return fail("molecule/molecule");
            }
        }
        let texts: Vec<&TextBox> = self.text_boxes().collect();
        for (i, t) in texts.iter().enumerate() {
            let grown = t.rect.expand(TEXT_CLEAR as i64);
            if self.molecules.iter().any(|m| grown.intersects(m)) {
                return fail("text/molecule");
            }
            if texts[..i].iter().any(|o| grown.intersects(&o.rect)) {
                return fail("text/text");
            }
            if self.pluses.iter().any(|&p| grown.intersects(&Self::plus_rect(p))) {
                return fail("text/plus");
            }
            if self.arrows.iter().any(|&(a, b)| seg_rect_distance(a, b, &t.rect) < 8.0) {
                return fail("text/arrow");
            }
        }
        for &(a, b) in &self.arrows {
            if self.molecules.iter().any(|m| seg_rect_distance(a, b, m) < 8.0) {
                return fail("arrow/molecule");
            }
        }
        Ok(())
    }
}

pub fn plan(spec: &DiagramSpec) -> Result<Plan, SynthError> {
    let mut b = Builder::new(spec);
    match spec.layout {
        Layout::SingleLine => b.single_line(),
        Layout::MultiLine => b.multi_line(),
        Layout::Tree => b.tree(),
        Layout::Cyclic => b.cyclic()?,
        Layout::Unknown => return Err(SynthError::Unrealizable("unknown layout".into())),
    }
    b.identifiers();
    b.plan.check(spec.canvas)?;
    Ok(b.plan)
}
