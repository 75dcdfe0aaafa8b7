//! Pixel-level drawing on RGB rasters. Everything clips to the image.

use image::{Rgb, RgbImage};

use super::font;

/// Half-open pixel rectangle `[left, right) x [top, bottom)`; may extend
/// past the image before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub left: i64,
    pub top: i64,
    pub right: i64,
    pub bottom: i64,
}

impl PixelRect {
    pub fn new(left: i64, top: i64, right: i64, bottom: i64) -> Self {
        Self { left, top, right, bottom }
    }

    pub fn width(&self) -> i64 {
        self.right - self.left
    }

    pub fn height(&self) -> i64 {
        self.bottom - self.top
    }

    pub fn is_empty(&self) -> bool {
        self.width() <= 0 || self.height() <= 0
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.left && x < self.right && y >= self.top && y < self.bottom
    }

    pub fn expand(&self, by: i64) -> Self {
        Self::new(self.left - by, self.top - by, self.right + by, self.bottom + by)
    }

    pub fn intersects(&self, other: &PixelRect) -> bool {
        self.left < other.right && other.left < self.right && self.top < other.bottom && other.top < self.bottom
    }

    pub fn clip(&self, width: u32, height: u32) -> Self {
        Self::new(
            self.left.clamp(0, width as i64),
            self.top.clamp(0, height as i64),
            self.right.clamp(0, width as i64),
            self.bottom.clamp(0, height as i64),
        )
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Self {
        Self::new(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)
    }
}

pub fn fill_rect(img: &mut RgbImage, rect: PixelRect, color: Rgb<u8>) {
    let r = rect.clip(img.width(), img.height());
    for y in r.top..r.bottom {
        for x in r.left..r.right {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Fills `outer` minus `inner`.
pub fn fill_ring(img: &mut RgbImage, outer: PixelRect, inner: PixelRect, color: Rgb<u8>) {
    let r = outer.clip(img.width(), img.height());
    for y in r.top..r.bottom {
        for x in r.left..r.right {
            if !inner.contains(x, y) {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// Draws `text` with its top-left corner at `(x, y)`; returns the covered
/// rectangle.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, scale: u32, color: Rgb<u8>) -> PixelRect {
    let (w, h) = font::text_size(text, scale);
    let s = scale as i64;
    for (i, c) in text.chars().enumerate() {
        let rows = font::glyph(c);
        let ox = x + i as i64 * font::ADVANCE as i64 * s;
        for row in 0..font::GLYPH_HEIGHT {
            for col in 0..font::GLYPH_WIDTH {
                if font::pixel_on(&rows, col, row) {
                    let cell = PixelRect::new(ox + col as i64 * s, y + row as i64 * s, 0, 0);
                    fill_rect(img, PixelRect::new(cell.left, cell.top, cell.left + s, cell.top + s), color);
                }
            }
        }
    }
    PixelRect::new(x, y, x + w as i64, y + h as i64)
}

fn dist_to_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Thick segment: every pixel whose center lies within `thickness / 2` of
/// the segment is set.
pub fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), thickness: f64, color: Rgb<u8>) {
    let half = thickness / 2.0;
    let bounds = PixelRect::new(
        (a.0.min(b.0) - half).floor() as i64 - 1,
        (a.1.min(b.1) - half).floor() as i64 - 1,
        (a.0.max(b.0) + half).ceil() as i64 + 2,
        (a.1.max(b.1) + half).ceil() as i64 + 2,
    )
    .clip(img.width(), img.height());
    for y in bounds.top..bounds.bottom {
        for x in bounds.left..bounds.right {
            if dist_to_segment(x as f64 + 0.5, y as f64 + 0.5, a, b) <= half {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

pub fn fill_triangle(img: &mut RgbImage, p: [(f64, f64); 3], color: Rgb<u8>) {
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor() as i64;
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor() as i64;
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    let r = PixelRect::new(min_x, min_y, max_x + 1, max_y + 1).clip(img.width(), img.height());
    let edge = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    for y in r.top..r.bottom {
        for x in r.left..r.right {
            let c = (x as f64 + 0.5, y as f64 + 0.5);
            let (e0, e1, e2) = (edge(p[0], p[1], c), edge(p[1], p[2], c), edge(p[2], p[0], c));
            if (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0) {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// Straight arrow from `from` to `to` with a filled head at `to`.
pub fn draw_arrow(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), thickness: f64, head: f64, color: Rgb<u8>) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = (dx * dx + dy * dy).sqrt().max(1e-9);
    let (ux, uy) = (dx / len, dy / len);
    let base = (to.0 - ux * head, to.1 - uy * head);
    draw_line(img, from, base, thickness, color);
    let half = head * 0.45;
    fill_triangle(img, [to, (base.0 - uy * half, base.1 + ux * half), (base.0 + uy * half, base.1 - ux * half)], color);
}

/// Tight bounding rectangle of non-white pixels inside `within`.
pub fn ink_bounds(img: &RgbImage, within: PixelRect) -> Option<PixelRect> {
    let r = within.clip(img.width(), img.height());
    let mut out: Option<PixelRect> = None;
    for y in r.top..r.bottom {
        for x in r.left..r.right {
            if img.get_pixel(x as u32, y as u32).0 != [255, 255, 255] {
                let o = out.get_or_insert(PixelRect::new(x, y, x + 1, y + 1));
                o.left = o.left.min(x);
                o.top = o.top.min(y);
                o.right = o.right.max(x + 1);
                o.bottom = o.bottom.max(y + 1);
            }
        }
    }
    out
}
