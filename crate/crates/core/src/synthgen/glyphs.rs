//! Hand-coded polyline molecules. Every glyph is one connected drawing so it
//! rasterizes to a single dark component.

use std::f64::consts::PI;

pub type Point = (f64, f64);
pub type Segment = (Point, Point);

pub const GLYPH_COUNT: usize = 12;

fn ring(cx: f64, cy: f64, r: f64, n: usize, rot: f64) -> Vec<Point> {
    (0..n).map(|i| {
        let a = rot + 2.0 * PI * i as f64 / n as f64;
        (cx + r * a.cos(), cy + r * a.sin())
    })
    .collect()
}

fn closed(points: &[Point]) -> Vec<Segment> {
    (0..points.len()).map(|i| (points[i], points[(i + 1) % points.len()])).collect()
}

fn chain(points: &[Point]) -> Vec<Segment> {
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Pointy-top hexagon vertices, clockwise from the top.
fn hexagon(cx: f64, cy: f64, r: f64) -> Vec<Point> {
    ring(cx, cy, r, 6, -PI / 2.0)
}

/// Raw segments of glyph `id` in arbitrary units.
pub fn segments(id: usize) -> Vec<Segment> {
    let s3 = 3f64.sqrt();
    match id % GLYPH_COUNT {
        // cyclohexane
        0 => closed(&hexagon(0.0, 0.0, 1.0)),
        // cyclopentane
        1 => closed(&ring(0.0, 0.0, 1.0, 5, -PI / 2.0)),
        // naphthalene: two hexagons sharing a vertical edge
        2 => {
            let mut s = closed(&hexagon(0.0, 0.0, 1.0));
            s.extend(closed(&hexagon(s3, 0.0, 1.0)));
            s
        }
        // hexagon with a zig-zag tail
        3 => {
            let h = hexagon(0.0, 0.0, 1.0);
            let mut s = closed(&h);
            let start = h[2];
            s.extend(chain(&[start, (start.0 + 0.85, start.1 - 0.5), (start.0 + 1.7, start.1), (start.0 + 2.55, start.1 - 0.5)]));
            s
        }
        // indole-like: hexagon fused with a pentagon
        4 => {
            let h = hexagon(0.0, 0.0, 1.0);
            let mut s = closed(&h);
            let (a, b) = (h[1], h[2]);
            let p1 = (a.0 + 0.95, a.1 - 0.3);
            let p2 = (b.0 + 0.95, b.1 + 0.3);
            let apex = ((p1.0 + p2.0) / 2.0 + 0.6, (p1.1 + p2.1) / 2.0);
            s.extend(chain(&[a, p1, apex, p2, b]));
            s
        }
        // cyclobutane with two stubs
        5 => {
            let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let mut s = closed(&sq);
            s.push(((1.0, 0.0), (1.7, -0.5)));
            s.push(((0.0, 1.0), (-0.7, 1.5)));
            s
        }
        // cyclopropane with an ethyl chain
        6 => {
            let t = [(0.0, 0.0), (1.0, 0.0), (0.5, -0.87)];
            let mut s = closed(&t);
            s.extend(chain(&[(1.0, 0.0), (1.6, 0.6), (2.4, 0.4), (2.9, 1.0)]));
            s
        }
        // cycloheptane
        7 => closed(&ring(0.0, 0.0, 1.0, 7, -PI / 2.0)),
        // biphenyl
        8 => {
            let a = hexagon(0.0, 0.0, 1.0);
            let b = ring(2.0 + s3, 0.0, 1.0, 6, -PI / 2.0);
            let mut s = closed(&a);
            s.extend(closed(&b));
            let right_of_a = (s3 / 2.0, 0.0);
            let left_of_b = (2.0 + s3 - s3 / 2.0, 0.0);
            s.push((right_of_a, left_of_b));
            s.push(((s3 / 2.0, -0.5), right_of_a));
            s.push(((s3 / 2.0, 0.5), right_of_a));
            s.push((left_of_b, (2.0 + s3 / 2.0, -0.5)));
            s.push((left_of_b, (2.0 + s3 / 2.0, 0.5)));
            s
        }
        // para-disubstituted benzene
        9 => {
            let h = hexagon(0.0, 0.0, 1.0);
            let mut s = closed(&h);
            s.push((h[0], (0.0, -1.8)));
            s.push((h[3], (0.0, 1.8)));
            s
        }
        // three fused hexagons, angular
        10 => {
            let mut s = closed(&hexagon(0.0, 0.0, 1.0));
            s.extend(closed(&hexagon(s3, 0.0, 1.0)));
            s.extend(closed(&hexagon(s3 / 2.0, 1.5, 1.0)));
            s
        }
        // hexagon with a branched (tert-butyl) substituent
        _ => {
            let h = hexagon(0.0, 0.0, 1.0);
            let mut s = closed(&h);
            let q = (h[1].0 + 0.8, h[1].1 - 0.45);
            s.push((h[1], q));
            s.push((q, (q.0 + 0.8, q.1 - 0.3)));
            s.push((q, (q.0 + 0.25, q.1 - 0.95)));
            s.push((q, (q.0 + 0.55, q.1 + 0.75)));
            s
        }
    }
}

/// Natural width / height of glyph `id`.
pub fn aspect(id: usize) -> f64 {
    let (x0, y0, x1, y1) = extent(&segments(id));
    (x1 - x0) / (y1 - y0)
}

fn extent(segs: &[Segment]) -> (f64, f64, f64, f64) {
    let mut e = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (a, b) in segs {
        for p in [a, b] {
            e.0 = e.0.min(p.0);
            e.1 = e.1.min(p.1);
            e.2 = e.2.max(p.0);
            e.3 = e.3.max(p.1);
        }
    }
    e
}

/// Segments of glyph `id` mapped onto the pixel rectangle
/// `(x, y, w, h)`, inset by `inset` so thick strokes stay inside.
pub fn fitted(id: usize, x: f64, y: f64, w: f64, h: f64, inset: f64) -> Vec<Segment> {
    let segs = segments(id);
    let (x0, y0, x1, y1) = extent(&segs);
    let sx = (w - 2.0 * inset) / (x1 - x0);
    let sy = (h - 2.0 * inset) / (y1 - y0);
    let map = |p: Point| (x + inset + (p.0 - x0) * sx, y + inset + (p.1 - y0) * sy);
    segs.into_iter().map(|(a, b)| (map(a), map(b))).collect()
}
