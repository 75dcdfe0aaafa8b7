//! Molecule detection: a connected-component blob detector for clean line
//! drawings, plus file and HTTP adapters behind one [`Detector`] trait.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::metrics::{detection_counts, DetectionCounts};
use crate::model::AnnotatedDiagram;
use crate::render::{encode_png, reading_order, PixelRect};
use crate::BBox;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("detections for '{id}': {message}")]
    Schema { id: String, message: String },
    #[error("detections file: {0}")]
    Format(String),
    #[error("detector request failed: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobParams {
    /// Gray levels below this are ink.
    pub threshold: u8,
    pub min_area: u32,
    pub merge_gap: u32,
    /// Merged blobs narrower or shorter than this are text or symbols.
    pub min_side: u32,
    /// Raw components longer than `max_aspect` times their width are lines.
    pub max_aspect: f64,
    /// Raw components whose second-moment eigenvalue ratio falls below this
    /// are lines (arrows, including diagonal ones).
    pub min_elongation: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self { threshold: 128, min_area: 30, merge_gap: 4, min_side: 24, max_aspect: 6.0, min_elongation: 0.02 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Component {
    rect: PixelRect,
    area: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Component {
    /// Ratio of the smaller to the larger principal variance.
    fn elongation(&self) -> f64 {
        let n = self.area as f64;
        let (mx, my) = (self.sx / n, self.sy / n);
        let vxx = self.sxx / n - mx * mx;
        let vyy = self.syy / n - my * my;
        let vxy = self.sxy / n - mx * my;
        let tr = vxx + vyy;
        let disc = ((vxx - vyy).powi(2) + 4.0 * vxy * vxy).sqrt();
        let (hi, lo) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        if hi <= 0.0 {
            1.0
        } else {
            lo.max(0.0) / hi
        }
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

/// 8-connected components of the ink mask.
fn components(img: &RgbImage, threshold: u8) -> Vec<Component> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let ink: Vec<bool> = img
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            let luma = (299 * r as u32 + 587 * g as u32 + 114 * b as u32) / 1000;
            luma < threshold as u32
        })
        .collect();
    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !ink[i] {
                continue;
            }
            let mut join = |j: usize| {
                if ink[j] {
                    let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                    if a != b {
                        parent[a.max(b) as usize] = a.min(b);
                    }
                }
            };
            if x > 0 {
                join(i - 1);
            }
            if y > 0 {
                join(i - w);
                if x > 0 {
                    join(i - w - 1);
                }
                if x + 1 < w {
                    join(i - w + 1);
                }
            }
        }
    }
    let mut slot: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out: Vec<Component> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !ink[i] {
                continue;
            }
            let root = find(&mut parent, i as u32);
            let k = *slot.entry(root).or_insert_with(|| {
                out.push(Component { rect: PixelRect::new(x as i64, y as i64, x as i64 + 1, y as i64 + 1), area: 0, sx: 0.0, sy: 0.0, sxx: 0.0, syy: 0.0, sxy: 0.0 });
                out.len() - 1
            });
            let c = &mut out[k];
            let (xi, yi) = (x as i64, y as i64);
            c.rect.left = c.rect.left.min(xi);
            c.rect.top = c.rect.top.min(yi);
            c.rect.right = c.rect.right.max(xi + 1);
            c.rect.bottom = c.rect.bottom.max(yi + 1);
            c.area += 1;
            let (fx, fy) = (x as f64, y as f64);
            c.sx += fx;
            c.sy += fy;
            c.sxx += fx * fx;
            c.syy += fy * fy;
            c.sxy += fx * fy;
        }
    }
    out
}

fn gap(a: &PixelRect, b: &PixelRect) -> (i64, i64) {
    let dx = (a.left - b.right).max(b.left - a.right).max(0);
    let dy = (a.top - b.bottom).max(b.top - a.bottom).max(0);
    (dx, dy)
}

fn union(a: &PixelRect, b: &PixelRect) -> PixelRect {
    PixelRect::new(a.left.min(b.left), a.top.min(b.top), a.right.max(b.right), a.bottom.max(b.bottom))
}

/// Repeatedly merges rectangles closer than `merge_gap` on both axes.
fn merge(mut rects: Vec<PixelRect>, merge_gap: i64) -> Vec<PixelRect> {
    loop {
        let mut merged = false;
        let mut i = 0;
        while i < rects.len() {
            let mut j = i + 1;
            while j < rects.len() {
                let (dx, dy) = gap(&rects[i], &rects[j]);
                if dx <= merge_gap && dy <= merge_gap {
                    let r = rects.swap_remove(j);
                    rects[i] = union(&rects[i], &r);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            return rects;
        }
    }
}

/// Molecule boxes in reading order.
pub fn detect_blobs(img: &RgbImage, params: &BlobParams) -> Vec<BBox> {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let kept: Vec<PixelRect> = components(img, params.threshold)
        .into_iter()
        .filter(|c| c.area >= params.min_area as u64)
        .filter(|c| {
            let (cw, ch) = (c.rect.width() as f64, c.rect.height() as f64);
            cw.max(ch) <= params.max_aspect * cw.min(ch) && c.elongation() >= params.min_elongation
        })
        .map(|c| c.rect)
        .collect();
    let boxes: Vec<BBox> = merge(kept, params.merge_gap as i64)
        .into_iter()
        .filter(|r| r.width().min(r.height()) >= params.min_side as i64)
        .filter_map(|r| BBox::from_pixels(r.left as u32, r.top as u32, r.right as u32, r.bottom as u32, w, h).ok())
        .collect();
    reading_order(&boxes).into_iter().map(|i| boxes[i]).collect()
}

pub fn detect_blobs_bytes(bytes: &[u8], params: &BlobParams) -> Result<Vec<BBox>, DetectorError> {
    let img = image::load_from_memory(bytes).map_err(|e| DetectorError::Decode(e.to_string()))?.to_rgb8();
    Ok(detect_blobs(&img, params))
}

/// Image → molecule boxes. Implementations are interchangeable.
pub trait Detector: Send + Sync {
    fn name(&self) -> String;
    fn detect(&self, image_id: &str, image: &RgbImage) -> Result<Vec<BBox>, DetectorError>;
}

#[derive(Debug, Clone, Default)]
pub struct BlobDetector {
    pub params: BlobParams,
}

impl Detector for BlobDetector {
    fn name(&self) -> String {
        "blob".into()
    }

    fn detect(&self, _image_id: &str, image: &RgbImage) -> Result<Vec<BBox>, DetectorError> {
        Ok(detect_blobs(image, &self.params))
    }
}

/// Precomputed detections keyed by image id; unknown ids yield no boxes.
#[derive(Debug, Clone, Default)]
pub struct FileDetector {
    pub detections: Detections,
}

impl FileDetector {
    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        Ok(Self { detections: load_detections(path)? })
    }
}

impl Detector for FileDetector {
    fn name(&self) -> String {
        "file".into()
    }

    fn detect(&self, image_id: &str, _image: &RgbImage) -> Result<Vec<BBox>, DetectorError> {
        Ok(self.detections.get(image_id).cloned().unwrap_or_default())
    }
}

/// Remote detector: POSTs the PNG to `url?id=<image id>` and expects a JSON
/// array of `[x1, y1, x2, y2]` boxes.
#[derive(Debug, Clone)]
pub struct HttpDetector {
    pub url: String,
}

impl Detector for HttpDetector {
    fn name(&self) -> String {
        format!("http:{}", self.url)
    }

    fn detect(&self, image_id: &str, image: &RgbImage) -> Result<Vec<BBox>, DetectorError> {
        let body = encode_png(image);
        let mut resp = ureq::post(&self.url)
            .query("id", image_id)
            .header("Content-Type", "image/png")
            .send(&body[..])
            .map_err(|e| DetectorError::Remote(e.to_string()))?;
        let text = resp.body_mut().read_to_string().map_err(|e| DetectorError::Remote(e.to_string()))?;
        let raw: Vec<[f64; 4]> = serde_json::from_str(&text).map_err(|e| DetectorError::Remote(format!("bad reply: {e}")))?;
        raw.into_iter().map(|a| BBox::from_array(a).map_err(|e| DetectorError::Schema { id: image_id.to_string(), message: e.to_string() })).collect()
    }
}

pub type Detections = BTreeMap<String, Vec<BBox>>;

/// Parses `{image_id: [[x1, y1, x2, y2], ...]}`.
pub fn parse_detections(json: &str) -> Result<Detections, DetectorError> {
    let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(json).map_err(|e| DetectorError::Format(e.to_string()))?;
    let mut out = Detections::new();
    for (id, v) in raw {
        let schema = |message: String| DetectorError::Schema { id: id.clone(), message };
        let items = v.as_array().ok_or_else(|| schema("expected a list of boxes".into()))?;
        let mut boxes = Vec::with_capacity(items.len());
        for (k, item) in items.iter().enumerate() {
            let a: [f64; 4] = serde_json::from_value(item.clone()).map_err(|e| schema(format!("box {k}: {e}")))?;
            boxes.push(BBox::from_array(a).map_err(|e| schema(format!("box {k}: {e}")))?);
        }
        out.insert(id, boxes);
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<Detections, DetectorError> {
    let text = fs::read_to_string(path).map_err(|e| DetectorError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_detections(&text)
}

pub fn detections_to_json(d: &Detections) -> String {
    serde_json::to_string_pretty(d).expect("boxes serialize")
}

pub fn save_detections(path: &Path, d: &Detections) -> std::io::Result<()> {
    fs::write(path, detections_to_json(d))
}

/// Micro-aggregated detector counts at IoU > 0.5; images without an entry
/// count as empty predictions.
pub fn evaluate_detector(corpus: &[AnnotatedDiagram], detections: &Detections) -> DetectionCounts {
    corpus.iter().fold(DetectionCounts { matched: 0, n_gt: 0, n_pred: 0 }, |acc, d| {
        let pred = detections.get(d.id()).map(Vec::as_slice).unwrap_or(&[]);
        acc + detection_counts(&d.molecules, pred, 0.5)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::raster::{draw_arrow, draw_line, draw_text};
    use image::Rgb;

    const INK: Rgb<u8> = Rgb([0, 0, 0]);

    fn blank() -> RgbImage {
        RgbImage::from_pixel(200, 120, Rgb([255, 255, 255]))
    }

    #[test]
    fn blank_is_empty() {
        assert!(detect_blobs(&blank(), &BlobParams::default()).is_empty());
    }

    #[test]
    fn square_found_arrow_and_text_rejected() {
        let mut img = blank();
        for (a, b) in [((20.5, 20.5), (60.5, 20.5)), ((60.5, 20.5), (60.5, 60.5)), ((60.5, 60.5), (20.5, 60.5)), ((20.5, 60.5), (20.5, 20.5))] {
            draw_line(&mut img, a, b, 3.0, INK);
        }
        draw_arrow(&mut img, (75.0, 40.0), (150.0, 40.0), 3.0, 12.0, INK);
        draw_arrow(&mut img, (160.0, 20.0), (190.0, 100.0), 3.0, 12.0, INK);
        draw_text(&mut img, 80, 90, "NaH THF", 2, INK);
        let boxes = detect_blobs(&img, &BlobParams::default());
        assert_eq!(boxes.len(), 1, "{boxes:?}");
        let expect = BBox::from_pixels(19, 19, 62, 62, 200, 120).unwrap();
        assert!(crate::iou(&boxes[0], &expect) > 0.9);
    }

    #[test]
    fn close_fragments_merge() {
        let mut img = blank();
        draw_line(&mut img, (20.5, 20.5), (50.5, 50.5), 3.0, INK);
        draw_line(&mut img, (54.5, 50.5), (54.5, 80.5), 3.0, INK);
        draw_line(&mut img, (20.5, 50.5), (40.5, 20.5), 3.0, INK);
        let boxes = detect_blobs(&img, &BlobParams { min_elongation: 0.0, max_aspect: 100.0, ..BlobParams::default() });
        assert_eq!(boxes.len(), 1);
    }

    #[test]
    fn detections_file_examples() {
        let d = parse_detections(r#"{"d1": [[0,0,0.1,0.1]]}"#).unwrap();
        assert_eq!(d["d1"].len(), 1);
        match parse_detections(r#"{"d1": [[0.5,0,0.1,0.1]]}"#) {
            Err(e @ DetectorError::Schema { .. }) => assert!(e.to_string().contains("d1")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_detections("[1]"), Err(DetectorError::Format(_))));
    }
}
