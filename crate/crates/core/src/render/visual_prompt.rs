//! Pre-annotated images: molecule boxes stroked in place and labelled with
//! their reading-order index.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::font;
use super::index::{assign_indices, BoxIndex};
use super::raster::{draw_text, fill_rect, fill_ring, PixelRect};
use crate::BBox;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("cannot decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("box {index} {bbox} is smaller than one pixel on a {width}x{height} image")]
    SubPixelBox { index: u32, bbox: BBox, width: u32, height: u32 },
    #[error("invalid style: {0}")]
    Style(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelCorner {
    #[default]
    TopLeft,
    TopRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualPromptStyle {
    pub stroke_width_px: u32,
    pub palette: Vec<[u8; 3]>,
    pub label_corner: LabelCorner,
    pub label_scale: f64,
    /// White halo around label digits.
    pub padding_px: u32,
}

impl Default for VisualPromptStyle {
    fn default() -> Self {
        Self {
            stroke_width_px: 3,
            palette: vec![
                [230, 25, 75],
                [60, 180, 75],
                [0, 130, 200],
                [245, 130, 48],
                [145, 30, 180],
                [0, 128, 128],
                [240, 50, 230],
                [128, 0, 0],
            ],
            label_corner: LabelCorner::TopLeft,
            label_scale: 2.0,
            padding_px: 1,
        }
    }
}

impl VisualPromptStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.stroke_width_px < 1 {
            return Err(RenderError::Style("stroke_width_px must be >= 1".into()));
        }
        if self.palette.is_empty() {
            return Err(RenderError::Style("palette must not be empty".into()));
        }
        if !(self.label_scale > 0.0 && self.label_scale.is_finite()) {
            return Err(RenderError::Style("label_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn glyph_scale(&self) -> u32 {
        (self.label_scale.round() as u32).max(1)
    }

    pub fn color(&self, index: u32) -> Rgb<u8> {
        Rgb(self.palette[(index as usize - 1) % self.palette.len()])
    }

    /// Largest distance from a box edge that rendering may touch.
    pub fn reach_px(&self, max_index: u32) -> i64 {
        let (w, h) = font::text_size(&max_index.max(1).to_string(), self.glyph_scale());
        self.stroke_width_px as i64 + (w.max(h) + 2 * self.padding_px) as i64
    }

    /// Short content hash, used to key predictions and replay transcripts.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("style serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Where a label landed; `rect` includes the halo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelPlacement {
    pub index: u32,
    pub rect: PixelRect,
    pub text_origin: (i64, i64),
}

#[derive(Debug, Clone)]
pub struct VisualPrompt {
    pub image: RgbImage,
    pub index: BoxIndex,
    pub boxes_px: Vec<PixelRect>,
    pub labels: Vec<LabelPlacement>,
}

/// Pixel rectangle covered by a normalized box: outward rounding, clipped.
pub fn box_to_pixels(bbox: &BBox, width: u32, height: u32) -> PixelRect {
    const EPS: f64 = 1e-6;
    let (w, h) = (width as f64, height as f64);
    PixelRect::new(
        (bbox.x1() * w + EPS).floor() as i64,
        (bbox.y1() * h + EPS).floor() as i64,
        (bbox.x2() * w - EPS).ceil() as i64,
        (bbox.y2() * h - EPS).ceil() as i64,
    )
    .clip(width, height)
}

fn label_rect(px: &PixelRect, index: u32, style: &VisualPromptStyle, width: u32, height: u32) -> LabelPlacement {
    let (tw, th) = font::text_size(&index.to_string(), style.glyph_scale());
    let pad = style.padding_px as i64;
    let (lw, lh) = (tw as i64 + 2 * pad, th as i64 + 2 * pad);
    let s = style.stroke_width_px as i64;
    let left = match style.label_corner {
        LabelCorner::TopLeft => px.left - s,
        LabelCorner::TopRight => px.right + s - lw,
    };
    let mut top = px.top - s - lh;
    if top < 0 {
        top = px.bottom + s;
    }
    let left = left.clamp(0, (width as i64 - lw).max(0));
    let top = top.clamp(0, (height as i64 - lh).max(0));
    LabelPlacement { index, rect: PixelRect::new(left, top, left + lw, top + lh), text_origin: (left + pad, top + pad) }
}

/// Strokes each box outside its edge and writes its index next to the
/// chosen corner. Boxes are ordered by [`assign_indices`]; all strokes are
/// drawn before any label so labels stay legible.
pub fn render_visual_prompt(image: &RgbImage, boxes: &[BBox], style: &VisualPromptStyle) -> Result<VisualPrompt, RenderError> {
    style.validate()?;
    let (w, h) = image.dimensions();
    let index = assign_indices(boxes);
    let mut boxes_px = Vec::with_capacity(index.len());
    for (i, b) in index.iter() {
        let too_small = b.width() * w as f64 + 1e-9 < 1.0 || b.height() * h as f64 + 1e-9 < 1.0;
        let px = box_to_pixels(b, w, h);
        if too_small || px.is_empty() {
            return Err(RenderError::SubPixelBox { index: i, bbox: *b, width: w, height: h });
        }
        boxes_px.push(px);
    }

    let mut out = image.clone();
    let s = style.stroke_width_px as i64;
    for (k, px) in boxes_px.iter().enumerate() {
        fill_ring(&mut out, px.expand(s), *px, style.color(k as u32 + 1));
    }
    let scale = style.glyph_scale();
    let mut labels = Vec::with_capacity(boxes_px.len());
    for (k, px) in boxes_px.iter().enumerate() {
        let i = k as u32 + 1;
        let placement = label_rect(px, i, style, w, h);
        fill_rect(&mut out, placement.rect, Rgb([255, 255, 255]));
        draw_text(&mut out, placement.text_origin.0, placement.text_origin.1, &i.to_string(), scale, style.color(i));
        labels.push(placement);
    }
    Ok(VisualPrompt { image: out, index, boxes_px, labels })
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, RenderError> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).expect("png encoding into memory");
    buf.into_inner()
}

/// Byte-level entry point: PNG/JPEG in, PNG out.
pub fn render_visual_prompt_bytes(bytes: &[u8], boxes: &[BBox], style: &VisualPromptStyle) -> Result<(Vec<u8>, BoxIndex), RenderError> {
    let img = decode_image(bytes)?;
    let vp = render_visual_prompt(&img, boxes, style)?;
    Ok((encode_png(&vp.image), vp.index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([255, 255, 255]))
    }

    #[test]
    fn no_boxes_is_identity() {
        let img = white(40, 30);
        let vp = render_visual_prompt(&img, &[], &VisualPromptStyle::default()).unwrap();
        assert_eq!(vp.image, img);
        assert!(vp.index.is_empty());
    }

    #[test]
    fn sub_pixel_box_is_an_error() {
        let img = white(100, 100);
        let tiny = BBox::new(0.5, 0.5, 0.505, 0.6).unwrap();
        assert!(matches!(
            render_visual_prompt(&img, &[tiny], &VisualPromptStyle::default()),
            Err(RenderError::SubPixelBox { index: 1, .. })
        ));
    }

    #[test]
    fn bad_style_and_bytes() {
        let style = VisualPromptStyle { palette: vec![], ..Default::default() };
        assert!(matches!(render_visual_prompt(&white(4, 4), &[], &style), Err(RenderError::Style(_))));
        assert!(matches!(render_visual_prompt_bytes(b"not an image", &[], &VisualPromptStyle::default()), Err(RenderError::Decode(_))));
    }

    #[test]
    fn label_falls_below_when_no_room_above() {
        let img = white(100, 100);
        let b = BBox::new(0.2, 0.0, 0.5, 0.3).unwrap();
        let vp = render_visual_prompt(&img, &[b], &VisualPromptStyle::default()).unwrap();
        assert!(vp.labels[0].rect.top >= vp.boxes_px[0].bottom);
    }

    #[test]
    fn deterministic_bytes() {
        let img = white(64, 64);
        let boxes = [BBox::new(0.1, 0.3, 0.4, 0.6).unwrap(), BBox::new(0.6, 0.3, 0.9, 0.6).unwrap()];
        let png = encode_png(&img);
        let a = render_visual_prompt_bytes(&png, &boxes, &VisualPromptStyle::default()).unwrap();
        let b = render_visual_prompt_bytes(&png, &boxes, &VisualPromptStyle::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.len(), 2);
    }
}
