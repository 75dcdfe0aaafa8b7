mod common;

use common::{decode_label, stray_pixels};
use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rxndp_core::render::{encode_png, render_visual_prompt_bytes, PixelRect};
use rxndp_core::synthgen::{generate_corpus, SynthParams};
use rxndp_core::{assign_indices, render_visual_prompt, BBox, VisualPromptStyle};

fn assert_local(before: &RgbImage, after: &RgbImage, boxes: &[PixelRect], labels: &[PixelRect], stroke: i64) {
    assert_eq!(stray_pixels(before, after, boxes, labels, stroke), 0);
}

#[test]
fn synthetic_diagrams_locality_and_round_trip() {
    let corpus = generate_corpus(42, 25, &SynthParams::default()).unwrap();
    let style = VisualPromptStyle::default();
    let s = style.stroke_width_px as i64;
    for (i, d) in corpus.diagrams.iter().enumerate() {
        let img = corpus.image(i).unwrap();
        let vp = render_visual_prompt(&img, &d.molecules, &style).unwrap();
        let label_rects: Vec<PixelRect> = vp.labels.iter().map(|l| l.rect).collect();
        assert_local(&img, &vp.image, &vp.boxes_px, &label_rects, s);

        let n = d.molecules.len() as u32;
        let decoded: Vec<u32> = vp.labels.iter().map(|l| decode_label(&vp.image, l.rect, &style).unwrap_or_else(|| panic!("{}: label {} unreadable", d.id(), l.index))).collect();
        assert_eq!(decoded, (1..=n).collect::<Vec<_>>(), "{}", d.id());
        for (k, l) in vp.labels.iter().enumerate() {
            let near = vp.boxes_px[k].expand(style.reach_px(n));
            assert!(near.contains(l.rect.left, l.rect.top) && near.contains(l.rect.right - 1, l.rect.bottom - 1));
            let inked = vp.image.enumerate_pixels().filter(|(x, y, _)| l.rect.contains(*x as i64, *y as i64)).any(|(_, _, p)| *p == style.color(l.index));
            assert!(inked);
        }
        assert_eq!(vp.index, d.index_map());
    }
}

#[test]
fn stroke_lies_outside_the_box() {
    let img = RgbImage::from_pixel(100, 80, Rgb([255, 255, 255]));
    let b = BBox::new(0.3, 0.5, 0.6, 0.75).unwrap();
    let style = VisualPromptStyle { stroke_width_px: 2, ..Default::default() };
    let vp = render_visual_prompt(&img, &[b], &style).unwrap();
    assert_eq!(vp.boxes_px[0], PixelRect::new(30, 40, 60, 60));
    let red = style.color(1);
    for x in 28..62 {
        assert_eq!(*vp.image.get_pixel(x, 61), red);
        assert_eq!(*vp.image.get_pixel(x, 60), red);
    }
    assert_eq!(*vp.image.get_pixel(45, 59), Rgb([255, 255, 255]));
    assert_eq!(*vp.image.get_pixel(45, 62), Rgb([255, 255, 255]));
}

#[test]
fn byte_output_is_deterministic() {
    let corpus = generate_corpus(3, 1, &SynthParams::default()).unwrap();
    let png = encode_png(&corpus.image(0).unwrap());
    let boxes = &corpus.diagrams[0].molecules;
    let a = render_visual_prompt_bytes(&png, boxes, &VisualPromptStyle::default()).unwrap();
    let b = render_visual_prompt_bytes(&png, boxes, &VisualPromptStyle::default()).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

fn boxes_strategy() -> impl Strategy<Value = Vec<[f64; 4]>> {
    proptest::collection::vec((0.0f64..0.8, 0.0f64..0.8, 0.05f64..0.2, 0.05f64..0.2), 0..8)
        .prop_map(|v| v.into_iter().map(|(x, y, w, h)| [x, y, x + w, y + h]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn indices_are_dense_and_order_free(raw in boxes_strategy(), rot in 0usize..8) {
        let boxes: Vec<BBox> = raw.iter().map(|a| BBox::from_array(*a).unwrap()).collect();
        let idx = assign_indices(&boxes);
        prop_assert_eq!(idx.len(), boxes.len());
        for (i, _) in idx.iter() {
            prop_assert!(i >= 1 && i as usize <= boxes.len());
        }
        let mut rotated = boxes.clone();
        if !rotated.is_empty() {
            let k = rot % rotated.len();
            rotated.rotate_left(k);
        }
        prop_assert_eq!(assign_indices(&rotated), idx);
    }

    #[test]
    fn random_boxes_stay_local(raw in boxes_strategy(), stroke in 1u32..5) {
        let img = RgbImage::from_fn(160, 120, |x, y| Rgb([(x * 7 % 251) as u8, (y * 13 % 251) as u8, 90]));
        let boxes: Vec<BBox> = raw.iter().map(|a| BBox::from_array(*a).unwrap()).collect();
        let style = VisualPromptStyle { stroke_width_px: stroke, ..Default::default() };
        let vp = render_visual_prompt(&img, &boxes, &style).unwrap();
        let labels: Vec<PixelRect> = vp.labels.iter().map(|l| l.rect).collect();
        assert_local(&img, &vp.image, &vp.boxes_px, &labels, stroke as i64);
    }
}
