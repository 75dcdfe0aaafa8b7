mod common;

use common::oracle_iou;
use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rxndp_core::detector::{detect_blobs, detections_to_json, evaluate_detector, parse_detections, BlobParams, Detections, DetectorError};
use rxndp_core::synthgen::{add_salt_pepper, generate_corpus, SynthParams};
use rxndp_core::BBox;

/// 4-connected components by breadth-first flood fill.
fn flood_components(img: &RgbImage) -> Vec<[u32; 4]> {
    let (w, h) = img.dimensions();
    let ink = |x: u32, y: u32| img.get_pixel(x, y).0.iter().map(|&c| c as u32).sum::<u32>() < 3 * 128;
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if seen[(y0 * w + x0) as usize] || !ink(x0, y0) {
                continue;
            }
            let mut r = [x0, y0, x0 + 1, y0 + 1];
            let mut queue = std::collections::VecDeque::from([(x0, y0)]);
            seen[(y0 * w + x0) as usize] = true;
            while let Some((x, y)) = queue.pop_front() {
                r = [r[0].min(x), r[1].min(y), r[2].max(x + 1), r[3].max(y + 1)];
                let nbrs = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
                for (nx, ny) in nbrs {
                    if nx < w && ny < h && !seen[(ny * w + nx) as usize] && ink(nx, ny) {
                        seen[(ny * w + nx) as usize] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            out.push(r);
        }
    }
    out
}

fn norm(r: [u32; 4], w: u32, h: u32) -> [f64; 4] {
    [r[0] as f64 / w as f64, r[1] as f64 / h as f64, r[2] as f64 / w as f64, r[3] as f64 / h as f64]
}

#[test]
fn blank_image_has_no_boxes() {
    let img = RgbImage::from_pixel(320, 200, Rgb([255, 255, 255]));
    assert!(detect_blobs(&img, &BlobParams::default()).is_empty());
}

#[test]
fn synthetic_glyphs_are_each_found() {
    let corpus = generate_corpus(5, 5, &SynthParams::default()).unwrap();
    for (i, d) in corpus.diagrams.iter().enumerate() {
        let boxes = detect_blobs(&corpus.image(i).unwrap(), &BlobParams::default());
        assert_eq!(boxes.len(), d.molecules.len(), "{}", d.id());
        for g in &d.molecules {
            let best = boxes.iter().map(|b| oracle_iou(g.to_array(), b.to_array())).fold(0.0, f64::max);
            assert!(best > 0.5, "{}: {g} best IoU {best}", d.id());
        }
    }
}

#[test]
fn salt_and_pepper_keeps_precision_and_recall() {
    let corpus = generate_corpus(9, 5, &SynthParams::default()).unwrap();
    let mut dets = Detections::new();
    for (i, d) in corpus.diagrams.iter().enumerate() {
        let mut img = corpus.image(i).unwrap();
        add_salt_pepper(&mut img, 0.01, i as u64);
        dets.insert(d.id().to_string(), detect_blobs(&img, &BlobParams::default()));
    }
    let c = evaluate_detector(&corpus.diagrams, &dets);
    assert!(c.precision() >= 0.9 && c.recall() >= 0.9, "P {} R {}", c.precision(), c.recall());
}

#[test]
fn ground_truth_as_detections_is_perfect() {
    let corpus = generate_corpus(1, 3, &SynthParams::default()).unwrap();
    let dets: Detections = corpus.diagrams.iter().map(|d| (d.id().to_string(), d.molecules.clone())).collect();
    let c = evaluate_detector(&corpus.diagrams, &dets);
    assert_eq!((c.precision(), c.recall()), (1.0, 1.0));
    let c = evaluate_detector(&corpus.diagrams, &Detections::new());
    assert_eq!((c.matched, c.n_pred), (0, 0));
    assert_eq!(c.recall(), 0.0);
}

#[test]
fn detections_file_round_trip() {
    let corpus = generate_corpus(2, 2, &SynthParams::default()).unwrap();
    let dets: Detections = corpus.diagrams.iter().enumerate().map(|(i, d)| (d.id().to_string(), detect_blobs(&corpus.image(i).unwrap(), &BlobParams::default()))).collect();
    assert_eq!(parse_detections(&detections_to_json(&dets)).unwrap(), dets);

    let one = parse_detections(r#"{"d1": [[0, 0, 0.1, 0.1]]}"#).unwrap();
    assert_eq!(one["d1"], vec![BBox::new(0.0, 0.0, 0.1, 0.1).unwrap()]);
    match parse_detections(r#"{"d1": [[0.5, 0, 0.1, 0.1]]}"#) {
        Err(DetectorError::Schema { id, .. }) => assert_eq!(id, "d1"),
        other => panic!("{other:?}"),
    }
}

fn separated_rects() -> impl Strategy<Value = Vec<[u32; 4]>> {
    // one rectangle per 80 px cell, so merge gaps never bridge two
    proptest::collection::vec((any::<bool>(), 0u32..20, 0u32..20, 26u32..55, 26u32..55), 12).prop_map(|cells| {
        cells
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.0)
            .map(|(k, (_, dx, dy, w, h))| {
                let (cx, cy) = ((k as u32 % 4) * 80, (k as u32 / 4) * 80);
                [cx + dx, cy + dy, cx + dx + w.min(60 - dx), cy + dy + h.min(60 - dy)]
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filled_rectangles_match_flood_fill(rects in separated_rects()) {
        let mut img = RgbImage::from_pixel(320, 240, Rgb([255, 255, 255]));
        for r in &rects {
            for y in r[1]..r[3] {
                for x in r[0]..r[2] {
                    img.put_pixel(x, y, Rgb([0, 0, 0]));
                }
            }
        }
        let found = detect_blobs(&img, &BlobParams::default());
        let oracle = flood_components(&img);
        prop_assert_eq!(found.len(), oracle.len());
        for o in &oracle {
            let want = norm(*o, 320, 240);
            prop_assert!(found.iter().any(|b| oracle_iou(b.to_array(), want) > 0.99));
        }
        for (i, a) in found.iter().enumerate() {
            for b in &found[i + 1..] {
                prop_assert_ne!(a, b);
            }
        }
        prop_assert_eq!(detect_blobs(&img, &BlobParams::default()), found);
    }
}
