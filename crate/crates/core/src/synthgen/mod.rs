//! Synthetic reaction diagrams with exact ground truth.
//!
//! A [`DiagramSpec`] is the abstract recipe (glyphs, reactions, condition
//! texts, identifiers). [`render_spec`] places it on a canvas, draws it and
//! returns the image with its [`AnnotatedDiagram`]. Specs are a pure
//! function of `(seed, layout, n_reactions, params)`; images are a pure
//! function of the spec.

pub mod glyphs;
mod plan;

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_diagram, corpus_to_json};
use crate::model::{AnnotatedDiagram, Component, ImageRef, Layout, ReactionAnnotation};
use crate::render::raster::{draw_arrow, draw_line, draw_text, ink_bounds};
use crate::render::{encode_png, PixelRect};
use crate::BBox;

pub use plan::{multi_line_per_row, plan, Plan, TextBox, TEXT_SCALE};

/// Condition vocabulary, version 1. Append-only.
pub const CONDITIONS_V1: &[&str] = &[
    "NaH THF",
    "Pd/C, H2",
    "H2O, 25°C",
    "DMF, 80°C",
    "K2CO3, DMF",
    "LiAlH4",
    "TFA, DCM",
    "Et3N",
    "NaBH4, MeOH",
    "Pd(PPh3)4",
    "reflux",
    "rt, 12 h",
    "0°C",
    "hv",
    "BuLi, -78°C",
    "HCl, EtOH",
    "mCPBA",
    "DIBAL-H",
];

const INK: Rgb<u8> = Rgb([0, 0, 0]);
const BLANK: Rgb<u8> = Rgb([255, 255, 255]);

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("unrealizable request: {0}")]
    Unrealizable(String),
    #[error("canvas too small for the requested diagram")]
    CanvasTooSmall,
    #[error("placement collision ({0})")]
    Collision(String),
    #[error("invalid generated diagram: {0}")]
    Invalid(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub canvas: (u32, u32),
    pub min_height: u32,
    pub max_height: u32,
    pub identifier_prob: f64,
    pub coreactant_prob: f64,
    /// Sampling attempts before giving up on a placement.
    pub max_attempts: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { canvas: (1024, 768), min_height: 48, max_height: 96, identifier_prob: 0.4, coreactant_prob: 0.35, max_attempts: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub glyph: usize,
    pub width: u32,
    pub height: u32,
    pub identifier: Option<String>,
}

/// Reaction over molecule ordinals of the owning spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    pub reactants: Vec<usize>,
    pub products: Vec<usize>,
    pub conditions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramSpec {
    pub seed: u64,
    pub layout: Layout,
    pub canvas: (u32, u32),
    pub molecules: Vec<MoleculeSpec>,
    pub reactions: Vec<ReactionSpec>,
}

impl DiagramSpec {
    pub fn name(&self) -> String {
        format!("synth-{:016x}-{}", self.seed, self.layout.as_str())
    }

    pub fn image_path(&self) -> String {
        format!("images/{}.png", self.name())
    }
}

/// splitmix64 finalizer over the combined inputs.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn layout_code(layout: Layout) -> u64 {
    Layout::CLASSES.iter().position(|l| *l == layout).map_or(99, |p| p as u64)
}

/// Inclusive reaction-count range the generator accepts per layout.
pub fn reaction_range(layout: Layout) -> Option<(usize, usize)> {
    match layout {
        Layout::SingleLine => Some((1, 4)),
        Layout::MultiLine => Some((1, 7)),
        Layout::Tree => Some((2, 5)),
        Layout::Cyclic => Some((2, 6)),
        Layout::Unknown => None,
    }
}

/// Reaction counts drawn for corpus diagrams.
fn corpus_range(layout: Layout) -> (usize, usize) {
    match layout {
        Layout::SingleLine => (1, 3),
        Layout::MultiLine => (2, 5),
        Layout::Tree => (2, 4),
        _ => (2, 5),
    }
}

/// Reactant and product ordinals of one reaction.
type Edge = (Vec<usize>, Vec<usize>);

fn topology(layout: Layout, n: usize, coreactant: bool) -> (usize, Vec<Edge>) {
    match layout {
        Layout::SingleLine | Layout::MultiLine => {
            let mut rx: Vec<(Vec<usize>, Vec<usize>)> = (0..n).map(|i| (vec![i], vec![i + 1])).collect();
            let mut count = n + 1;
            if coreactant {
                rx[0].0.push(count);
                count += 1;
            }
            (count, rx)
        }
        Layout::Tree => {
            let mut rx = Vec::with_capacity(n);
            for r in 0..n {
                let reactant = match r {
                    0..=2 => 0,
                    3 => 1,
                    _ => r,
                };
                rx.push((vec![reactant], vec![r + 1]));
            }
            (n + 1, rx)
        }
        _ => (n, (0..n).map(|i| (vec![i], vec![(i + 1) % n])).collect()),
    }
}

fn sample_spec(seed: u64, layout: Layout, n: usize, params: &SynthParams, rng: &mut ChaCha8Rng) -> DiagramSpec {
    let coreactant = layout == Layout::SingleLine && rng.random_bool(params.coreactant_prob);
    let (count, topo) = topology(layout, n, coreactant);
    let mut glyph_ids: Vec<usize> = (0..glyphs::GLYPH_COUNT).collect();
    glyph_ids.shuffle(rng);
    let products: Vec<bool> = (0..count).map(|m| topo.iter().any(|(_, p)| p.contains(&m))).collect();
    let molecules = (0..count)
        .map(|m| {
            let glyph = glyph_ids[m % glyph_ids.len()];
            let height = rng.random_range(params.min_height..=params.max_height);
            let aspect = glyphs::aspect(glyph) * rng.random_range(0.85..1.15);
            let width = ((height as f64 * aspect).round() as u32).clamp(40, 170);
            let identifier = (products[m] && rng.random_bool(params.identifier_prob)).then(|| format!("{}{}", m + 1, ['a', 'b', 'c', 'd'][rng.random_range(0..4)]));
            MoleculeSpec { glyph, width, height, identifier }
        })
        .collect();
    let reactions = topo
        .into_iter()
        .map(|(reactants, products)| {
            let k = match rng.random_range(0..20) {
                0..=3 => 0,
                4..=14 => 1,
                _ => 2,
            };
            let mut vocab: Vec<&str> = CONDITIONS_V1.to_vec();
            vocab.shuffle(rng);
            ReactionSpec { reactants, products, conditions: vocab[..k].iter().map(|s| s.to_string()).collect() }
        })
        .collect();
    DiagramSpec { seed, layout, canvas: params.canvas, molecules, reactions }
}

/// Samples a realizable spec. Deterministic in all arguments.
pub fn generate_spec(seed: u64, layout: Layout, n_reactions: usize, params: &SynthParams) -> Result<DiagramSpec, SynthError> {
    let (lo, hi) = reaction_range(layout).ok_or_else(|| SynthError::Unrealizable("layout 'unknown' cannot be generated".into()))?;
    if n_reactions < lo || n_reactions > hi {
        return Err(SynthError::Unrealizable(format!("{} needs {lo}..={hi} reactions, got {n_reactions}", layout.as_str())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, layout_code(layout)), n_reactions as u64));
    let mut last = SynthError::CanvasTooSmall;
    for _ in 0..params.max_attempts.max(1) {
        let spec = sample_spec(seed, layout, n_reactions, params, &mut rng);
        match plan(&spec) {
            Ok(p) if crate::layout::classify_reactions(&planned_reactions(&spec, &p), &[]) == layout => return Ok(spec),
            Ok(_) => last = SynthError::Invalid("placement does not realize the layout".into()),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Reactions over planned target rectangles, for the realizability check.
fn planned_reactions(spec: &DiagramSpec, p: &Plan) -> Vec<ReactionAnnotation> {
    let (w, h) = spec.canvas;
    let to_box = |r: &PixelRect| BBox::from_pixels(r.left as u32, r.top as u32, r.right as u32, r.bottom as u32, w, h).ok();
    let mols = |ids: &[usize]| ids.iter().filter_map(|&m| to_box(&p.molecules[m])).map(Component::mol).collect();
    spec.reactions.iter().map(|r| ReactionAnnotation::new(mols(&r.reactants), vec![], mols(&r.products))).collect()
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: RgbImage,
    pub diagram: AnnotatedDiagram,
}

fn pixel_box(r: &PixelRect, w: u32, h: u32) -> Result<BBox, SynthError> {
    let c = r.clip(w, h);
    BBox::from_pixels(c.left as u32, c.top as u32, c.right as u32, c.bottom as u32, w, h).map_err(|e| SynthError::Invalid(e.to_string()))
}

/// Draws the spec and derives the exact annotation.
pub fn render_spec(spec: &DiagramSpec) -> Result<Rendered, SynthError> {
    let p = plan(spec)?;
    let (w, h) = spec.canvas;
    let mut img = RgbImage::from_pixel(w, h, BLANK);

    let mut mol_boxes = Vec::with_capacity(spec.molecules.len());
    for (m, ms) in spec.molecules.iter().enumerate() {
        let r = p.molecules[m];
        for (a, b) in glyphs::fitted(ms.glyph, r.left as f64, r.top as f64, r.width() as f64, r.height() as f64, 2.0) {
            draw_line(&mut img, a, b, plan::STROKE, INK);
        }
        let ink = ink_bounds(&img, r.expand(3)).ok_or_else(|| SynthError::Invalid(format!("glyph {m} drew nothing")))?;
        mol_boxes.push(pixel_box(&ink, w, h)?);
    }
    for &(a, b) in &p.arrows {
        draw_arrow(&mut img, a, b, plan::STROKE, plan::ARROW_HEAD, INK);
    }
    for &(x, y) in &p.pluses {
        draw_line(&mut img, (x - 8.0, y), (x + 8.0, y), plan::STROKE, INK);
        draw_line(&mut img, (x, y - 8.0), (x, y + 8.0), plan::STROKE, INK);
    }
    for t in p.text_boxes() {
        draw_text(&mut img, t.rect.left, t.rect.top, &t.text, TEXT_SCALE, INK);
    }

    let ident = |m: usize| -> Result<Option<Component>, SynthError> {
        match &p.identifiers[m] {
            Some(t) => Ok(Some(Component::idt(&t.text).with_bbox(pixel_box(&t.rect, w, h)?))),
            None => Ok(None),
        }
    };
    let role = |ids: &[usize]| -> Result<Vec<Component>, SynthError> {
        let mut out = Vec::new();
        for &m in ids {
            out.push(Component::mol(mol_boxes[m]));
            out.extend(ident(m)?);
        }
        Ok(out)
    };
    let mut reactions = Vec::with_capacity(spec.reactions.len());
    for (k, r) in spec.reactions.iter().enumerate() {
        let conditions = p.conditions[k].iter().map(|t| Ok(Component::txt(&t.text).with_bbox(pixel_box(&t.rect, w, h)?))).collect::<Result<Vec<_>, SynthError>>()?;
        reactions.push(ReactionAnnotation::new(role(&r.reactants)?, conditions, role(&r.products)?));
    }
    let image = ImageRef { path: spec.image_path(), width: w, height: h };
    let diagram = build_diagram(image, mol_boxes, reactions, spec.layout).map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok(Rendered { image: img, diagram })
}

/// Flips a `rate` fraction of pixels to black or white (salt and pepper).
pub fn add_salt_pepper(img: &mut RgbImage, rate: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for px in img.pixels_mut() {
        if rng.random_bool(rate) {
            *px = if rng.random_bool(0.5) { INK } else { BLANK };
        }
    }
}

/// Balanced synthetic corpus: specs plus their annotations. Images are
/// re-rendered on demand rather than held in memory.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub seed: u64,
    pub specs: Vec<DiagramSpec>,
    pub diagrams: Vec<AnnotatedDiagram>,
}

impl SynthCorpus {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn image(&self, i: usize) -> Result<RgbImage, SynthError> {
        render_spec(&self.specs[i]).map(|r| r.image)
    }
}

/// Spec of the `ordinal`-th corpus diagram.
pub fn corpus_spec(seed: u64, ordinal: u64, layout: Layout, params: &SynthParams) -> Result<DiagramSpec, SynthError> {
    let sub = mix(seed, ordinal);
    let (lo, hi) = corpus_range(layout);
    let n = ChaCha8Rng::seed_from_u64(sub ^ 0x5EED).random_range(lo..=hi);
    generate_spec(sub, layout, n, params)
}

/// `per_layout` diagrams for each of the four layouts, in layout order.
pub fn generate_corpus(seed: u64, per_layout: usize, params: &SynthParams) -> Result<SynthCorpus, SynthError> {
    if per_layout == 0 {
        return Err(SynthError::Unrealizable("per_layout must be at least 1".into()));
    }
    let jobs: Vec<(u64, Layout)> = Layout::CLASSES
        .iter()
        .enumerate()
        .flat_map(|(li, &l)| (0..per_layout).map(move |j| ((li * per_layout + j) as u64, l)))
        .collect();
    let rendered: Vec<(DiagramSpec, AnnotatedDiagram)> = jobs
        .par_iter()
        .map(|&(ordinal, layout)| {
            let spec = corpus_spec(seed, ordinal, layout, params)?;
            let r = render_spec(&spec)?;
            Ok((spec, r.diagram))
        })
        .collect::<Result<_, SynthError>>()?;
    let (specs, diagrams) = rendered.into_iter().unzip();
    Ok(SynthCorpus { seed, specs, diagrams })
}

/// One manifest line per written file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub hash: String,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| SynthError::Write { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| SynthError::Write { path: path.to_path_buf(), source })
}

/// Writes `corpus.json`, one PNG per diagram and `manifest.json` under
/// `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<Manifest, SynthError> {
    let mut files: Vec<ManifestEntry> = corpus
        .specs
        .par_iter()
        .map(|spec| {
            let png = encode_png(&render_spec(spec)?.image);
            let rel = spec.image_path();
            write_file(&dir.join(&rel), &png)?;
            Ok(ManifestEntry { path: rel, sha256: sha_hex(&png) })
        })
        .collect::<Result<_, SynthError>>()?;
    let json = corpus_to_json(&corpus.diagrams);
    write_file(&dir.join("corpus.json"), json.as_bytes())?;
    files.push(ManifestEntry { path: "corpus.json".into(), sha256: sha_hex(json.as_bytes()) });
    let listing: String = files.iter().map(|f| format!("{}  {}\n", f.sha256, f.path)).collect();
    let manifest = Manifest { hash: sha_hex(listing.as_bytes()), files };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| SynthError::Invalid(e.to_string()))?;
    write_file(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}
