use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::store::{latest_records, load_records, PredictionStore};
use super::{unix_ms, BoxSource, FailureStage, HarnessError, ImageSource, PredictionRecord, Provenance, RecordFailure, RunConfig};
use crate::backend::{Backend, BackendError, CompletionRequest, DecodeParams, RequestContext};
use crate::detector::Detector;
use crate::matching::{evaluate, MatchKind, MatchMode};
use crate::metrics::{aggregate, DiagramCounts, MatchReport};
use crate::model::{AnnotatedDiagram, ReactionAnnotation, Role, Strategy};
use crate::output::parse_output;
use crate::prompts::{build_prompt, parse_ocr_reply, PromptKind};
use crate::render::{assign_indices, box_to_pixels, encode_png, render_visual_prompt, BoxIndex};
use crate::vqa::{parse_vqa_reply, score_vqa, vqa_ground_truth, VqaAnswer, VqaItem, VqaQuestion, VqaScores};
use crate::BBox;

fn par_map<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>, HarnessError> {
    if workers == 0 {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }
    if workers == 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn failure(stage: FailureStage, class: Option<String>, message: impl ToString) -> RecordFailure {
    RecordFailure { stage, class, message: message.to_string() }
}

fn backend_failure(e: &BackendError) -> RecordFailure {
    match e {
        BackendError::ReplayMiss { .. } => failure(FailureStage::ReplayMiss, None, e),
        _ => failure(FailureStage::Backend, None, e),
    }
}

/// Resolves indices that exist and leaves the others without a box, so a
/// reaction citing a missing index can still be scored (as a miss).
fn resolve_lenient(reactions: &mut [ReactionAnnotation], index: &BoxIndex) -> Vec<u32> {
    let mut dangling = Vec::new();
    for c in reactions.iter_mut().flat_map(|r| r.components_mut()) {
        if let (true, Some(i)) = (c.is_mol(), c.index) {
            c.bbox = index.get(i).copied();
            if c.bbox.is_none() && !dangling.contains(&i) {
                dangling.push(i);
            }
        }
    }
    dangling
}

struct Ids<'a> {
    detector: &'a str,
    backend: &'a str,
    hash: &'a str,
}

fn run_one(d: &AnnotatedDiagram, images: &dyn ImageSource, detector: &dyn Detector, backend: &dyn Backend, config: &RunConfig, ids: &Ids) -> PredictionRecord {
    let started = unix_ms();
    let mut rec = PredictionRecord {
        image_id: d.id().to_string(),
        config_hash: ids.hash.to_string(),
        provenance: Provenance {
            strategy: config.strategy,
            boxes: config.boxes,
            detector: ids.detector.to_string(),
            backend: ids.backend.to_string(),
            style_hash: config.style.hash(),
            started_unix_ms: started,
            finished_unix_ms: started,
        },
        index_map: Vec::new(),
        raw: None,
        reactions: Vec::new(),
        dropped_reactions: 0,
        duplicates_removed: 0,
        failure: None,
    };
    rec.failure = fill_record(&mut rec, d, images, detector, backend, config).err();
    rec.provenance.finished_unix_ms = unix_ms();
    rec
}

fn fill_record(
    rec: &mut PredictionRecord,
    d: &AnnotatedDiagram,
    images: &dyn ImageSource,
    detector: &dyn Detector,
    backend: &dyn Backend,
    config: &RunConfig,
) -> Result<(), RecordFailure> {
    let img = images.image(d).map_err(|e| failure(FailureStage::Image, None, e))?;
    let (png, index) = match config.strategy {
        Strategy::Bros => (encode_png(&img), None),
        Strategy::Bivp => {
            let boxes = match config.boxes {
                BoxSource::Gt => d.molecules.clone(),
                BoxSource::Detected => detector.detect(d.id(), &img).map_err(|e| failure(FailureStage::Detector, None, e))?,
            };
            let vp = render_visual_prompt(&img, &boxes, &config.style).map_err(|e| failure(FailureStage::Render, None, e))?;
            rec.index_map = vp.index.boxes().iter().map(|b| b.to_array()).collect();
            (encode_png(&vp.image), Some(vp.index))
        }
    };
    let kind = match config.strategy {
        Strategy::Bros => PromptKind::Bros,
        Strategy::Bivp => PromptKind::Bivp,
    };
    let mut req = CompletionRequest::new(build_prompt(kind), png, RequestContext { image_id: d.id().to_string(), index_map: index.clone(), region: None });
    req.decode = config.decode;
    req.backend_id = rec.provenance.backend.clone();
    let raw = backend.complete(&req).map_err(|e| backend_failure(&e))?;
    rec.raw = Some(raw.clone());
    let parsed = parse_output(&raw, config.strategy).map_err(|e| {
        let class = serde_json::to_value(e.class()).ok().and_then(|v| v.as_str().map(str::to_string));
        failure(FailureStage::Parse, class, e)
    })?;
    rec.dropped_reactions = parsed.dropped_reactions;
    rec.duplicates_removed = parsed.duplicates_removed;
    rec.reactions = parsed.reactions;
    if let Some(index) = index {
        let dangling = resolve_lenient(&mut rec.reactions, &index);
        if !dangling.is_empty() {
            return Err(failure(FailureStage::Resolve, None, format!("indices {dangling:?} are not on the visual prompt")));
        }
    }
    Ok(())
}

/// Outcome of [`run_pipeline`]: records in corpus order.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub config_hash: String,
    pub records: Vec<PredictionRecord>,
    /// Records taken from the store instead of recomputed.
    pub reused: usize,
}

impl PipelineRun {
    /// Failure label → count.
    pub fn failures(&self) -> BTreeMap<String, usize> {
        failure_counts(&self.records)
    }
}

pub(crate) fn failure_counts(records: &[PredictionRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for f in records.iter().filter_map(|r| r.failure.as_ref()) {
        *out.entry(f.label()).or_insert(0) += 1;
    }
    out
}

/// Runs every diagram through detect → render → prompt → parse → resolve.
/// Failures are recorded per diagram. With a store, completed records for
/// the same configuration are reused and new ones appended as they finish.
pub fn run_pipeline(
    corpus: &[AnnotatedDiagram],
    images: &dyn ImageSource,
    detector: &dyn Detector,
    backend: &dyn Backend,
    config: &RunConfig,
    store: Option<&PredictionStore>,
) -> Result<PipelineRun, HarnessError> {
    config.style.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let (detector_id, backend_id) = (detector.name(), backend.id());
    let hash = config.hash(&detector_id, &backend_id);
    let mut done: HashMap<String, PredictionRecord> = match store {
        Some(s) => latest_records(load_records(s.path())?, Some(&hash)),
        None => HashMap::new(),
    };
    done.retain(|_, r| !r.is_retryable());
    let todo: Vec<&AnnotatedDiagram> = corpus.iter().filter(|d| !done.contains_key(d.id())).collect();
    let reused = corpus.len() - todo.len();
    let ids = Ids { detector: &detector_id, backend: &backend_id, hash: &hash };
    let fresh = par_map(config.workers, &todo, |d| {
        let rec = run_one(d, images, detector, backend, config, &ids);
        let written = store.map(|s| s.append(&rec)).transpose();
        written.map(|_| rec)
    })?;
    for rec in fresh {
        let rec = rec?;
        done.insert(rec.image_id.clone(), rec);
    }
    let records = corpus.iter().filter_map(|d| done.remove(d.id())).collect();
    Ok(PipelineRun { config_hash: hash, records, reused })
}

/// Scores stored predictions. Diagrams without a record count as all-FN;
/// when several records share an image the last one wins.
pub fn evaluate_records(corpus: &[AnnotatedDiagram], records: &[PredictionRecord], mode: &MatchMode) -> (MatchReport, Vec<DiagramCounts>) {
    let by_id: HashMap<&str, &PredictionRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let per: Vec<DiagramCounts> = corpus
        .iter()
        .map(|d| {
            let pred = by_id.get(d.id()).map(|r| r.reactions.as_slice()).unwrap_or(&[]);
            DiagramCounts { layout: d.layout, counts: evaluate(&d.reactions, pred, mode).counts }
        })
        .collect();
    (aggregate(&per, mode.kind), per)
}

/// Corpus aggregation of per-diagram counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Micro,
    Macro,
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(Aggregation::Micro),
            "macro" => Ok(Aggregation::Macro),
            other => Err(format!("unknown aggregation '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    Full,
    GtBoxes,
    GtExtraction,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [AblationMode::Full, AblationMode::GtBoxes, AblationMode::GtExtraction];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::GtBoxes => "gt-boxes",
            AblationMode::GtExtraction => "gt-extraction",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| format!("unknown ablation mode '{s}' (expected full, gt-boxes or gt-extraction)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub mode: AblationMode,
    pub soft: MatchReport,
    pub hybrid: MatchReport,
    pub failures: BTreeMap<String, usize>,
}

/// Ground-truth reactions re-expressed on `detected` boxes: each molecule
/// takes the detected box overlapping it most (IoU > 0.5); a reaction with
/// any unrecalled molecule is dropped.
pub fn gt_extraction(d: &AnnotatedDiagram, detected: &[BBox]) -> Vec<ReactionAnnotation> {
    let index = assign_indices(detected);
    d.reactions
        .iter()
        .filter_map(|r| {
            let mut r = r.clone();
            for role in Role::ALL {
                for c in r.role_mut(role).iter_mut().filter(|c| c.is_mol()) {
                    let i = c.bbox.and_then(|b| index.best_match(&b, 0.5))?;
                    c.index = Some(i);
                    c.bbox = index.get(i).copied();
                }
            }
            Some(r)
        })
        .collect()
}

/// One row of the progressive-ideal study.
pub fn run_ablation(
    corpus: &[AnnotatedDiagram],
    images: &dyn ImageSource,
    detector: &dyn Detector,
    backend: &dyn Backend,
    mode: AblationMode,
    config: &RunConfig,
    store: Option<&PredictionStore>,
) -> Result<AblationResult, HarnessError> {
    let records = match mode {
        AblationMode::Full | AblationMode::GtBoxes => {
            let boxes = if mode == AblationMode::Full { BoxSource::Detected } else { BoxSource::Gt };
            let cfg = RunConfig { boxes, ..config.clone() };
            run_pipeline(corpus, images, detector, backend, &cfg, store)?.records
        }
        AblationMode::GtExtraction => {
            let detector_id = detector.name();
            let hash = format!("gt-extraction:{detector_id}");
            par_map(config.workers, corpus, |d| {
                let started = unix_ms();
                let detected = images.image(d).map_err(|e| failure(FailureStage::Image, None, e)).and_then(|img| {
                    detector.detect(d.id(), &img).map_err(|e| failure(FailureStage::Detector, None, e))
                });
                let (reactions, fail, index_map) = match detected {
                    Ok(boxes) => (gt_extraction(d, &boxes), None, assign_indices(&boxes).boxes().iter().map(|b| b.to_array()).collect()),
                    Err(f) => (Vec::new(), Some(f), Vec::new()),
                };
                PredictionRecord {
                    image_id: d.id().to_string(),
                    config_hash: hash.clone(),
                    provenance: Provenance {
                        strategy: Strategy::Bivp,
                        boxes: BoxSource::Detected,
                        detector: detector_id.clone(),
                        backend: "ground-truth".into(),
                        style_hash: String::new(),
                        started_unix_ms: started,
                        finished_unix_ms: unix_ms(),
                    },
                    index_map,
                    raw: None,
                    reactions,
                    dropped_reactions: 0,
                    duplicates_removed: 0,
                    failure: fail,
                }
            })?
        }
    };
    Ok(AblationResult {
        mode,
        soft: evaluate_records(corpus, &records, &MatchMode::new(MatchKind::Soft)).0,
        hybrid: evaluate_records(corpus, &records, &MatchMode::new(MatchKind::Hybrid)).0,
        failures: failure_counts(&records),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRecord {
    pub image_id: String,
    pub question: VqaQuestion,
    pub gt: VqaAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    pub pred: Option<VqaAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqaRun {
    pub records: Vec<VqaRecord>,
    pub scores: VqaScores,
}

/// Asks every question about every diagram. Backend and decoding failures
/// count as wrong answers and are kept on the record.
pub fn run_vqa(
    corpus: &[AnnotatedDiagram],
    images: &dyn ImageSource,
    backend: &dyn Backend,
    questions: &[VqaQuestion],
    decode: DecodeParams,
    workers: usize,
) -> Result<VqaRun, HarnessError> {
    let per_diagram = par_map(workers, corpus, |d| {
        let truth = vqa_ground_truth(d);
        let png = images.image(d).map(|img| encode_png(&img));
        questions
            .iter()
            .map(|&q| {
                let mut rec = VqaRecord { image_id: d.id().to_string(), question: q, gt: truth.answer(q), raw: None, pred: None, error: None };
                let png = match &png {
                    Ok(p) => p.clone(),
                    Err(e) => {
                        rec.error = Some(format!("image: {e}"));
                        return rec;
                    }
                };
                let mut req = CompletionRequest::new(build_prompt(q.prompt_kind()), png, RequestContext { image_id: d.id().to_string(), ..Default::default() });
                req.decode = decode;
                match backend.complete(&req) {
                    Ok(raw) => {
                        match parse_vqa_reply(q, &raw) {
                            Ok(a) => rec.pred = Some(a),
                            Err(e) => rec.error = Some(format!("decode: {e}")),
                        }
                        rec.raw = Some(raw);
                    }
                    Err(e) => rec.error = Some(format!("backend: {e}")),
                }
                rec
            })
            .collect::<Vec<_>>()
    })?;
    let records: Vec<VqaRecord> = per_diagram.into_iter().flatten().collect();
    let items: Vec<VqaItem> = records.iter().map(|r| VqaItem { question: r.question, gt: r.gt, pred: r.pred }).collect();
    Ok(VqaRun { scores: score_vqa(&items), records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrRecord {
    pub image_id: String,
    pub region: [f64; 4],
    /// Recognized text; `None` when the crop was judged a structure.
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

const CROP_PAD_PX: i64 = 4;

/// Crops every molecule box and every boxed text component and transcribes
/// it with the OCR prompt.
pub fn run_ocr(corpus: &[AnnotatedDiagram], images: &dyn ImageSource, backend: &dyn Backend, decode: DecodeParams, workers: usize) -> Result<Vec<OcrRecord>, HarnessError> {
    let per_diagram = par_map(workers, corpus, |d| {
        let mut regions: Vec<BBox> = d.molecules.clone();
        for b in d.reactions.iter().flat_map(|r| r.components()).filter(|c| c.kind.is_text()).filter_map(|c| c.bbox) {
            if !regions.iter().any(|r| crate::geometry::same_box(r, &b)) {
                regions.push(b);
            }
        }
        let img = images.image(d);
        regions
            .iter()
            .map(|region| {
                let mut rec = OcrRecord { image_id: d.id().to_string(), region: region.to_array(), text: None, raw: None, error: None };
                let img = match &img {
                    Ok(i) => i,
                    Err(e) => {
                        rec.error = Some(format!("image: {e}"));
                        return rec;
                    }
                };
                let (w, h) = img.dimensions();
                let px = box_to_pixels(region, w, h).expand(CROP_PAD_PX).clip(w, h);
                let crop = image::imageops::crop_imm(img, px.left as u32, px.top as u32, px.width() as u32, px.height() as u32).to_image();
                let ctx = RequestContext { image_id: d.id().to_string(), index_map: None, region: Some(*region) };
                let mut req = CompletionRequest::new(build_prompt(PromptKind::Ocr), encode_png(&crop), ctx);
                req.decode = decode;
                match backend.complete(&req) {
                    Ok(raw) => {
                        rec.text = parse_ocr_reply(&raw);
                        rec.raw = Some(raw);
                    }
                    Err(e) => rec.error = Some(format!("backend: {e}")),
                }
                rec
            })
            .collect::<Vec<_>>()
    })?;
    Ok(per_diagram.into_iter().flatten().collect())
}
