//! End-to-end runs over a corpus: detect, render, prompt, parse, resolve,
//! evaluate, report.
//!
//! Predictions are kept in a newline-delimited JSON store, one
//! [`PredictionRecord`] per diagram and run configuration, so evaluation is a
//! pure function of the store and re-runs resume where they stopped.

mod report;
mod run;
mod store;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::backend::{sha256_hex, DecodeParams};
use crate::model::{AnnotatedDiagram, Strategy};
use crate::render::VisualPromptStyle;
use crate::synthgen::SynthCorpus;

pub use report::{emit_report, layout_csv, report_csv, report_markdown, report_svg, ReportFormat, ReportRow};
pub use run::{
    evaluate_records, gt_extraction, run_ablation, run_ocr, run_pipeline, run_vqa, AblationMode, AblationResult, Aggregation, OcrRecord, PipelineRun,
    VqaRecord, VqaRun,
};
pub use store::{latest_records, load_records, PredictionStore};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("prediction store {path}: {message}")]
    Store { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// Where the boxes drawn on a visual prompt come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoxSource {
    #[default]
    Detected,
    Gt,
}

impl fmt::Display for BoxSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxSource::Detected => "detected",
            BoxSource::Gt => "gt",
        })
    }
}

impl FromStr for BoxSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "detected" => Ok(BoxSource::Detected),
            "gt" | "ground-truth" => Ok(BoxSource::Gt),
            other => Err(format!("unknown box source '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub boxes: BoxSource,
    pub style: VisualPromptStyle,
    pub decode: DecodeParams,
    /// Diagram-level parallelism; 1 runs on the calling thread.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { strategy: Strategy::Bivp, boxes: BoxSource::Detected, style: VisualPromptStyle::default(), decode: DecodeParams::default(), workers: 1 }
    }
}

impl RunConfig {
    /// Identity of a run for resumption: everything that can change a reply.
    pub fn hash(&self, detector: &str, backend: &str) -> String {
        let key = serde_json::json!({
            "strategy": self.strategy,
            "boxes": self.boxes,
            "detector": detector,
            "backend": backend,
            "style": self.style.hash(),
            "decode": self.decode,
        });
        sha256_hex(key.to_string().as_bytes())[..16].to_string()
    }
}

/// Supplies the raster of a corpus diagram.
pub trait ImageSource: Sync {
    fn image(&self, diagram: &AnnotatedDiagram) -> Result<RgbImage, String>;
}

/// Images on disk, relative to the corpus directory.
#[derive(Debug, Clone)]
pub struct DirImages {
    pub root: PathBuf,
}

impl ImageSource for DirImages {
    fn image(&self, diagram: &AnnotatedDiagram) -> Result<RgbImage, String> {
        let path = self.root.join(&diagram.image.path);
        image::open(&path).map(|i| i.to_rgb8()).map_err(|e| format!("{}: {e}", path.display()))
    }
}

impl ImageSource for SynthCorpus {
    fn image(&self, diagram: &AnnotatedDiagram) -> Result<RgbImage, String> {
        let i = self.diagrams.iter().position(|d| d.id() == diagram.id()).ok_or_else(|| format!("'{}' is not in this corpus", diagram.id()))?;
        SynthCorpus::image(self, i).map_err(|e| e.to_string())
    }
}

/// Stage at which a diagram's run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureStage {
    Image,
    Detector,
    Render,
    Backend,
    ReplayMiss,
    Parse,
    Resolve,
}

impl fmt::Display for FailureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureStage::Image => "image",
            FailureStage::Detector => "detector",
            FailureStage::Render => "render",
            FailureStage::Backend => "backend",
            FailureStage::ReplayMiss => "replay-miss",
            FailureStage::Parse => "parse",
            FailureStage::Resolve => "resolve",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub stage: FailureStage,
    /// Finer class, e.g. the parse failure class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    pub message: String,
}

impl RecordFailure {
    pub fn label(&self) -> String {
        match &self.class {
            Some(c) => format!("{}:{c}", self.stage),
            None => self.stage.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: Strategy,
    pub boxes: BoxSource,
    pub detector: String,
    pub backend: String,
    pub style_hash: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

/// One diagram's outcome under one run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: String,
    pub config_hash: String,
    pub provenance: Provenance,
    /// Boxes drawn on the visual prompt, index `i` at position `i - 1`.
    #[serde(default)]
    pub index_map: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(with = "reactions_serde")]
    pub reactions: Vec<crate::model::ReactionAnnotation>,
    #[serde(default)]
    pub dropped_reactions: usize,
    #[serde(default)]
    pub duplicates_removed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RecordFailure>,
}

impl PredictionRecord {
    /// Backend failures other than replay misses may succeed on a re-run.
    pub fn is_retryable(&self) -> bool {
        self.failure.as_ref().is_some_and(|f| f.stage == FailureStage::Backend)
    }
}

mod reactions_serde {
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    use crate::corpus::{reactions_from_value, reactions_to_value};
    use crate::model::ReactionAnnotation;

    pub fn serialize<S: Serializer>(r: &[ReactionAnnotation], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_some(&reactions_to_value(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ReactionAnnotation>, D::Error> {
        let v = Value::deserialize(d)?;
        reactions_from_value(&v).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn unix_ms() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}
