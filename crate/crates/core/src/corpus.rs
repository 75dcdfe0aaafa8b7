//! Corpus files: JSON arrays of diagram records in either of two component
//! dialects.
//!
//! * `rxncaption`: `{"kind": "mol", "bbox": [...]}` or
//!   `{"kind": "txt" | "idt", "content": "..."}`; text may also carry a
//!   `bbox`, molecules an `index`.
//! * `rxnscribe`: `{"category": "structure" | "text" | "identifier" |
//!   "supplement", "bbox": [...]}` with optional `content`.
//!
//! Both share the record shape `{"image", "width", "height", "layout",
//! "molecules", "reactions"}`. Saving always writes `rxncaption`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{normalize_text, AnnotatedDiagram, Component, ComponentKind, ImageRef, Layout, ReactionAnnotation, Role};
use crate::render::assign_indices;
use crate::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    RxnScribe,
    RxnCaption,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rxnscribe" => Ok(CorpusFormat::RxnScribe),
            "rxncaption" => Ok(CorpusFormat::RxnCaption),
            other => Err(format!("unknown corpus format '{other}'")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("corpus is not a JSON array of records: {0}")]
    NotArray(String),
    #[error("record {ordinal}: {field}: {message}")]
    Record { ordinal: usize, field: String, message: String },
}

/// Problem found while assembling one diagram; `field` is a JSON path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct DiagramError {
    pub field: String,
    pub message: String,
}

impl DiagramError {
    fn new(field: impl Into<String>, message: impl ToString) -> Self {
        Self { field: field.into(), message: message.to_string() }
    }
}

/// Validates ground truth and fixes molecule indices.
///
/// When no mol component carries an index, `molecules` is put in reading
/// order and indices follow it; otherwise given indices must agree with the
/// given order. Missing molecule lists are rebuilt from reaction boxes.
pub fn build_diagram(
    image: ImageRef,
    mut molecules: Vec<BBox>,
    mut reactions: Vec<ReactionAnnotation>,
    layout: Layout,
) -> Result<AnnotatedDiagram, DiagramError> {
    if image.width == 0 || image.height == 0 {
        return Err(DiagramError::new("width/height", "image dimensions must be positive"));
    }
    let any_index = reactions.iter().flat_map(|r| r.components()).any(|c| c.is_mol() && c.index.is_some());
    if molecules.is_empty() {
        for c in reactions.iter().flat_map(|r| r.components()) {
            if let (true, Some(b)) = (c.is_mol(), c.bbox) {
                if !molecules.iter().any(|m| crate::geometry::same_box(m, &b)) {
                    molecules.push(b);
                }
            }
        }
    }
    for (i, m) in molecules.iter().enumerate() {
        if molecules[..i].iter().any(|p| crate::geometry::same_box(p, m)) {
            return Err(DiagramError::new(format!("molecules[{i}]"), "duplicate molecule box"));
        }
    }
    if !any_index {
        molecules = assign_indices(&molecules).boxes().to_vec();
    }
    let diagram_stub = AnnotatedDiagram { image, molecules, reactions: Vec::new(), layout };

    for (k, r) in reactions.iter_mut().enumerate() {
        for role in Role::ALL {
            for (i, c) in r.role_mut(role).iter_mut().enumerate() {
                let at = |f: &str| format!("reactions[{k}].{role}[{i}]{f}");
                if let Some(content) = c.content.take() {
                    let n = normalize_text(&content);
                    c.content = (!n.is_empty()).then_some(n);
                }
                c.validate().map_err(|e| DiagramError::new(at(""), e))?;
                if !c.is_mol() {
                    continue;
                }
                match (c.bbox, c.index) {
                    (None, Some(idx)) => {
                        let b = diagram_stub.molecules.get(idx as usize - 1).ok_or_else(|| DiagramError::new(at(".index"), format!("index {idx} exceeds molecule count")))?;
                        c.bbox = Some(*b);
                    }
                    (Some(b), given) => {
                        let pos = diagram_stub.molecule_index(&b).ok_or_else(|| DiagramError::new(at(".bbox"), format!("{b} is not among the diagram's molecules")))?;
                        if given.is_some_and(|g| g != pos) {
                            return Err(DiagramError::new(at(".index"), format!("index {} disagrees with molecule position {pos}", given.unwrap())));
                        }
                        c.index = Some(pos);
                    }
                    (None, None) => unreachable!("validated"),
                }
            }
        }
        r.validate().map_err(|e| DiagramError::new(format!("reactions[{k}]"), e))?;
    }
    Ok(AnnotatedDiagram { reactions, ..diagram_stub })
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagramRecord {
    image: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<String>,
    #[serde(default)]
    molecules: Vec<[f64; 4]>,
    #[serde(default)]
    reactions: Vec<ReactionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReactionRecord {
    #[serde(default)]
    reactants: Vec<Value>,
    #[serde(default)]
    conditions: Vec<Value>,
    #[serde(default)]
    products: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaptionComponent {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ScribeComponent {
    category: String,
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    content: Option<String>,
}

fn parse_bbox(a: [f64; 4], field: &str) -> Result<BBox, DiagramError> {
    BBox::from_array(a).map_err(|e| DiagramError::new(field, e))
}

fn convert_component(v: &Value, format: CorpusFormat, field: &str) -> Result<Component, DiagramError> {
    match format {
        CorpusFormat::RxnCaption => {
            let c: CaptionComponent = serde_json::from_value(v.clone()).map_err(|e| DiagramError::new(field, e))?;
            let kind = match c.kind.as_str() {
                "mol" => ComponentKind::Mol,
                "txt" => ComponentKind::Txt,
                "idt" => ComponentKind::Idt,
                "supplement" => ComponentKind::Supplement,
                other => return Err(DiagramError::new(format!("{field}.kind"), format!("unknown kind '{other}'"))),
            };
            let bbox = c.bbox.map(|a| parse_bbox(a, &format!("{field}.bbox"))).transpose()?;
            let index = match c.index {
                None => None,
                Some(i) if i >= 1 && i <= u32::MAX as i64 => Some(i as u32),
                Some(i) => return Err(DiagramError::new(format!("{field}.index"), format!("index {i} must be >= 1"))),
            };
            if kind.is_text() && c.content.as_deref().map(normalize_text).unwrap_or_default().is_empty() && bbox.is_none() {
                return Err(DiagramError::new(format!("{field}.content"), "text component needs content"));
            }
            Ok(Component { kind, bbox, index, content: c.content })
        }
        CorpusFormat::RxnScribe => {
            let c: ScribeComponent = serde_json::from_value(v.clone()).map_err(|e| DiagramError::new(field, e))?;
            let kind = match c.category.as_str() {
                "structure" => ComponentKind::Mol,
                "text" => ComponentKind::Txt,
                "identifier" => ComponentKind::Idt,
                "supplement" => ComponentKind::Supplement,
                other => return Err(DiagramError::new(format!("{field}.category"), format!("unknown category '{other}'"))),
            };
            let raw = c.bbox.ok_or_else(|| DiagramError::new(format!("{field}.bbox"), "missing bbox"))?;
            let bbox = parse_bbox(raw, &format!("{field}.bbox"))?;
            Ok(Component { kind, bbox: Some(bbox), index: None, content: c.content })
        }
    }
}

fn convert_record(v: Value, format: CorpusFormat) -> Result<AnnotatedDiagram, DiagramError> {
    let rec: DiagramRecord = serde_json::from_value(v).map_err(|e| DiagramError::new("record", e))?;
    let layout = match rec.layout.as_deref() {
        None => Layout::Unknown,
        Some(s) => s.parse().map_err(|e| DiagramError::new("layout", e))?,
    };
    let molecules = rec
        .molecules
        .iter()
        .enumerate()
        .map(|(i, a)| parse_bbox(*a, &format!("molecules[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut reactions = Vec::with_capacity(rec.reactions.len());
    for (k, r) in rec.reactions.iter().enumerate() {
        let mut out = ReactionAnnotation::default();
        for (role, items) in [(Role::Reactants, &r.reactants), (Role::Conditions, &r.conditions), (Role::Products, &r.products)] {
            for (i, v) in items.iter().enumerate() {
                out.role_mut(role).push(convert_component(v, format, &format!("reactions[{k}].{role}[{i}]"))?);
            }
        }
        reactions.push(out);
    }
    let image = ImageRef { path: rec.image, width: rec.width, height: rec.height };
    build_diagram(image, molecules, reactions, layout)
}

pub fn parse_corpus(json: &str, format: CorpusFormat) -> Result<Vec<AnnotatedDiagram>, CorpusError> {
    let records: Vec<Value> = serde_json::from_str(json).map_err(|e| CorpusError::NotArray(e.to_string()))?;
    records
        .into_iter()
        .enumerate()
        .map(|(ordinal, v)| convert_record(v, format).map_err(|e| CorpusError::Record { ordinal, field: e.field, message: e.message }))
        .collect()
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<AnnotatedDiagram>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Read { path: path.to_path_buf(), source })?;
    parse_corpus(&text, format)
}

fn component_record(c: &Component) -> CaptionComponent {
    CaptionComponent {
        kind: c.kind.as_str().to_string(),
        bbox: c.bbox.map(|b| b.to_array()),
        index: c.index.map(i64::from),
        content: c.content.clone(),
    }
}

/// Serializes in the `rxncaption` dialect.
pub fn corpus_to_json(diagrams: &[AnnotatedDiagram]) -> String {
    let records: Vec<DiagramRecord> = diagrams
        .iter()
        .map(|d| DiagramRecord {
            image: d.image.path.clone(),
            width: d.image.width,
            height: d.image.height,
            layout: Some(d.layout.as_str().to_string()),
            molecules: d.molecules.iter().map(|b| b.to_array()).collect(),
            reactions: d
                .reactions
                .iter()
                .map(|r| {
                    let side = |cs: &[Component]| cs.iter().map(|c| serde_json::to_value(component_record(c)).expect("component")).collect();
                    ReactionRecord { reactants: side(&r.reactants), conditions: side(&r.conditions), products: side(&r.products) }
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("corpus serializes")
}

/// Reactions as `rxncaption` records, for prediction stores.
pub fn reactions_to_value(reactions: &[ReactionAnnotation]) -> Value {
    let side = |cs: &[Component]| cs.iter().map(|c| serde_json::to_value(component_record(c)).expect("component")).collect();
    let records: Vec<ReactionRecord> =
        reactions.iter().map(|r| ReactionRecord { reactants: side(&r.reactants), conditions: side(&r.conditions), products: side(&r.products) }).collect();
    serde_json::to_value(records).expect("reactions serialize")
}

/// Inverse of [`reactions_to_value`]. No ground-truth validation: stored
/// predictions may reference boxes outside any molecule list.
pub fn reactions_from_value(v: &Value) -> Result<Vec<ReactionAnnotation>, DiagramError> {
    let records: Vec<ReactionRecord> = serde_json::from_value(v.clone()).map_err(|e| DiagramError::new("reactions", e))?;
    let mut out = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let mut reaction = ReactionAnnotation::default();
        for (role, items) in [(Role::Reactants, &r.reactants), (Role::Conditions, &r.conditions), (Role::Products, &r.products)] {
            for (i, v) in items.iter().enumerate() {
                reaction.role_mut(role).push(convert_component(v, CorpusFormat::RxnCaption, &format!("reactions[{k}].{role}[{i}]"))?);
            }
        }
        out.push(reaction);
    }
    Ok(out)
}

pub fn save_corpus(path: &Path, diagrams: &[AnnotatedDiagram]) -> Result<(), CorpusError> {
    fs::write(path, corpus_to_json(diagrams)).map_err(|source| CorpusError::Write { path: path.to_path_buf(), source })
}
