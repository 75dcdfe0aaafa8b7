//! Reaction diagram parsing toolkit.
//!
//! Molecule boxes are pre-drawn and numbered on the diagram (a visual
//! prompt), a vision-language model describes the reactions by referring to
//! those numbers, and the reply is decoded, resolved back to boxes and scored
//! against ground truth. A synthetic diagram generator and a blob detector
//! make every stage testable offline.

pub mod backend;
pub mod corpus;
pub mod detector;
pub mod geometry;
pub mod harness;
pub mod layout;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod output;
pub mod prompts;
pub mod render;
pub mod synthgen;
pub mod text;
pub mod vqa;

/// Normalized box in the precision used by corpora and metrics.
pub type BBox = geometry::Rect<f64>;
/// Single-precision box, for raster-side post-processing.
pub type BBoxF32 = geometry::Rect<f32>;

pub use corpus::{build_diagram, load_corpus, save_corpus, CorpusError, CorpusFormat};
pub use geometry::{iou, BoxError, Rect};
pub use layout::classify_layout;
pub use matching::{evaluate, reaction_matches, Assignment, Counts, Evaluation, MatchKind, MatchMode};
pub use metrics::{aggregate, detector_pr, DiagramCounts, MatchReport};
pub use model::{AnnotatedDiagram, Component, ComponentKind, ImageRef, Layout, ParsedOutput, ReactionAnnotation, Role, Strategy};
pub use output::{parse_bivp_output, parse_bros_output, resolve_bivp, ParseError, ResolveError};
pub use render::{assign_indices, render_visual_prompt, BoxIndex, VisualPromptStyle};
pub use prompts::{build_prompt, PromptKind};
pub use text::text_match;
