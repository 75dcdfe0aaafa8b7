//! Reactions, components and diagrams.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::same_box;
use crate::BBox;

/// Collapses whitespace runs to one space and trims. Case is preserved.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Mol,
    Txt,
    Idt,
    Supplement,
}

impl ComponentKind {
    pub fn is_text(self) -> bool {
        !matches!(self, ComponentKind::Mol)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Mol => "mol",
            ComponentKind::Txt => "txt",
            ComponentKind::Idt => "idt",
            ComponentKind::Supplement => "supplement",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("mol component carries neither bbox nor index")]
    MolWithoutLocation,
    #[error("molecule index must be >= 1")]
    ZeroIndex,
    #[error("{0} component has neither content nor bbox")]
    EmptyText(ComponentKind),
    #[error("reaction has no reactants and no products")]
    EmptyReaction,
    #[error("component appears twice in {role}")]
    DuplicateComponent { role: Role },
}

/// One reaction participant.
///
/// Molecules are located by `bbox` and/or a 1-based `index` into the
/// diagram's molecule list. Text kinds carry normalized `content`; a
/// `bbox` may also be present (detector-style outputs locate text by box
/// only).
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub kind: ComponentKind,
    pub bbox: Option<BBox>,
    pub index: Option<u32>,
    pub content: Option<String>,
}

impl Component {
    pub fn mol(bbox: BBox) -> Self {
        Self { kind: ComponentKind::Mol, bbox: Some(bbox), index: None, content: None }
    }

    pub fn mol_index(index: u32) -> Self {
        Self { kind: ComponentKind::Mol, bbox: None, index: Some(index), content: None }
    }

    pub fn text(kind: ComponentKind, content: &str) -> Self {
        debug_assert!(kind.is_text());
        let content = normalize_text(content);
        Self { kind, bbox: None, index: None, content: (!content.is_empty()).then_some(content) }
    }

    pub fn txt(content: &str) -> Self {
        Self::text(ComponentKind::Txt, content)
    }

    pub fn idt(content: &str) -> Self {
        Self::text(ComponentKind::Idt, content)
    }

    pub fn with_bbox(mut self, bbox: BBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn with_index(mut self, index: u32) -> Self {
        self.index = Some(index);
        self
    }

    pub fn is_mol(&self) -> bool {
        self.kind == ComponentKind::Mol
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.index == Some(0) {
            return Err(ModelError::ZeroIndex);
        }
        match self.kind {
            ComponentKind::Mol if self.bbox.is_none() && self.index.is_none() => Err(ModelError::MolWithoutLocation),
            k if k.is_text() && self.content.is_none() && self.bbox.is_none() => Err(ModelError::EmptyText(k)),
            _ => Ok(()),
        }
    }

    /// Whether two components denote the same participant within a role.
    pub fn duplicates(&self, other: &Component) -> bool {
        if self.kind != other.kind {
            return false;
        }
        if self.is_mol() {
            return match (&self.bbox, &other.bbox) {
                (Some(a), Some(b)) => same_box(a, b),
                (None, None) => self.index == other.index,
                _ => false,
            };
        }
        match (&self.content, &other.content) {
            (Some(a), Some(b)) => a == b,
            (None, None) => matches!((&self.bbox, &other.bbox), (Some(a), Some(b)) if same_box(a, b)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Reactants,
    Conditions,
    Products,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Reactants, Role::Conditions, Role::Products];

    pub fn key(self) -> &'static str {
        match self {
            Role::Reactants => "reactants",
            Role::Conditions => "conditions",
            Role::Products => "products",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReactionAnnotation {
    pub reactants: Vec<Component>,
    pub conditions: Vec<Component>,
    pub products: Vec<Component>,
}

impl ReactionAnnotation {
    pub fn new(reactants: Vec<Component>, conditions: Vec<Component>, products: Vec<Component>) -> Self {
        Self { reactants, conditions, products }
    }

    pub fn role(&self, role: Role) -> &[Component] {
        match role {
            Role::Reactants => &self.reactants,
            Role::Conditions => &self.conditions,
            Role::Products => &self.products,
        }
    }

    pub fn role_mut(&mut self, role: Role) -> &mut Vec<Component> {
        match role {
            Role::Reactants => &mut self.reactants,
            Role::Conditions => &mut self.conditions,
            Role::Products => &mut self.products,
        }
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.reactants.iter().chain(&self.conditions).chain(&self.products)
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut Component> {
        self.reactants.iter_mut().chain(self.conditions.iter_mut()).chain(self.products.iter_mut())
    }

    pub fn is_empty(&self) -> bool {
        self.reactants.is_empty() && self.products.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.is_empty() {
            return Err(ModelError::EmptyReaction);
        }
        for role in Role::ALL {
            let comps = self.role(role);
            for (i, c) in comps.iter().enumerate() {
                c.validate()?;
                if comps[..i].iter().any(|p| p.duplicates(c)) {
                    return Err(ModelError::DuplicateComponent { role });
                }
            }
        }
        Ok(())
    }

    /// Drops later duplicates within each role; returns how many were removed.
    pub fn dedup(&mut self) -> usize {
        let mut removed = 0;
        for role in Role::ALL {
            let comps = self.role_mut(role);
            let mut kept: Vec<Component> = Vec::with_capacity(comps.len());
            for c in comps.drain(..) {
                if kept.iter().any(|k| k.duplicates(&c)) {
                    removed += 1;
                } else {
                    kept.push(c);
                }
            }
            *comps = kept;
        }
        removed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    SingleLine,
    MultiLine,
    Tree,
    Cyclic,
    #[default]
    Unknown,
}

impl Layout {
    /// The four concrete layout classes, in increasing typical difficulty.
    pub const CLASSES: [Layout; 4] = [Layout::SingleLine, Layout::MultiLine, Layout::Tree, Layout::Cyclic];

    pub fn as_str(self) -> &'static str {
        match self {
            Layout::SingleLine => "single-line",
            Layout::MultiLine => "multi-line",
            Layout::Tree => "tree",
            Layout::Cyclic => "cyclic",
            Layout::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "single-line" | "single" | "singleline" => Ok(Layout::SingleLine),
            "multi-line" | "multiple-line" | "multi" | "multiline" => Ok(Layout::MultiLine),
            "tree" => Ok(Layout::Tree),
            "cyclic" | "cycle" => Ok(Layout::Cyclic),
            "unknown" | "" => Ok(Layout::Unknown),
            other => Err(format!("unknown layout '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Bros,
    Bivp,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Bros => "bros",
            Strategy::Bivp => "bivp",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bros" => Ok(Strategy::Bros),
            "bivp" => Ok(Strategy::Bivp),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: String,
    pub width: u32,
    pub height: u32,
}

/// A diagram image with its molecule boxes and ground-truth reactions.
///
/// `molecules` is the ordered molecule list; a mol component's `index` is its
/// 1-based position in that list.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDiagram {
    pub image: ImageRef,
    pub molecules: Vec<BBox>,
    pub reactions: Vec<ReactionAnnotation>,
    pub layout: Layout,
}

impl AnnotatedDiagram {
    pub fn id(&self) -> &str {
        &self.image.path
    }

    pub fn index_map(&self) -> crate::BoxIndex {
        crate::BoxIndex::from_ordered(self.molecules.clone())
    }

    /// 1-based position of `bbox` in the molecule list.
    pub fn molecule_index(&self, bbox: &BBox) -> Option<u32> {
        self.molecules.iter().position(|m| same_box(m, bbox)).map(|p| p as u32 + 1)
    }
}

/// A decoded model reply.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOutput {
    pub strategy: Strategy,
    pub raw: String,
    pub reactions: Vec<ReactionAnnotation>,
    /// Reactions discarded for having neither reactants nor products.
    pub dropped_reactions: usize,
    pub duplicates_removed: usize,
}
