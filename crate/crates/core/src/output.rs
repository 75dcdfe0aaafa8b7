//! Decoding model replies into reactions.
//!
//! Replies are free text. The payload is the first balanced `[...]` region
//! that parses as JSON once markdown fences are removed.

use serde_json::{Map, Value};

use crate::model::{normalize_text, Component, ComponentKind, ParsedOutput, ReactionAnnotation, Role, Strategy};
use crate::render::BoxIndex;
use crate::BBox;

/// Position of a component inside a decoded payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Loc {
    pub reaction: usize,
    pub role: Role,
    pub item: usize,
}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}].{}[{}]", self.reaction, self.role, self.item)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON array found in reply")]
    NoJsonArray,
    #[error("reaction {0} is not an object")]
    ReactionNotObject(usize),
    #[error("reaction {reaction}: '{role}' is not a list")]
    RoleNotList { reaction: usize, role: Role },
    #[error("{0}: component is not an object")]
    ComponentNotObject(Loc),
    #[error("{loc}: missing field '{field}'")]
    MissingField { loc: Loc, field: &'static str },
    #[error("{loc}: unknown {field} '{value}'")]
    UnknownKind { loc: Loc, field: &'static str, value: String },
    #[error("{loc}: malformed bbox {value}")]
    MalformedBBox { loc: Loc, value: String },
    #[error("{loc}: bbox out of range: {detail}")]
    BBoxOutOfRange { loc: Loc, detail: String },
    #[error("{loc}: invalid molecule index {value}")]
    InvalidIndex { loc: Loc, value: String },
}

/// Coarse failure classes, for tallying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    NoJson,
    Schema,
    MissingField,
    BBox,
    Index,
}

impl ParseError {
    pub fn class(&self) -> FailureClass {
        match self {
            ParseError::NoJsonArray => FailureClass::NoJson,
            ParseError::MissingField { .. } => FailureClass::MissingField,
            ParseError::MalformedBBox { .. } | ParseError::BBoxOutOfRange { .. } => FailureClass::BBox,
            ParseError::InvalidIndex { .. } => FailureClass::Index,
            _ => FailureClass::Schema,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("molecule index {0} is not on the visual prompt")]
    DanglingIndex(u32),
    #[error("only BIVP outputs carry indices to resolve")]
    WrongStrategy,
}

/// Removes markdown code-fence markers (and a language tag right after an
/// opening fence), keeping the fenced content.
pub fn strip_fences(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find("```") {
        out.push_str(&rest[..pos]);
        rest = &rest[pos + 3..];
        let tag_len = rest.find(|c: char| !c.is_ascii_alphanumeric()).unwrap_or(rest.len());
        rest = &rest[tag_len..];
    }
    out.push_str(rest);
    out
}

/// End (exclusive) of the balanced region opening at `start`, honoring
/// JSON string literals.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return (b == bytes[start] + 2).then_some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn first_balanced(raw: &str, open: u8) -> Option<Value> {
    let text = strip_fences(raw);
    let bytes = text.as_bytes();
    for start in (0..bytes.len()).filter(|&i| bytes[i] == open) {
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(v) = serde_json::from_str::<Value>(&text[start..end]) {
                return Some(v);
            }
        }
    }
    None
}

/// First balanced JSON array in `raw`.
pub fn extract_json_array(raw: &str) -> Option<Vec<Value>> {
    match first_balanced(raw, b'[')? {
        Value::Array(a) => Some(a),
        _ => None,
    }
}

/// First balanced JSON object in `raw`.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    match first_balanced(raw, b'{')? {
        Value::Object(o) => Some(o),
        _ => None,
    }
}

fn roles(v: &Value, reaction: usize) -> Result<[(Role, &[Value]); 3], ParseError> {
    let obj = v.as_object().ok_or(ParseError::ReactionNotObject(reaction))?;
    let get = |role: Role| -> Result<&[Value], ParseError> {
        match obj.get(role.key()) {
            None | Some(Value::Null) => Ok(&[]),
            Some(Value::Array(a)) => Ok(a.as_slice()),
            Some(_) => Err(ParseError::RoleNotList { reaction, role }),
        }
    };
    Ok([(Role::Reactants, get(Role::Reactants)?), (Role::Conditions, get(Role::Conditions)?), (Role::Products, get(Role::Products)?)])
}

fn decode(raw: &str, strategy: Strategy, component: impl Fn(&Map<String, Value>, Loc) -> Result<Component, ParseError>) -> Result<ParsedOutput, ParseError> {
    let items = extract_json_array(raw).ok_or(ParseError::NoJsonArray)?;
    let mut reactions = Vec::with_capacity(items.len());
    let mut dropped_reactions = 0;
    let mut duplicates_removed = 0;
    for (k, item) in items.iter().enumerate() {
        let mut r = ReactionAnnotation::default();
        for (role, comps) in roles(item, k)? {
            for (i, c) in comps.iter().enumerate() {
                let loc = Loc { reaction: k, role, item: i };
                let obj = c.as_object().ok_or(ParseError::ComponentNotObject(loc))?;
                r.role_mut(role).push(component(obj, loc)?);
            }
        }
        duplicates_removed += r.dedup();
        if r.is_empty() {
            dropped_reactions += 1;
        } else {
            reactions.push(r);
        }
    }
    if dropped_reactions > 0 {
        log::warn!("dropped {dropped_reactions} reaction(s) without reactants or products");
    }
    Ok(ParsedOutput { strategy, raw: raw.to_string(), reactions, dropped_reactions, duplicates_removed })
}

fn bbox_field(obj: &Map<String, Value>, loc: Loc) -> Result<BBox, ParseError> {
    let v = obj.get("bbox").filter(|v| !v.is_null()).ok_or(ParseError::MissingField { loc, field: "bbox" })?;
    let malformed = || ParseError::MalformedBBox { loc, value: v.to_string() };
    let arr = v.as_array().filter(|a| a.len() == 4).ok_or_else(malformed)?;
    let mut c = [0.0; 4];
    for (slot, x) in c.iter_mut().zip(arr) {
        *slot = x.as_f64().ok_or_else(malformed)?;
    }
    BBox::from_array(c).map_err(|e| ParseError::BBoxOutOfRange { loc, detail: e.to_string() })
}

fn content_field(obj: &Map<String, Value>) -> Option<String> {
    let s = match obj.get("content")? {
        Value::String(s) => normalize_text(s),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    (!s.is_empty()).then_some(s)
}

fn kind_str<'a>(obj: &'a Map<String, Value>, key: &'static str, loc: Loc) -> Result<&'a str, ParseError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.as_str()),
        Some(other) => Err(ParseError::UnknownKind { loc, field: key, value: other.to_string() }),
        None => Err(ParseError::MissingField { loc, field: key }),
    }
}

/// Decodes the box-and-role schema: every object carries a `category`
/// and a normalized `bbox`.
pub fn parse_bros_output(raw: &str) -> Result<ParsedOutput, ParseError> {
    decode(raw, Strategy::Bros, |obj, loc| {
        let kind = match kind_str(obj, "category", loc)?.trim().to_ascii_lowercase().as_str() {
            "structure" => ComponentKind::Mol,
            "text" => ComponentKind::Txt,
            "identifier" => ComponentKind::Idt,
            "supplement" => ComponentKind::Supplement,
            other => return Err(ParseError::UnknownKind { loc, field: "category", value: other.to_string() }),
        };
        let bbox = bbox_field(obj, loc)?;
        let content = if kind.is_text() { content_field(obj) } else { None };
        Ok(Component { kind, bbox: Some(bbox), index: None, content })
    })
}

fn index_field(obj: &Map<String, Value>, loc: Loc) -> Result<u32, ParseError> {
    let v = obj.get("index").filter(|v| !v.is_null()).ok_or(ParseError::MissingField { loc, field: "index" })?;
    let invalid = || ParseError::InvalidIndex { loc, value: v.to_string() };
    let n: f64 = match v {
        Value::Number(n) => n.as_f64().ok_or_else(invalid)?,
        Value::String(s) => s.trim().parse::<i64>().map_err(|_| invalid())? as f64,
        _ => return Err(invalid()),
    };
    if n.fract() != 0.0 || n < 1.0 || n > u32::MAX as f64 {
        return Err(invalid());
    }
    Ok(n as u32)
}

/// Decodes the index-reference schema: `{"type": "mol", "index": n}` or
/// `{"type": "txt" | "idt", "content": s}`.
pub fn parse_bivp_output(raw: &str) -> Result<ParsedOutput, ParseError> {
    decode(raw, Strategy::Bivp, |obj, loc| {
        let kind = match kind_str(obj, "type", loc)?.trim().to_ascii_lowercase().as_str() {
            "mol" => ComponentKind::Mol,
            "txt" => ComponentKind::Txt,
            "idt" => ComponentKind::Idt,
            other => return Err(ParseError::UnknownKind { loc, field: "type", value: other.to_string() }),
        };
        if kind == ComponentKind::Mol {
            return Ok(Component::mol_index(index_field(obj, loc)?));
        }
        let content = content_field(obj).ok_or(ParseError::MissingField { loc, field: "content" })?;
        Ok(Component { kind, bbox: None, index: None, content: Some(content) })
    })
}

pub fn parse_output(raw: &str, strategy: Strategy) -> Result<ParsedOutput, ParseError> {
    match strategy {
        Strategy::Bros => parse_bros_output(raw),
        Strategy::Bivp => parse_bivp_output(raw),
    }
}

/// Replaces molecule indices by the boxes they were drawn with. Indices are
/// kept on the components; one molecule may appear in many reactions.
pub fn resolve_bivp(output: &ParsedOutput, index: &BoxIndex) -> Result<Vec<ReactionAnnotation>, ResolveError> {
    if output.strategy != Strategy::Bivp {
        return Err(ResolveError::WrongStrategy);
    }
    let mut out = output.reactions.clone();
    for c in out.iter_mut().flat_map(|r| r.components_mut()) {
        if let (true, Some(i)) = (c.is_mol(), c.index) {
            c.bbox = Some(*index.get(i).ok_or(ResolveError::DanglingIndex(i))?);
        }
    }
    Ok(out)
}
