//! Prompt templates, shipped verbatim as text assets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Marker where the backend attaches the image.
pub const IMAGE_SLOT: &str = "<image>";

/// Token the OCR template asks for on non-text crops.
pub const GRAPHICAL_STRUCTURE: &str = "[GRAPHICAL_STRUCTURE]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Bros,
    Bivp,
    VqaReactionCount,
    VqaStructureCount,
    VqaCyclic,
    VqaTree,
    Ocr,
}

impl PromptKind {
    pub const ALL: [PromptKind; 7] = [
        PromptKind::Bros,
        PromptKind::Bivp,
        PromptKind::VqaReactionCount,
        PromptKind::VqaStructureCount,
        PromptKind::VqaCyclic,
        PromptKind::VqaTree,
        PromptKind::Ocr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Bros => "bros",
            PromptKind::Bivp => "bivp",
            PromptKind::VqaReactionCount => "vqa_reaction_count",
            PromptKind::VqaStructureCount => "vqa_structure_count",
            PromptKind::VqaCyclic => "vqa_cyclic",
            PromptKind::VqaTree => "vqa_tree",
            PromptKind::Ocr => "ocr",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.trim().to_ascii_lowercase().replace('-', "_");
        PromptKind::ALL.into_iter().find(|p| p.as_str() == k).ok_or_else(|| {
            let names: Vec<&str> = PromptKind::ALL.iter().map(|p| p.as_str()).collect();
            format!("unknown prompt kind '{s}' (expected one of {})", names.join(", "))
        })
    }
}

pub fn build_prompt(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Bros => include_str!("../assets/prompts/bros.txt"),
        PromptKind::Bivp => include_str!("../assets/prompts/bivp.txt"),
        PromptKind::VqaReactionCount => include_str!("../assets/prompts/vqa_reaction_count.txt"),
        PromptKind::VqaStructureCount => include_str!("../assets/prompts/vqa_structure_count.txt"),
        PromptKind::VqaCyclic => include_str!("../assets/prompts/vqa_cyclic.txt"),
        PromptKind::VqaTree => include_str!("../assets/prompts/vqa_tree.txt"),
        PromptKind::Ocr => include_str!("../assets/prompts/ocr.txt"),
    }
}

/// Hex SHA-256 of a template's bytes.
pub fn template_hash(kind: PromptKind) -> String {
    hex::encode(Sha256::digest(build_prompt(kind).as_bytes()))
}

/// The kind whose template is exactly `prompt`, if any.
pub fn identify_prompt(prompt: &str) -> Option<PromptKind> {
    PromptKind::ALL.into_iter().find(|k| build_prompt(*k) == prompt)
}

/// Reads an OCR reply: bare text, a fenced block, a JSON string or a
/// one-field JSON object. `None` stands for the graphical-structure token.
pub fn parse_ocr_reply(raw: &str) -> Option<String> {
    let stripped = crate::output::strip_fences(raw);
    let t = stripped.trim();
    let text = match serde_json::from_str::<serde_json::Value>(t) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(serde_json::Value::Object(m)) if m.len() == 1 => match m.into_iter().next() {
            Some((_, serde_json::Value::String(s))) => s,
            _ => t.to_string(),
        },
        _ => t.to_string(),
    };
    let text = crate::model::normalize_text(&text);
    (text != GRAPHICAL_STRUCTURE).then_some(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_has_an_image_slot() {
        for k in PromptKind::ALL {
            assert_eq!(build_prompt(k).matches(IMAGE_SLOT).count(), 1, "{k}");
            assert_eq!(k.as_str().parse::<PromptKind>().unwrap(), k);
            assert_eq!(identify_prompt(build_prompt(k)), Some(k));
        }
        assert!("vqa-tree".parse::<PromptKind>().is_ok());
        assert!("summary".parse::<PromptKind>().is_err());
    }

    #[test]
    fn ocr_replies() {
        assert_eq!(parse_ocr_reply("Pd/C,  H2\n"), Some("Pd/C, H2".into()));
        assert_eq!(parse_ocr_reply("[GRAPHICAL_STRUCTURE]"), None);
        assert_eq!(parse_ocr_reply("```\nNaH THF\n```"), Some("NaH THF".into()));
        assert_eq!(parse_ocr_reply(r#"{"text": "hv"}"#), Some("hv".into()));
        assert_eq!(parse_ocr_reply(r#""0°C""#), Some("0°C".into()));
    }
}
