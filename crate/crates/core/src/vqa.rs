//! Diagram-understanding questions: ground truth, reply decoding, scoring.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{AnnotatedDiagram, Layout};
use crate::prompts::PromptKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqaQuestion {
    ReactionCount,
    StructureCount,
    Cyclic,
    Tree,
}

impl VqaQuestion {
    pub const ALL: [VqaQuestion; 4] = [VqaQuestion::ReactionCount, VqaQuestion::StructureCount, VqaQuestion::Cyclic, VqaQuestion::Tree];

    /// JSON key the prompt asks for.
    pub fn key(self) -> &'static str {
        match self {
            VqaQuestion::ReactionCount => "reaction_count",
            VqaQuestion::StructureCount => "structure_count",
            VqaQuestion::Cyclic => "cyclic",
            VqaQuestion::Tree => "tree",
        }
    }

    pub fn prompt_kind(self) -> PromptKind {
        match self {
            VqaQuestion::ReactionCount => PromptKind::VqaReactionCount,
            VqaQuestion::StructureCount => PromptKind::VqaStructureCount,
            VqaQuestion::Cyclic => PromptKind::VqaCyclic,
            VqaQuestion::Tree => PromptKind::VqaTree,
        }
    }

    pub fn from_prompt_kind(kind: PromptKind) -> Option<Self> {
        VqaQuestion::ALL.into_iter().find(|q| q.prompt_kind() == kind)
    }
}

impl fmt::Display for VqaQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VqaAnswer {
    Count(u64),
    Flag(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaTruth {
    pub reaction_count: u64,
    pub structure_count: u64,
    pub cyclic: bool,
    pub tree: bool,
}

impl VqaTruth {
    pub fn answer(&self, q: VqaQuestion) -> VqaAnswer {
        match q {
            VqaQuestion::ReactionCount => VqaAnswer::Count(self.reaction_count),
            VqaQuestion::StructureCount => VqaAnswer::Count(self.structure_count),
            VqaQuestion::Cyclic => VqaAnswer::Flag(self.cyclic),
            VqaQuestion::Tree => VqaAnswer::Flag(self.tree),
        }
    }

    /// The reply a perfect model gives, e.g. `{"cyclic": true}`.
    pub fn reply(&self, q: VqaQuestion) -> String {
        let v = match self.answer(q) {
            VqaAnswer::Count(n) => Value::from(n),
            VqaAnswer::Flag(b) => Value::from(b),
        };
        serde_json::json!({ q.key(): v }).to_string()
    }
}

pub fn vqa_ground_truth(d: &AnnotatedDiagram) -> VqaTruth {
    VqaTruth {
        reaction_count: d.reactions.len() as u64,
        structure_count: d.molecules.len() as u64,
        cyclic: d.layout == Layout::Cyclic,
        tree: d.layout == Layout::Tree,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VqaError {
    #[error("no JSON object in reply")]
    NoJsonObject,
    #[error("reply lacks key '{0}'")]
    MissingKey(&'static str),
    #[error("value for '{key}' has the wrong type: {value}")]
    WrongType { key: &'static str, value: String },
}

/// Decodes `{"<key>": value}`; counts accept integral numbers or numeric
/// strings, flags accept booleans or "true"/"false".
pub fn parse_vqa_reply(q: VqaQuestion, raw: &str) -> Result<VqaAnswer, VqaError> {
    let obj = crate::output::extract_json_object(raw).ok_or(VqaError::NoJsonObject)?;
    let key = q.key();
    let v = obj.get(key).ok_or(VqaError::MissingKey(key))?;
    let wrong = || VqaError::WrongType { key, value: v.to_string() };
    match q {
        VqaQuestion::ReactionCount | VqaQuestion::StructureCount => {
            let n = match v {
                Value::Number(n) => n.as_u64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64)),
                Value::String(s) => s.trim().parse::<u64>().ok(),
                _ => None,
            };
            n.map(VqaAnswer::Count).ok_or_else(wrong)
        }
        VqaQuestion::Cyclic | VqaQuestion::Tree => match v {
            Value::Bool(b) => Ok(VqaAnswer::Flag(*b)),
            Value::String(s) if s.trim().eq_ignore_ascii_case("true") => Ok(VqaAnswer::Flag(true)),
            Value::String(s) if s.trim().eq_ignore_ascii_case("false") => Ok(VqaAnswer::Flag(false)),
            _ => Err(wrong()),
        },
    }
}

/// One graded question; `pred = None` means the reply was undecodable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaItem {
    pub question: VqaQuestion,
    pub gt: VqaAnswer,
    pub pred: Option<VqaAnswer>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub correct: usize,
    pub total: usize,
    pub undecodable: usize,
    /// Percentage in [0, 100].
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaScores {
    pub per_question: BTreeMap<VqaQuestion, QuestionScore>,
    /// Unweighted mean of the per-question accuracies present.
    pub mean: f64,
}

pub fn score_vqa(items: &[VqaItem]) -> VqaScores {
    let mut per_question: BTreeMap<VqaQuestion, QuestionScore> = BTreeMap::new();
    for it in items {
        let s = per_question.entry(it.question).or_default();
        s.total += 1;
        match it.pred {
            None => s.undecodable += 1,
            Some(p) if p == it.gt => s.correct += 1,
            Some(_) => {}
        }
    }
    for s in per_question.values_mut() {
        s.accuracy = 100.0 * s.correct as f64 / s.total as f64;
    }
    let mean = if per_question.is_empty() { 0.0 } else { per_question.values().map(|s| s.accuracy).sum::<f64>() / per_question.len() as f64 };
    VqaScores { per_question, mean }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replies_decode() {
        assert_eq!(parse_vqa_reply(VqaQuestion::ReactionCount, r#"{"reaction_count": 2}"#), Ok(VqaAnswer::Count(2)));
        assert_eq!(parse_vqa_reply(VqaQuestion::Cyclic, "```json\n{\"cyclic\": true}\n```"), Ok(VqaAnswer::Flag(true)));
        assert_eq!(parse_vqa_reply(VqaQuestion::Tree, r#"{"tree": "False"}"#), Ok(VqaAnswer::Flag(false)));
        assert_eq!(parse_vqa_reply(VqaQuestion::StructureCount, r#"{"structure_count": "4"}"#), Ok(VqaAnswer::Count(4)));
        assert_eq!(parse_vqa_reply(VqaQuestion::Tree, "yes"), Err(VqaError::NoJsonObject));
        assert_eq!(parse_vqa_reply(VqaQuestion::Tree, r#"{"cyclic": true}"#), Err(VqaError::MissingKey("tree")));
        assert!(matches!(parse_vqa_reply(VqaQuestion::ReactionCount, r#"{"reaction_count": 2.5}"#), Err(VqaError::WrongType { .. })));
    }

    #[test]
    fn truth_reply_round_trips() {
        let t = VqaTruth { reaction_count: 3, structure_count: 5, cyclic: false, tree: true };
        for q in VqaQuestion::ALL {
            assert_eq!(parse_vqa_reply(q, &t.reply(q)), Ok(t.answer(q)));
        }
    }

    #[test]
    fn scoring_examples() {
        let t = VqaTruth { reaction_count: 3, structure_count: 5, cyclic: false, tree: true };
        let all: Vec<VqaItem> = VqaQuestion::ALL.iter().map(|&q| VqaItem { question: q, gt: t.answer(q), pred: Some(t.answer(q)) }).collect();
        let s = score_vqa(&all);
        assert_eq!(s.mean, 100.0);
        assert!(s.per_question.values().all(|q| q.accuracy == 100.0));

        let half: Vec<VqaItem> = VqaQuestion::ALL
            .iter()
            .enumerate()
            .map(|(i, &q)| VqaItem { question: q, gt: t.answer(q), pred: if i < 2 { Some(t.answer(q)) } else { None } })
            .collect();
        let s = score_vqa(&half);
        assert_eq!(s.mean, 50.0);
        assert_eq!(s.per_question[&VqaQuestion::Tree].undecodable, 1);
    }
}
