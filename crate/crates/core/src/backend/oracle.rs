use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, CompletionRequest, RequestContext};
use crate::model::{AnnotatedDiagram, Component, ComponentKind, ReactionAnnotation, Role};
use crate::prompts::{identify_prompt, PromptKind, GRAPHICAL_STRUCTURE};
use crate::render::BoxIndex;
use crate::vqa::{vqa_ground_truth, VqaQuestion};

const TYPO_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Controlled degradation of oracle replies. Draws are coupled across
/// rates: raising a rate only adds corruptions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub drop_reaction_rate: f64,
    pub role_swap_rate: f64,
    pub index_corrupt_rate: f64,
    pub text_typo_rate: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("drop_reaction_rate", self.drop_reaction_rate),
            ("role_swap_rate", self.role_swap_rate),
            ("index_corrupt_rate", self.index_corrupt_rate),
            ("text_typo_rate", self.text_typo_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.drop_reaction_rate == 0.0 && self.role_swap_rate == 0.0 && self.index_corrupt_rate == 0.0 && self.text_typo_rate == 0.0
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn typo(s: &str, pos: u32, pick: u32) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return s.to_string();
    }
    let p = pos as usize % chars.len();
    let options: Vec<char> = TYPO_ALPHABET.iter().map(|&b| b as char).filter(|&c| c != chars[p]).collect();
    chars[p] = options[pick as usize % options.len()];
    chars.into_iter().collect()
}

/// Applies `noise` to reactions whose molecules carry indices into `map`.
fn degrade(reactions: Vec<ReactionAnnotation>, map: &BoxIndex, noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> Vec<ReactionAnnotation> {
    let n = map.len() as u32;
    let mut out = Vec::with_capacity(reactions.len());
    for mut r in reactions {
        let (u_drop, u_swap): (f64, f64) = (rng.random(), rng.random());
        for c in r.components_mut() {
            let (u_idx, r_idx, u_typo, pos, pick): (f64, u32, f64, u32, u32) = (rng.random(), rng.random(), rng.random(), rng.random(), rng.random());
            match (c.is_mol(), c.index) {
                (true, Some(old)) if n >= 2 && u_idx < noise.index_corrupt_rate => {
                    let new = (old - 1 + 1 + r_idx % (n - 1)) % n + 1;
                    c.index = Some(new);
                    c.bbox = map.get(new).copied();
                }
                (false, _) if u_typo < noise.text_typo_rate => {
                    c.content = c.content.as_deref().map(|s| typo(s, pos, pick));
                }
                _ => {}
            }
        }
        if u_swap < noise.role_swap_rate {
            std::mem::swap(&mut r.reactants, &mut r.products);
        }
        if u_drop >= noise.drop_reaction_rate {
            out.push(r);
        }
    }
    out
}

fn bivp_json(c: &Component) -> Option<Value> {
    match c.kind {
        ComponentKind::Mol => c.index.map(|i| json!({"type": "mol", "index": i})),
        ComponentKind::Txt | ComponentKind::Idt => c.content.as_ref().map(|t| json!({"type": c.kind.as_str(), "content": t})),
        ComponentKind::Supplement => None,
    }
}

fn bros_json(c: &Component) -> Option<Value> {
    let category = match c.kind {
        ComponentKind::Mol => "structure",
        ComponentKind::Txt => "text",
        ComponentKind::Idt => "identifier",
        ComponentKind::Supplement => "supplement",
    };
    let b = c.bbox?;
    let mut v = json!({"category": category, "bbox": b.to_array()});
    if let Some(t) = &c.content {
        v["content"] = json!(t);
    }
    Some(v)
}

fn reactions_json(reactions: &[ReactionAnnotation], f: fn(&Component) -> Option<Value>) -> String {
    let list: Vec<Value> = reactions
        .iter()
        .map(|r| {
            let mut o = serde_json::Map::new();
            for role in Role::ALL {
                o.insert(role.key().to_string(), Value::Array(r.role(role).iter().filter_map(f).collect()));
            }
            Value::Object(o)
        })
        .collect();
    serde_json::to_string_pretty(&list).expect("json values serialize")
}

/// GT reactions re-expressed against `map`; molecules the map does not
/// cover are omitted, as a model could not refer to them.
fn against_map(d: &AnnotatedDiagram, map: &BoxIndex) -> Vec<ReactionAnnotation> {
    d.reactions
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for role in Role::ALL {
                r.role_mut(role).retain_mut(|c| {
                    if !c.is_mol() {
                        return c.kind != ComponentKind::Supplement;
                    }
                    match c.bbox.and_then(|b| map.best_match(&b, 0.5)) {
                        Some(i) => {
                            c.index = Some(i);
                            c.bbox = map.get(i).copied();
                            true
                        }
                        None => false,
                    }
                });
            }
            r
        })
        .collect()
}

/// The reply a perfect (or noise-degraded) model gives for `kind`.
pub fn oracle_reply(d: &AnnotatedDiagram, kind: PromptKind, ctx: &RequestContext, noise: &NoiseConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ fnv1a(&ctx.image_id) ^ fnv1a(kind.as_str()).rotate_left(17));
    match kind {
        PromptKind::Bivp | PromptKind::Bros => {
            let map = match (&ctx.index_map, kind) {
                (Some(m), PromptKind::Bivp) => m.clone(),
                _ => d.index_map(),
            };
            let reactions = degrade(against_map(d, &map), &map, noise, &mut rng);
            if kind == PromptKind::Bivp {
                reactions_json(&reactions, bivp_json)
            } else {
                reactions_json(&reactions, bros_json)
            }
        }
        PromptKind::Ocr => {
            let Some(region) = ctx.region else { return String::new() };
            let text = d
                .reactions
                .iter()
                .flat_map(|r| r.components())
                .filter(|c| c.kind.is_text())
                .filter_map(|c| Some((crate::iou(&c.bbox?, &region), c)))
                .filter(|(v, _)| *v > 0.5)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .and_then(|(_, c)| c.content.clone());
            match text {
                Some(t) => t,
                None if d.molecules.iter().any(|m| crate::iou(m, &region) > 0.5) => GRAPHICAL_STRUCTURE.to_string(),
                None => String::new(),
            }
        }
        vqa => {
            let q = VqaQuestion::from_prompt_kind(vqa).expect("remaining kinds are VQA");
            vqa_ground_truth(d).reply(q)
        }
    }
}

/// Ground-truth answering machine keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    diagrams: HashMap<String, AnnotatedDiagram>,
    pub noise: NoiseConfig,
}

impl OracleBackend {
    pub fn new(diagrams: &[AnnotatedDiagram], noise: NoiseConfig) -> Self {
        Self { diagrams: diagrams.iter().map(|d| (d.id().to_string(), d.clone())).collect(), noise }
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> String {
        if self.noise.is_zero() {
            "oracle".into()
        } else {
            format!(
                "oracle(drop={},swap={},index={},typo={},seed={})",
                self.noise.drop_reaction_rate, self.noise.role_swap_rate, self.noise.index_corrupt_rate, self.noise.text_typo_rate, self.noise.seed
            )
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let kind = identify_prompt(&request.prompt).ok_or_else(|| BackendError::InvalidRequest("prompt is not one of the shipped templates".into()))?;
        let d = self.diagrams.get(&request.context.image_id).ok_or_else(|| BackendError::UnknownImage(request.context.image_id.clone()))?;
        Ok(oracle_reply(d, kind, &request.context, &self.noise))
    }
}
