mod common;

use common::PINNED;
use rxndp_core::prompts::{identify_prompt, parse_ocr_reply, template_hash, GRAPHICAL_STRUCTURE, IMAGE_SLOT};
use rxndp_core::{build_prompt, PromptKind};
use sha2::{Digest, Sha256};

#[test]
fn templates_match_pinned_hashes() {
    for (kind, want) in PINNED {
        let got = hex::encode(Sha256::digest(build_prompt(kind).as_bytes()));
        assert_eq!(got, want, "{kind}");
        assert_eq!(template_hash(kind), want);
    }
}

#[test]
fn templates_carry_their_schema_phrases() {
    let has = |k: PromptKind, s: &str| assert!(build_prompt(k).contains(s), "{k}: missing {s:?}");
    has(PromptKind::Bros, "\"bbox\": [0.1, 0.2, 0.3, 0.4]");
    has(PromptKind::Bivp, "\"type\": \"mol\", \"index\": 1");
    has(PromptKind::Bivp, "return an empty list []");
    has(PromptKind::VqaReactionCount, "'reaction_count'");
    has(PromptKind::VqaStructureCount, "'structure_count'");
    has(PromptKind::VqaCyclic, "{\"cyclic\": true}");
    has(PromptKind::VqaTree, "{\"tree\": false}");
    has(PromptKind::Ocr, GRAPHICAL_STRUCTURE);
    has(PromptKind::Ocr, "Pd vs pd");
    for k in PromptKind::ALL {
        assert_eq!(build_prompt(k).matches(IMAGE_SLOT).count(), 1, "{k}");
        assert_eq!(identify_prompt(build_prompt(k)), Some(k));
    }
    assert_eq!(identify_prompt("Describe this image."), None);
}

#[test]
fn ocr_replies() {
    assert_eq!(parse_ocr_reply("  Pd(PPh3)4,\n  toluene "), Some("Pd(PPh3)4, toluene".to_string()));
    assert_eq!(parse_ocr_reply("[GRAPHICAL_STRUCTURE]"), None);
    assert_eq!(parse_ocr_reply("```\n1a\n```"), Some("1a".to_string()));
    assert_eq!(parse_ocr_reply("{\"text\": \"THF\"}"), Some("THF".to_string()));
}
