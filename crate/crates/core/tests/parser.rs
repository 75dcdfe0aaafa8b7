mod common;

use common::{mutate_payload, BIVP_EXAMPLE, BROS_EXAMPLE};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rxndp_core::backend::{oracle_reply, NoiseConfig, RequestContext};
use rxndp_core::output::{extract_json_array, FailureClass};
use rxndp_core::synthgen::{generate_corpus, SynthParams};
use rxndp_core::{parse_bivp_output, parse_bros_output, resolve_bivp, Component, ComponentKind, ParseError, ParsedOutput, PromptKind, ReactionAnnotation, Role};

fn key(c: &Component) -> String {
    format!("{:?}|{:?}|{:?}", c.kind, c.bbox.map(|b| b.to_array()), c.content)
}

fn canonical(r: &ReactionAnnotation) -> [Vec<String>; 3] {
    Role::ALL.map(|role| {
        let mut v: Vec<String> = r.role(role).iter().map(key).collect();
        v.sort();
        v
    })
}

fn well_formed(p: &ParsedOutput) {
    for r in &p.reactions {
        assert!(!r.reactants.is_empty() || !r.products.is_empty());
        for c in r.components() {
            if let Some(b) = c.bbox {
                let [x1, y1, x2, y2] = b.to_array();
                assert!(0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0);
            }
            if c.kind == ComponentKind::Mol && c.bbox.is_none() {
                assert!(c.index.unwrap() >= 1);
            }
        }
    }
}

fn check(raw: &str) {
    for res in [parse_bros_output(raw), parse_bivp_output(raw)] {
        match res {
            Ok(p) => well_formed(&p),
            Err(e) => assert!(!e.to_string().is_empty()),
        }
    }
}

#[test]
fn prompt_examples_decode() {
    let p = parse_bros_output(BROS_EXAMPLE).unwrap();
    assert_eq!(p.reactions.len(), 1);
    assert_eq!(p.reactions[0].reactants[0].bbox.unwrap().to_array(), [0.1, 0.2, 0.3, 0.4]);
    let p = parse_bivp_output(BIVP_EXAMPLE).unwrap();
    let r = &p.reactions[0];
    assert_eq!(r.reactants, vec![Component::mol_index(1), Component::txt("NaCl")]);
    assert_eq!(r.conditions, vec![Component::mol_index(3), Component::txt("H2O, 25°C")]);
    assert_eq!(r.products, vec![Component::mol_index(2), Component::idt("1a")]);
    assert!(parse_bivp_output("[]").unwrap().reactions.is_empty());
}

#[test]
fn error_kinds_are_distinct() {
    assert_eq!(parse_bros_output("I cannot parse this image.").unwrap_err().class(), FailureClass::NoJson);
    let no_bbox = r#"[{"reactants": [{"category": "structure"}]}]"#;
    assert_eq!(parse_bros_output(no_bbox).unwrap_err().class(), FailureClass::MissingField);
    let oor = r#"[{"reactants": [{"category": "structure", "bbox": [0.5, 0.2, 0.3, 0.4]}]}]"#;
    assert_eq!(parse_bros_output(oor).unwrap_err().class(), FailureClass::BBox);
    let mol_content = r#"[{"reactants": [{"type": "mol", "content": "X"}]}]"#;
    assert!(matches!(parse_bivp_output(mol_content), Err(ParseError::MissingField { field: "index", .. })));
    let zero = r#"[{"reactants": [{"type": "mol", "index": 0}]}]"#;
    assert_eq!(parse_bivp_output(zero).unwrap_err().class(), FailureClass::Index);
}

#[test]
fn fenced_payload_with_prose() {
    let wrapped = format!("Sure.\n```json\n{BIVP_EXAMPLE}\n```\nDone.");
    assert_eq!(parse_bivp_output(&wrapped).unwrap().reactions, parse_bivp_output(BIVP_EXAMPLE).unwrap().reactions);
    assert_eq!(extract_json_array("[1, [2]] tail").unwrap().len(), 2);
}

#[test]
fn oracle_output_resolves_to_ground_truth() {
    let corpus = generate_corpus(7, 3, &SynthParams::default()).unwrap();
    for d in &corpus.diagrams {
        let ctx = RequestContext { image_id: d.id().to_string(), index_map: Some(d.index_map()), region: None };
        let raw = oracle_reply(d, PromptKind::Bivp, &ctx, &NoiseConfig::default());
        let resolved = resolve_bivp(&parse_bivp_output(&raw).unwrap(), &d.index_map()).unwrap();
        assert_eq!(resolved.len(), d.reactions.len());
        for (a, b) in resolved.iter().zip(&d.reactions) {
            let mut gt = b.clone();
            // BIVP carries no text boxes
            gt.components_mut().filter(|c| c.kind.is_text()).for_each(|c| c.bbox = None);
            assert_eq!(canonical(a), canonical(&gt), "{}", d.id());
        }

        let raw = oracle_reply(d, PromptKind::Bros, &ctx, &NoiseConfig::default());
        let bros = parse_bros_output(&raw).unwrap();
        for (a, b) in bros.reactions.iter().zip(&d.reactions) {
            let mols = |r: &ReactionAnnotation| r.components().filter(|c| c.is_mol()).map(|c| c.bbox.unwrap().to_array()).collect::<Vec<_>>();
            assert_eq!(mols(a), mols(b));
        }
    }
}

#[test]
fn mutated_payloads_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..2000 {
        let base = if i % 2 == 0 { BROS_EXAMPLE } else { BIVP_EXAMPLE };
        check(&mutate_payload(&mut rng, base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn arbitrary_text_is_total(s in "\\PC{0,200}") {
        check(&s);
    }

    #[test]
    fn arbitrary_json_shapes_are_total(s in "[\\[\\]{}\",:a-z0-9. -]{0,120}") {
        check(&s);
    }
}
