use rxndp_core::backend::{oracle_reply, NoiseConfig, RequestContext};
use rxndp_core::matching::Counts;
use rxndp_core::synthgen::{generate_corpus, SynthParams};
use rxndp_core::{build_diagram, evaluate, parse_bivp_output, resolve_bivp, AnnotatedDiagram, BBox, Component, ImageRef, Layout, MatchMode, PromptKind, ReactionAnnotation};

fn predict(d: &AnnotatedDiagram, noise: &NoiseConfig) -> Vec<ReactionAnnotation> {
    let ctx = RequestContext { image_id: d.id().to_string(), index_map: Some(d.index_map()), region: None };
    let raw = oracle_reply(d, PromptKind::Bivp, &ctx, noise);
    resolve_bivp(&parse_bivp_output(&raw).unwrap(), &d.index_map()).unwrap()
}

fn corpus_counts(diagrams: &[AnnotatedDiagram], noise: &NoiseConfig, mode: &MatchMode) -> Counts {
    diagrams.iter().map(|d| evaluate(&d.reactions, &predict(d, noise), mode).counts).sum()
}

fn corpus() -> Vec<AnnotatedDiagram> {
    generate_corpus(42, 10, &SynthParams::default()).unwrap().diagrams
}

/// Four molecules in a row, far apart; one reaction 1 + 2 -> 3.
fn separated(id: usize) -> AnnotatedDiagram {
    let m: Vec<BBox> = (0..4).map(|k| BBox::new(0.05 + 0.24 * k as f64, 0.4, 0.2 + 0.24 * k as f64, 0.6).unwrap()).collect();
    let r = ReactionAnnotation::new(vec![Component::mol(m[0]), Component::mol(m[1])], vec![Component::txt("reflux")], vec![Component::mol(m[2])]);
    build_diagram(ImageRef { path: format!("sep-{id}.png"), width: 1000, height: 500 }, m, vec![r], Layout::SingleLine).unwrap()
}

#[test]
fn zero_noise_is_perfect() {
    let c = corpus();
    for mode in [MatchMode::soft(), MatchMode::hybrid()] {
        let n = corpus_counts(&c, &NoiseConfig::default(), &mode);
        assert_eq!((n.fp, n.fn_), (0, 0));
        assert_eq!(n.f1(), 1.0);
    }
}

#[test]
fn replies_are_deterministic() {
    let c = corpus();
    let noise = NoiseConfig { drop_reaction_rate: 0.3, role_swap_rate: 0.2, index_corrupt_rate: 0.2, text_typo_rate: 0.5, seed: 9 };
    for d in c.iter().take(12) {
        let ctx = RequestContext { image_id: d.id().to_string(), index_map: Some(d.index_map()), region: None };
        assert_eq!(oracle_reply(d, PromptKind::Bivp, &ctx, &noise), oracle_reply(d, PromptKind::Bivp, &ctx, &noise));
        assert_eq!(oracle_reply(d, PromptKind::Bros, &ctx, &noise), oracle_reply(d, PromptKind::Bros, &ctx, &noise));
    }
}

#[test]
fn full_drop_replies_empty_list() {
    let noise = NoiseConfig { drop_reaction_rate: 1.0, ..Default::default() };
    for d in corpus().iter().take(8) {
        let ctx = RequestContext { image_id: d.id().to_string(), index_map: Some(d.index_map()), region: None };
        assert_eq!(oracle_reply(d, PromptKind::Bivp, &ctx, &noise), "[]");
    }
}

#[test]
fn corrupted_indices_on_separated_molecules_never_match() {
    let ds: Vec<AnnotatedDiagram> = (0..50).map(separated).collect();
    for seed in 0..50 {
        let noise = NoiseConfig { index_corrupt_rate: 1.0, seed, ..Default::default() };
        let n = corpus_counts(&ds, &noise, &MatchMode::soft());
        assert_eq!(n.tp, 0, "seed {seed}");
        assert_eq!(n.f1(), 0.0);
    }
}

#[test]
fn role_swap_exchanges_reactants_and_products() {
    let noise = NoiseConfig { role_swap_rate: 1.0, ..Default::default() };
    for d in corpus().iter().take(12) {
        let pred = predict(d, &noise);
        let clean = predict(d, &NoiseConfig::default());
        for (p, c) in pred.iter().zip(&clean) {
            assert_eq!((&p.reactants, &p.products), (&c.products, &c.reactants));
        }
    }
}

#[test]
fn typos_cost_only_short_strings() {
    let c = corpus();
    let noise = NoiseConfig { text_typo_rate: 1.0, seed: 4, ..Default::default() };
    // one substitution keeps the edit ratio within 0.2 iff the string has >= 5 chars
    let survivors = c
        .iter()
        .flat_map(|d| &d.reactions)
        .filter(|r| r.components().filter(|x| x.kind.is_text()).all(|x| x.content.as_deref().unwrap().chars().count() >= 5))
        .count();
    let total: usize = c.iter().map(|d| d.reactions.len()).sum();
    assert!(survivors < total && survivors > 0, "{survivors}/{total}");
    let n = corpus_counts(&c, &noise, &MatchMode::hybrid());
    assert_eq!(n.tp, survivors);
    let soft = corpus_counts(&c, &noise, &MatchMode::soft());
    assert_eq!(soft.tp, total);

    let long_only: Vec<AnnotatedDiagram> = (0..20).map(separated).collect();
    let n = corpus_counts(&long_only, &noise, &MatchMode::hybrid());
    assert_eq!(n.f1(), 1.0);
}

#[test]
fn mean_f1_is_non_increasing_in_drop_rate() {
    let c: Vec<AnnotatedDiagram> = generate_corpus(42, 4, &SynthParams::default()).unwrap().diagrams;
    let rates = [0.0, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0];
    let means: Vec<f64> = rates
        .iter()
        .map(|&rate| {
            let f: f64 = (0..50).map(|seed| corpus_counts(&c, &NoiseConfig { drop_reaction_rate: rate, seed, ..Default::default() }, &MatchMode::soft()).f1()).sum();
            f / 50.0
        })
        .collect();
    assert_eq!(means[0], 1.0);
    assert_eq!(means[rates.len() - 1], 0.0);
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "{means:?}");
    }
}
