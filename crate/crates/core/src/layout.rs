//! Layout classification from the reaction graph and component geometry.

use crate::geometry::{median, same_box};
use crate::model::{AnnotatedDiagram, Layout, ReactionAnnotation};
use crate::BBox;

/// Single-line band height as a multiple of the median molecule height.
pub const BAND_FACTOR: f64 = 1.5;

fn intern(boxes: &mut Vec<BBox>, b: &BBox) -> usize {
    match boxes.iter().position(|m| same_box(m, b)) {
        Some(i) => i,
        None => {
            boxes.push(*b);
            boxes.len() - 1
        }
    }
}

fn has_cycle(adj: &[Vec<usize>]) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(u: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
        state[u] = 1;
        for &v in &adj[u] {
            if state[v] == 1 || (state[v] == 0 && visit(v, adj, state)) {
                return true;
            }
        }
        state[u] = 2;
        false
    }
    let mut state = vec![0u8; adj.len()];
    (0..adj.len()).any(|u| state[u] == 0 && visit(u, adj, &mut state))
}

/// Classifies a set of reactions drawn with the given molecule boxes.
///
/// Reactions are nodes; `i -> j` when a product box of `i` is a reactant box
/// of `j`. A directed cycle means cyclic. Branching means tree: a reaction
/// feeding or fed by two others, or one molecule consumed (or produced) by
/// two reactions. Otherwise the diagram is a chain, single-line when every
/// molecule center sits within one horizontal band.
pub fn classify_reactions(reactions: &[ReactionAnnotation], molecules: &[BBox]) -> Layout {
    if reactions.is_empty() {
        return Layout::Unknown;
    }
    let mut ids: Vec<BBox> = Vec::new();
    let mut reactants: Vec<Vec<usize>> = Vec::with_capacity(reactions.len());
    let mut products: Vec<Vec<usize>> = Vec::with_capacity(reactions.len());
    for r in reactions {
        let mut side = |cs: &[crate::Component]| -> Vec<usize> {
            let mut v: Vec<usize> = cs.iter().filter(|c| c.is_mol()).filter_map(|c| c.bbox.as_ref()).map(|b| intern(&mut ids, b)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        reactants.push(side(&r.reactants));
        products.push(side(&r.products));
    }
    if ids.is_empty() {
        return Layout::Unknown;
    }

    let n = reactions.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_deg = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if products[i].iter().any(|m| reactants[j].contains(m)) {
                adj[i].push(j);
                in_deg[j] += 1;
            }
        }
    }
    if has_cycle(&adj) {
        return Layout::Cyclic;
    }
    let consumers = |m: usize| reactants.iter().filter(|r| r.contains(&m)).count();
    let producers = |m: usize| products.iter().filter(|p| p.contains(&m)).count();
    let branching = adj.iter().any(|a| a.len() >= 2)
        || in_deg.iter().any(|&d| d >= 2)
        || (0..ids.len()).any(|m| consumers(m) >= 2 || producers(m) >= 2);
    if branching {
        return Layout::Tree;
    }

    let mut heights: Vec<f64> = if molecules.is_empty() { ids.iter().map(|b| b.height()).collect() } else { molecules.iter().map(|b| b.height()).collect() };
    let band = BAND_FACTOR * median(&mut heights).unwrap_or(0.0);
    let centers: Vec<f64> = reactions
        .iter()
        .flat_map(|r| r.components())
        .filter(|c| c.is_mol())
        .filter_map(|c| c.bbox.as_ref())
        .map(|b| b.center().1)
        .collect();
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= band {
        Layout::SingleLine
    } else {
        Layout::MultiLine
    }
}

pub fn classify_layout(diagram: &AnnotatedDiagram) -> Layout {
    classify_reactions(&diagram.reactions, &diagram.molecules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Component;

    fn b(x: f64, y: f64) -> BBox {
        BBox::new(x, y, x + 0.1, y + 0.1).unwrap()
    }

    fn rxn(r: &[BBox], p: &[BBox]) -> ReactionAnnotation {
        ReactionAnnotation::new(r.iter().map(|x| Component::mol(*x)).collect(), vec![], p.iter().map(|x| Component::mol(*x)).collect())
    }

    #[test]
    fn single_and_multi_line() {
        let (a, c) = (b(0.1, 0.40), b(0.4, 0.45));
        assert_eq!(classify_reactions(&[rxn(&[a], &[c])], &[a, c]), Layout::SingleLine);
        let (d, e) = (b(0.1, 0.1), b(0.4, 0.1));
        let (f, g) = (b(0.1, 0.6), b(0.4, 0.6));
        let rs = [rxn(&[d], &[e]), rxn(&[e], &[f]), rxn(&[f], &[g])];
        assert_eq!(classify_reactions(&rs, &[d, e, f, g]), Layout::MultiLine);
    }

    #[test]
    fn two_cycle_is_cyclic() {
        let (a, c) = (b(0.1, 0.4), b(0.6, 0.4));
        assert_eq!(classify_reactions(&[rxn(&[a], &[c]), rxn(&[c], &[a])], &[a, c]), Layout::Cyclic);
    }

    #[test]
    fn shared_reactant_is_tree() {
        let (a, c, d) = (b(0.1, 0.4), b(0.6, 0.2), b(0.6, 0.7));
        assert_eq!(classify_reactions(&[rxn(&[a], &[c]), rxn(&[a], &[d])], &[a, c, d]), Layout::Tree);
    }

    #[test]
    fn intermediate_feeding_two_is_tree() {
        let (a, m, c, d) = (b(0.0, 0.4), b(0.3, 0.4), b(0.6, 0.2), b(0.6, 0.7));
        let rs = [rxn(&[a], &[m]), rxn(&[m], &[c]), rxn(&[m], &[d])];
        assert_eq!(classify_reactions(&rs, &[a, m, c, d]), Layout::Tree);
    }

    #[test]
    fn empty_is_unknown() {
        assert_eq!(classify_reactions(&[], &[]), Layout::Unknown);
        let text_only = ReactionAnnotation::new(vec![Component::txt("A")], vec![], vec![Component::txt("B")]);
        assert_eq!(classify_reactions(&[text_only], &[]), Layout::Unknown);
    }
}
