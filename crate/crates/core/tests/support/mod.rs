#![allow(dead_code)]

pub mod oracle;

use prooflens_core::ast::{NodeVocab, TermAst};
use prooflens_core::rng::SplitMix64;
use prooflens_core::tensor::{ModelState, Tensor};

pub const LABELS: [&str; 6] = ["App", "Const", "Lambda", "Prod", "Rel", "Var"];

pub fn vocab() -> NodeVocab {
    NodeVocab::from_labels(LABELS)
}

/// Random tree with at most `max_nodes` nodes; some leaves carry identifiers.
pub fn random_tree(rng: &mut SplitMix64, max_nodes: usize) -> TermAst {
    let budget = 1 + rng.below(max_nodes);
    let mut left = budget - 1;
    grow(rng, &mut left)
}

fn grow(rng: &mut SplitMix64, left: &mut usize) -> TermAst {
    let label = LABELS[rng.below(LABELS.len())];
    let mut children = Vec::new();
    while *left > 0 && children.len() < 3 && rng.next_f64() < 0.6 {
        *left -= 1;
        if *left > 0 && rng.next_f64() < 0.2 {
            children.push(TermAst::ident("x"));
        } else {
            children.push(grow(rng, left));
        }
    }
    TermAst::compose(label, children)
}

/// Replaces every parameter and running statistic with seeded random values
/// so no entry keeps its neutral initial value.
pub fn scramble(state: &mut ModelState, seed: u64) {
    let mut rng = SplitMix64::new(seed);
    for (name, t) in state.params.iter_mut() {
        let (lo, hi) = if name.ends_with(".gamma") { (0.5, 1.5) } else { (-0.6, 0.6) };
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(lo, hi));
    }
    for (name, t) in state.buffers.iter_mut() {
        let (lo, hi) = if name.ends_with(".running_var") { (0.5, 1.5) } else { (-0.3, 0.3) };
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(lo, hi));
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn row(t: &Tensor, r: usize) -> Vec<f64> {
    t.row(r).to_vec()
}
