//! Straightforward loop-based reference implementations over plain `f64`
//! vectors, written without the tape, used to check the library's models.

#![allow(dead_code)]

use prooflens_core::ast::{NodeVocab, TermAst};
use prooflens_core::grammar::{Action, Grammar, Symbol};
use prooflens_core::tensor::ModelState;

pub type Mat = Vec<Vec<f64>>;

pub fn mat(state: &ModelState, name: &str) -> Mat {
    let t = state.params.get(name).or_else(|| state.buffers.get(name)).unwrap_or_else(|| panic!("missing {name}"));
    let (r, c) = t.dims2();
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

pub fn vector(state: &ModelState, name: &str) -> Vec<f64> {
    let t = state.params.get(name).or_else(|| state.buffers.get(name)).unwrap_or_else(|| panic!("missing {name}"));
    t.data().to_vec()
}

pub fn vec_mat(x: &[f64], w: &Mat) -> Vec<f64> {
    let cols = w[0].len();
    let mut out = vec![0.0; cols];
    for (i, xi) in x.iter().enumerate() {
        for j in 0..cols {
            out[j] += xi * w[i][j];
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log-sum-exp with the maximum factored out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn one_hot_rows(ast: &TermAst, vocab: &NodeVocab) -> Mat {
    ast.nodes()
        .iter()
        .map(|n| {
            let mut row = vec![0.0; vocab.dim()];
            row[vocab.index(&n.label)] = 1.0;
            row
        })
        .collect()
}

fn adjacency(ast: &TermAst) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); ast.len()];
    for (v, node) in ast.nodes().iter().enumerate() {
        for &c in &node.children {
            adj[v].push(c);
            adj[c].push(v);
        }
    }
    adj
}

/// Batch norm of `x` in place, per column, with either the batch statistics
/// or the given running ones.
fn batch_norm(x: &mut Mat, state: &ModelState, prefix: &str, train: bool) {
    let gamma = vector(state, &format!("{prefix}.gamma"));
    let beta = vector(state, &format!("{prefix}.beta"));
    let f = gamma.len();
    let n = x.len() as f64;
    for j in 0..f {
        let (mean, var) = if train {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
            (mean, var)
        } else {
            (
                vector(state, &format!("{prefix}.running_mean"))[j],
                vector(state, &format!("{prefix}.running_var"))[j],
            )
        };
        let denom = (var + 1e-5).sqrt();
        for r in x.iter_mut() {
            r[j] = gamma[j] * (r[j] - mean) / denom + beta[j];
        }
    }
}

/// GIN embeddings of several terms encoded together: message passing inside
/// each term, batch norm over all their nodes.
pub fn gin_embed(state: &ModelState, terms: &[&TermAst], vocab: &NodeVocab, layers: usize, train: bool) -> Mat {
    let mut h: Mat = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut owner = Vec::new();
    for (g, t) in terms.iter().enumerate() {
        let base = h.len();
        h.extend(one_hot_rows(t, vocab));
        adj.extend(adjacency(t).into_iter().map(|ns| ns.into_iter().map(|u| u + base).collect::<Vec<_>>()));
        owner.extend(std::iter::repeat_n(g, t.len()));
    }
    let hidden = mat(state, "encoder.layer0.w1")[0].len();
    let mut readout = vec![vec![0.0; hidden]; terms.len()];
    for k in 0..layers {
        let p = format!("encoder.layer{k}");
        let agg: Mat = (0..h.len())
            .map(|v| adj[v].iter().fold(h[v].clone(), |acc, &u| add(&acc, &h[u])))
            .collect();
        let (w1, b1) = (mat(state, &format!("{p}.w1")), vector(state, &format!("{p}.b1")));
        let mut z: Mat = agg.iter().map(|r| add(&vec_mat(r, &w1), &b1)).collect();
        batch_norm(&mut z, state, &format!("{p}.bn1"), train);
        z.iter_mut().flatten().for_each(|x| *x = x.max(0.0));
        let (w2, b2) = (mat(state, &format!("{p}.w2")), vector(state, &format!("{p}.b2")));
        let mut z: Mat = z.iter().map(|r| add(&vec_mat(r, &w2), &b2)).collect();
        batch_norm(&mut z, state, &format!("{p}.bn2"), train);
        z.iter_mut().flatten().for_each(|x| *x = x.max(0.0));
        h = z;
        for (g, t) in terms.iter().enumerate() {
            let rows: Vec<&Vec<f64>> = h.iter().zip(&owner).filter(|(_, &o)| o == g).map(|(r, _)| r).collect();
            for j in 0..hidden {
                readout[g][j] += rows.iter().map(|r| r[j]).sum::<f64>() / t.len() as f64 / layers as f64;
            }
        }
    }
    readout
}

/// Child-sum TreeLSTM root state, by direct recursion.
pub fn treelstm_embed(state: &ModelState, ast: &TermAst, vocab: &NodeVocab) -> Vec<f64> {
    let x = one_hot_rows(ast, vocab);
    fn node(state: &ModelState, ast: &TermAst, x: &Mat, v: usize) -> (Vec<f64>, Vec<f64>) {
        let kids: Vec<(Vec<f64>, Vec<f64>)> = ast.node(v).children.iter().map(|&c| node(state, ast, x, c)).collect();
        let hidden = vector(state, "encoder.treelstm.b_i").len();
        let mut h_sum = vec![0.0; hidden];
        for (h, _) in &kids {
            h_sum = add(&h_sum, h);
        }
        let gate = |g: &str, h: &[f64]| -> Vec<f64> {
            let a = vec_mat(&x[v], &mat(state, &format!("encoder.treelstm.w_{g}")));
            let b = vec_mat(h, &mat(state, &format!("encoder.treelstm.u_{g}")));
            let c = vector(state, &format!("encoder.treelstm.b_{g}"));
            (0..hidden).map(|j| a[j] + b[j] + c[j]).collect()
        };
        let i: Vec<f64> = gate("i", &h_sum).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = gate("o", &h_sum).into_iter().map(sigmoid).collect();
        let u: Vec<f64> = gate("u", &h_sum).into_iter().map(f64::tanh).collect();
        let mut c: Vec<f64> = (0..hidden).map(|j| i[j] * u[j]).collect();
        for (hk, ck) in &kids {
            let f: Vec<f64> = gate("f", hk).into_iter().map(sigmoid).collect();
            for j in 0..hidden {
                c[j] += f[j] * ck[j];
            }
        }
        let h = (0..hidden).map(|j| o[j] * c[j].tanh()).collect();
        (h, c)
    }
    node(state, ast, &x, 0).0
}

pub fn project(state: &ModelState, h: &[f64]) -> Vec<f64> {
    let a: Vec<f64> = add(&vec_mat(h, &mat(state, "projection.l1.w")), &vector(state, "projection.l1.b"))
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    add(&vec_mat(&a, &mat(state, "projection.l2.w")), &vector(state, "projection.l2.b"))
}

/// `-log softmax(dots)[0]` with the positive's dot product first.
pub fn info_nce(z_t: &[f64], z_pos: &[f64], z_negs: &[Vec<f64>]) -> f64 {
    let mut dots = vec![dot(z_t, z_pos)];
    dots.extend(z_negs.iter().map(|z| dot(z_t, z)));
    log_sum_exp(&dots) - dots[0]
}

/// Controller state after one action.
pub fn next_state(state: &ModelState, s: &[f64], action: Action, premises: &Mat) -> Vec<f64> {
    let x = match action {
        Action::Production(p) => vec_mat(&mat(state, "decoder.embed")[p], &mat(state, "decoder.w_a")),
        Action::Premise(i) => vec_mat(&premises[i], &mat(state, "decoder.w_h")),
    };
    let r = vec_mat(s, &mat(state, "decoder.w_s"));
    let b = vector(state, "decoder.b");
    (0..s.len()).map(|j| (r[j] + x[j] + b[j]).tanh()).collect()
}

pub fn initial_state(state: &ModelState, goal: &[f64]) -> Vec<f64> {
    vec_mat(goal, &mat(state, "decoder.w_init")).into_iter().map(f64::tanh).collect()
}

/// What the next gold action must fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Nonterminal(usize),
    Premise,
}

/// Logits over the slot's choices, with `-inf` for productions of other
/// nonterminals.
pub fn logits(state: &ModelState, grammar: &Grammar, s: &[f64], slot: Slot, premises: &Mat) -> Vec<f64> {
    match slot {
        Slot::Nonterminal(nt) => vec_mat(s, &mat(state, "decoder.u"))
            .into_iter()
            .enumerate()
            .map(|(p, l)| if grammar.production(p).lhs == nt { l } else { f64::NEG_INFINITY })
            .collect(),
        Slot::Premise => {
            let q = vec_mat(s, &mat(state, "decoder.w_p"));
            premises.iter().map(|h| dot(&q, h)).collect()
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(logits);
    logits.iter().map(|l| if l.is_finite() { (l - z).exp() } else { 0.0 }).collect()
}

/// Teacher-forced mean cross-entropy, expanding the leftmost open slot.
pub fn teacher_forced_loss(state: &ModelState, grammar: &Grammar, goal: &[f64], premises: &Mat, gold: &[Action]) -> f64 {
    let mut stack = vec![Slot::Nonterminal(grammar.start())];
    let mut s = initial_state(state, goal);
    let mut total = 0.0;
    for &action in gold {
        let slot = stack.pop().expect("gold longer than derivation");
        let l = logits(state, grammar, &s, slot, premises);
        let target = match action {
            Action::Production(p) => p,
            Action::Premise(i) => i,
        };
        total += log_sum_exp(&l) - l[target];
        if let Action::Production(p) = action {
            for sym in grammar.production(p).rhs.iter().rev() {
                match *sym {
                    Symbol::Nonterminal(nt) => stack.push(Slot::Nonterminal(nt)),
                    Symbol::Premise => stack.push(Slot::Premise),
                    Symbol::Terminal(_) => {}
                }
            }
        }
        s = next_state(state, &s, action, premises);
    }
    assert!(stack.is_empty(), "gold shorter than derivation");
    total / gold.len() as f64
}
