//! Graph Isomorphism Network encoder.
//!
//! Layer `k` updates every node as
//! `h_v <- MLP_k(h_v + sum_{u in N(v)} h_u)` with
//! `MLP_k = Linear -> BN -> ReLU -> Linear -> BN -> ReLU`, where batch norm
//! statistics are taken over all nodes of the graphs encoded together. The graph
//! embedding is the mean over layers `1..=K` of the per-layer mean-pooled
//! node states; the raw one-hot features are not part of the readout.

use alloc::format;
use alloc::vec::Vec;

use crate::ast::TermGraph;
use crate::layers::{batch_norm, init_batch_norm};
use crate::rng::SplitMix64;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::{ModelState, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GinEncoder {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl GinEncoder {
    pub fn new(input_dim: usize, hidden: usize, layers: usize) -> Result<Self> {
        if layers == 0 || hidden == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "GIN needs positive sizes, got D={input_dim} H={hidden} K={layers}"
            )));
        }
        Ok(GinEncoder {
            input_dim,
            hidden,
            layers,
        })
    }

    pub fn layer_prefix(k: usize) -> alloc::string::String {
        format!("encoder.layer{k}")
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        for k in 0..self.layers {
            let p = Self::layer_prefix(k);
            let fan_in = if k == 0 { self.input_dim } else { self.hidden };
            state.params.insert(format!("{p}.w1"), Tensor::glorot(fan_in, self.hidden, rng));
            state.params.insert(format!("{p}.b1"), Tensor::zeros(&[self.hidden]));
            init_batch_norm(state, &format!("{p}.bn1"), self.hidden);
            state.params.insert(format!("{p}.w2"), Tensor::glorot(self.hidden, self.hidden, rng));
            state.params.insert(format!("{p}.b2"), Tensor::zeros(&[self.hidden]));
            init_batch_norm(state, &format!("{p}.bn2"), self.hidden);
        }
    }

    /// Recovers the architecture from parameter shapes.
    pub fn from_state(state: &ModelState) -> Result<Self> {
        let mut layers = 0;
        while state.params.contains(&format!("{}.w1", Self::layer_prefix(layers))) {
            layers += 1;
        }
        let w1 = state.params.require("encoder.layer0.w1")?;
        let (input_dim, hidden) = w1.dims2();
        Self::new(input_dim, hidden, layers)
    }

    /// One message-passing layer; `h` holds one row per graph node.
    pub fn layer(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        k: usize,
        h: Var,
        graph: &TermGraph,
        mode: Mode,
    ) -> Result<Var> {
        let p = Self::layer_prefix(k);
        let agg = tape.neighbor_sum(h, graph.neighbors())?;
        let w1 = tape.param(&state.params, &format!("{p}.w1"))?;
        let b1 = tape.param(&state.params, &format!("{p}.b1"))?;
        let z = tape.matmul(agg, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = batch_norm(tape, state, &format!("{p}.bn1"), z, mode)?;
        let z = tape.relu(z)?;
        let w2 = tape.param(&state.params, &format!("{p}.w2"))?;
        let b2 = tape.param(&state.params, &format!("{p}.b2"))?;
        let z = tape.matmul(z, w2)?;
        let z = tape.add_row(z, b2)?;
        let z = batch_norm(tape, state, &format!("{p}.bn2"), z, mode)?;
        tape.relu(z)
    }

    /// `1 x H` graph embedding.
    pub fn encode(&self, tape: &mut Tape, state: &ModelState, graph: &TermGraph, mode: Mode) -> Result<Var> {
        self.encode_batch(tape, state, core::slice::from_ref(graph), mode)
    }

    /// `G x H` embeddings of `G` graphs encoded together: message passing
    /// stays within each graph, batch norm statistics span all their nodes.
    pub fn encode_batch(&self, tape: &mut Tape, state: &ModelState, graphs: &[TermGraph], mode: Mode) -> Result<Var> {
        for g in graphs {
            if g.features().cols() != self.input_dim {
                return Err(Error::ShapeMismatch {
                    op: "gin_encode",
                    detail: format!("features have {} columns, encoder expects {}", g.features().cols(), self.input_dim),
                });
            }
        }
        if graphs.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "gin_encode",
                detail: "no graphs to encode".into(),
            });
        }
        let (union, offsets) = TermGraph::disjoint_union(graphs)?;
        let total = union.num_nodes();
        let mut pool = Tensor::zeros(&[graphs.len(), total]);
        for g in 0..graphs.len() {
            let (lo, hi) = (offsets[g], offsets[g + 1]);
            let weight = 1.0 / (hi - lo) as f64;
            pool.data_mut()[g * total + lo..g * total + hi].iter_mut().for_each(|v| *v = weight);
        }
        let pool = tape.constant(pool)?;

        let mut h = tape.constant(union.features().clone())?;
        let mut readouts = Vec::with_capacity(self.layers);
        for k in 0..self.layers {
            h = self.layer(tape, state, k, h, &union, mode)?;
            readouts.push(if graphs.len() == 1 { tape.mean_rows(h)? } else { tape.matmul(pool, h)? });
        }
        let mut sum = readouts[0];
        for &r in &readouts[1..] {
            sum = tape.add(sum, r)?;
        }
        tape.scale(sum, 1.0 / self.layers as f64)
    }
}
