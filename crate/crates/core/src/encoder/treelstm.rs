//! Child-Sum TreeLSTM baseline encoder.
//!
//! Nodes are processed bottom-up. For node `v` with children `C(v)`:
//!
//! ```text
//! h~  = sum_{c in C(v)} h_c
//! i   = sigmoid(x_v W_i + h~ U_i + b_i)
//! o   = sigmoid(x_v W_o + h~ U_o + b_o)
//! u   = tanh(x_v W_u + h~ U_u + b_u)
//! f_c = sigmoid(x_v W_f + h_c U_f + b_f)        for each child c
//! c_v = i * u + sum_c f_c * c_c
//! h_v = o * tanh(c_v)
//! ```
//!
//! The embedding is the root's hidden state.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::{ast_to_graph, NodeVocab, TermAst};
use crate::rng::SplitMix64;
use crate::tape::{Tape, Var};
use crate::tensor::{ModelState, Tensor};
use crate::{Error, Result};

const PREFIX: &str = "encoder.treelstm";
const GATES: [&str; 4] = ["i", "o", "u", "f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLstmEncoder {
    pub input_dim: usize,
    pub hidden: usize,
}

fn name(kind: &str, gate: &str) -> String {
    format!("{PREFIX}.{kind}_{gate}")
}

impl TreeLstmEncoder {
    pub fn new(input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::InvalidConfig(format!("TreeLSTM needs positive sizes, got D={input_dim} H={hidden}")));
        }
        Ok(TreeLstmEncoder { input_dim, hidden })
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        for gate in GATES {
            state.params.insert(name("w", gate), Tensor::glorot(self.input_dim, self.hidden, rng));
            state.params.insert(name("u", gate), Tensor::glorot(self.hidden, self.hidden, rng));
            state.params.insert(name("b", gate), Tensor::zeros(&[self.hidden]));
        }
    }

    pub fn from_state(state: &ModelState) -> Result<Self> {
        let (input_dim, hidden) = state.params.require(&name("w", "i"))?.dims2();
        Self::new(input_dim, hidden)
    }

    pub fn is_present(state: &ModelState) -> bool {
        state.params.contains(&name("w", "i"))
    }

    /// `1 x H` root hidden state.
    pub fn encode(&self, tape: &mut Tape, state: &ModelState, ast: &TermAst, vocab: &NodeVocab) -> Result<Var> {
        if vocab.dim() != self.input_dim {
            return Err(Error::ShapeMismatch {
                op: "treelstm_encode",
                detail: format!("vocabulary has {} labels, encoder expects {}", vocab.dim(), self.input_dim),
            });
        }
        let graph = ast_to_graph(ast, vocab);
        let x = tape.constant(graph.features().clone())?;

        // Input projections for all nodes at once: one n x H matrix per gate.
        let mut projected = [x; 4];
        let mut recurrent = [x; 4];
        let mut bias = [x; 4];
        for (g, gate) in GATES.iter().enumerate() {
            let w = tape.param(&state.params, &name("w", gate))?;
            projected[g] = tape.matmul(x, w)?;
            recurrent[g] = tape.param(&state.params, &name("u", gate))?;
            bias[g] = tape.param(&state.params, &name("b", gate))?;
        }

        let n = ast.len();
        let mut hidden: Vec<Option<Var>> = vec![None; n];
        let mut cell: Vec<Option<Var>> = vec![None; n];
        // Pre-order ids: children always have larger ids than their parent.
        for v in (0..n).rev() {
            let children = &ast.node(v).children;
            let child_h: Vec<Var> = children.iter().map(|&c| hidden[c].expect("child processed")).collect();
            let child_c: Vec<Var> = children.iter().map(|&c| cell[c].expect("child processed")).collect();

            let mut pre = [x; 3];
            for g in 0..3 {
                let xg = tape.row(projected[g], v)?;
                let mut z = tape.add(xg, bias[g])?;
                if let Some((&first, rest)) = child_h.split_first() {
                    let mut h_sum = first;
                    for &h in rest {
                        h_sum = tape.add(h_sum, h)?;
                    }
                    let uh = tape.matmul(h_sum, recurrent[g])?;
                    z = tape.add(z, uh)?;
                }
                pre[g] = z;
            }
            let i = tape.sigmoid(pre[0])?;
            let o = tape.sigmoid(pre[1])?;
            let u = tape.tanh(pre[2])?;
            let mut c = tape.mul(i, u)?;

            if !child_h.is_empty() {
                let xf = tape.row(projected[3], v)?;
                let xf = tape.add(xf, bias[3])?;
                for (&hc, &cc) in child_h.iter().zip(&child_c) {
                    let uf = tape.matmul(hc, recurrent[3])?;
                    let f = tape.add(xf, uf)?;
                    let f = tape.sigmoid(f)?;
                    let fc = tape.mul(f, cc)?;
                    c = tape.add(c, fc)?;
                }
            }
            let tc = tape.tanh(c)?;
            hidden[v] = Some(tape.mul(o, tc)?);
            cell[v] = Some(c);
        }
        Ok(hidden[0].expect("root processed"))
    }
}
