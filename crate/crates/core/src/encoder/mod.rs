//! Term encoders: map a [`TermAst`] to a fixed-size `1 x H` embedding.

mod gin;
mod treelstm;

use core::fmt;
use core::str::FromStr;

pub use gin::GinEncoder;
pub use treelstm::TreeLstmEncoder;

use alloc::vec::Vec;

use crate::ast::{ast_to_graph, NodeVocab, TermAst, TermGraph};
use crate::rng::SplitMix64;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::ModelState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Gin,
    TreeLstm,
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gin" => Ok(EncoderKind::Gin),
            "treelstm" => Ok(EncoderKind::TreeLstm),
            other => Err(Error::InvalidConfig(alloc::format!("unknown encoder {other:?}"))),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Gin => "gin",
            EncoderKind::TreeLstm => "treelstm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoder {
    Gin(GinEncoder),
    TreeLstm(TreeLstmEncoder),
}

impl Encoder {
    /// `layers` is ignored by the TreeLSTM.
    pub fn new(kind: EncoderKind, input_dim: usize, hidden: usize, layers: usize) -> Result<Self> {
        Ok(match kind {
            EncoderKind::Gin => Encoder::Gin(GinEncoder::new(input_dim, hidden, layers)?),
            EncoderKind::TreeLstm => Encoder::TreeLstm(TreeLstmEncoder::new(input_dim, hidden)?),
        })
    }

    /// Recovers the encoder architecture from the `encoder.*` parameters.
    pub fn from_state(state: &ModelState) -> Result<Self> {
        if TreeLstmEncoder::is_present(state) {
            Ok(Encoder::TreeLstm(TreeLstmEncoder::from_state(state)?))
        } else {
            Ok(Encoder::Gin(GinEncoder::from_state(state)?))
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Gin(_) => EncoderKind::Gin,
            Encoder::TreeLstm(_) => EncoderKind::TreeLstm,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Encoder::Gin(g) => g.hidden,
            Encoder::TreeLstm(t) => t.hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Gin(g) => g.input_dim,
            Encoder::TreeLstm(t) => t.input_dim,
        }
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        match self {
            Encoder::Gin(g) => g.init(state, rng),
            Encoder::TreeLstm(t) => t.init(state, rng),
        }
    }

    pub fn encode(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        ast: &TermAst,
        vocab: &NodeVocab,
        mode: Mode,
    ) -> Result<Var> {
        match self {
            Encoder::Gin(g) => g.encode(tape, state, &ast_to_graph(ast, vocab), mode),
            Encoder::TreeLstm(t) => t.encode(tape, state, ast, vocab),
        }
    }

    /// `G x H` embeddings of terms encoded as one batch. For the GIN, batch
    /// norm statistics are shared across all terms in train mode.
    pub fn encode_many(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        asts: &[&TermAst],
        vocab: &NodeVocab,
        mode: Mode,
    ) -> Result<Var> {
        match self {
            Encoder::Gin(g) => {
                let graphs: Vec<TermGraph> = asts.iter().map(|a| ast_to_graph(a, vocab)).collect();
                g.encode_batch(tape, state, &graphs, mode)
            }
            Encoder::TreeLstm(t) => {
                let rows = asts
                    .iter()
                    .map(|a| t.encode(tape, state, a, vocab))
                    .collect::<Result<Vec<_>>>()?;
                tape.concat_rows(&rows)
            }
        }
    }
}
