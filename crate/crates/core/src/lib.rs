//! Core algorithms for learning theorem representations over kernel-level
//! term ASTs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem (checkpoint files, dataset files, corpus directories, the CLI)
//! lives in the `prooflens` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`sexpr`] and [`ast`] turn term s-expressions into labeled trees and
//!    undirected graphs with one-hot syntactic-role features.
//! 2. [`tape`] is a small reverse-mode autodiff engine over dense `f64`
//!    matrices; [`optim`], [`gradcheck`] and [`checkpoint`] sit on top of it.
//! 3. [`encoder`] holds the GIN encoder and a Child-Sum TreeLSTM baseline.
//! 4. [`contrastive`] pre-trains an encoder on premise selection with an
//!    InfoNCE objective.
//! 5. [`grammar`] and [`decoder`] fine-tune a grammar-constrained tactic
//!    decoder with teacher forcing.
//! 6. [`datagen`] builds premise-selection datasets and synthetic corpora.
#![no_std]

extern crate alloc;

pub mod ast;
pub mod checkpoint;
pub mod contrastive;
pub mod datagen;
pub mod decoder;
pub mod encoder;
mod error;
pub mod gradcheck;
pub mod grammar;
pub mod layers;
pub mod optim;
pub mod rng;
pub mod sexpr;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
