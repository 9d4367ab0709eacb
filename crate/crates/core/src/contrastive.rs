//! Premise-selection pre-training: projection head, InfoNCE objective,
//! argmax inference and the training loop.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::{NodeVocab, TermAst};
use crate::encoder::{Encoder, EncoderKind};
use crate::layers::{commit_bn_updates, init_linear, linear};
use crate::optim::Adam;
use crate::rng::SplitMix64;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::ModelState;
use crate::{Error, Result};

pub const MAX_NEGATIVES: usize = 10;

/// Two-layer MLP `z = relu(h W1 + b1) W2 + b2`, parameters under `projection.*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionHead {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl ProjectionHead {
    pub fn new(input: usize, output: usize) -> Self {
        ProjectionHead {
            input,
            hidden: input,
            output,
        }
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        init_linear(state, "projection.l1", self.input, self.hidden, rng);
        init_linear(state, "projection.l2", self.hidden, self.output, rng);
    }

    pub fn from_state(state: &ModelState) -> Result<Self> {
        let (input, hidden) = state.params.require("projection.l1.w")?.dims2();
        let (_, output) = state.params.require("projection.l2.w")?.dims2();
        Ok(ProjectionHead { input, hidden, output })
    }

    /// Projects every row of `h`.
    pub fn project(&self, tape: &mut Tape, state: &ModelState, h: Var) -> Result<Var> {
        let a = linear(tape, state, "projection.l1", h)?;
        let a = tape.relu(a)?;
        linear(tape, state, "projection.l2", a)
    }
}

/// `-log softmax(scores)[positive]`, from a `1 x N` row of dot products.
pub fn info_nce_from_scores(tape: &mut Tape, scores: Var, positive: usize) -> Result<Var> {
    if tape.value(scores).len() < 2 {
        return Err(Error::ShapeMismatch {
            op: "info_nce",
            detail: "need a positive and at least one negative".into(),
        });
    }
    tape.softmax_nll(scores, None, positive)
}

/// InfoNCE over explicit latent vectors: the softmax denominator runs over
/// the positive and every negative. No temperature, no normalization.
pub fn info_nce(tape: &mut Tape, z_t: Var, z_pos: Var, z_negs: &[Var]) -> Result<Var> {
    if z_negs.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "info_nce",
            detail: "at least one negative is required".into(),
        });
    }
    let mut dots = Vec::with_capacity(z_negs.len() + 1);
    dots.push(tape.dot(z_t, z_pos)?);
    for &z in z_negs {
        dots.push(tape.dot(z_t, z)?);
    }
    let column = tape.concat_rows(&dots)?;
    let row = tape.transpose(column)?;
    info_nce_from_scores(tape, row, 0)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_first(scores: &[f64]) -> Result<usize> {
    let (first, rest) = scores.split_first().ok_or(Error::EmptyCandidates)?;
    let mut best = (0, *first);
    for (i, &s) in rest.iter().enumerate() {
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    Ok(best.0)
}

/// One pre-training example: a theorem, the premise it uses, and up to ten
/// hard negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PremiseInstance {
    pub theorem: TermAst,
    pub positive: TermAst,
    pub negatives: Vec<TermAst>,
    /// Source file, used for file-level splits.
    pub file: Option<String>,
}

impl PremiseInstance {
    pub fn validate(&self) -> Result<()> {
        if self.negatives.is_empty() || self.negatives.len() > MAX_NEGATIVES {
            return Err(Error::InvalidConfig(format!(
                "a premise instance needs 1..={MAX_NEGATIVES} negatives, found {}",
                self.negatives.len()
            )));
        }
        Ok(())
    }

    /// Candidates in scoring order: negatives first, positive last. With
    /// lowest-index tie-breaking a tie never counts as a correct selection.
    pub fn candidates(&self) -> Vec<&TermAst> {
        self.negatives.iter().chain(core::iter::once(&self.positive)).collect()
    }

    pub fn positive_index(&self) -> usize {
        self.negatives.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &TermAst> {
        core::iter::once(&self.theorem).chain(self.candidates())
    }
}

/// Encoder plus projection head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PremiseModel {
    pub encoder: Encoder,
    pub projection: ProjectionHead,
}

impl PremiseModel {
    pub fn new(encoder: Encoder, proj_dim: usize) -> Self {
        PremiseModel {
            encoder,
            projection: ProjectionHead::new(encoder.hidden(), proj_dim),
        }
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        self.encoder.init(state, rng);
        self.projection.init(state, rng);
    }

    pub fn from_state(state: &ModelState) -> Result<Self> {
        Ok(PremiseModel {
            encoder: Encoder::from_state(state)?,
            projection: ProjectionHead::from_state(state)?,
        })
    }

    /// `1 x N` scores `z_t . z_p` for each candidate.
    pub fn scores(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        vocab: &NodeVocab,
        theorem: &TermAst,
        candidates: &[&TermAst],
        mode: Mode,
    ) -> Result<Var> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let mut terms = Vec::with_capacity(candidates.len() + 1);
        terms.push(theorem);
        terms.extend_from_slice(candidates);
        let h = self.encoder.encode_many(tape, state, &terms, vocab, mode)?;
        let z = self.projection.project(tape, state, h)?;
        let z_t = tape.row(z, 0)?;
        let mut rows = Vec::with_capacity(candidates.len());
        for i in 0..candidates.len() {
            rows.push(tape.row(z, i + 1)?);
        }
        let z_p = tape.concat_rows(&rows)?;
        let z_tt = tape.transpose(z_t)?;
        let column = tape.matmul(z_p, z_tt)?;
        tape.transpose(column)
    }

    /// Eval-mode premise selection.
    pub fn select_premise(
        &self,
        state: &ModelState,
        vocab: &NodeVocab,
        theorem: &TermAst,
        premises: &[&TermAst],
    ) -> Result<usize> {
        let mut tape = Tape::new();
        let scores = self.scores(&mut tape, state, vocab, theorem, premises, Mode::Eval)?;
        argmax_first(tape.value(scores).data())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub layers: usize,
    pub hidden: usize,
    pub proj_dim: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 20,
            lr: 1e-3,
            seed: 0,
            encoder: EncoderKind::Gin,
            layers: 5,
            hidden: 256,
            proj_dim: 256,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

impl EpochMetrics {
    /// `epoch,mean_loss,accuracy`
    pub fn csv_line(&self) -> String {
        format!("{},{},{}", self.epoch, self.mean_loss, self.accuracy)
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model: PremiseModel,
    pub state: ModelState,
    pub metrics: Vec<EpochMetrics>,
}

/// Fresh, seeded model for `config`.
pub fn init_premise_model(config: &PretrainConfig, vocab: &NodeVocab) -> Result<(PremiseModel, ModelState)> {
    let encoder = Encoder::new(config.encoder, vocab.dim(), config.hidden, config.layers)?;
    let model = PremiseModel::new(encoder, config.proj_dim);
    let mut state = ModelState::new();
    model.init(&mut state, &mut SplitMix64::new(config.seed));
    Ok((model, state))
}

/// One Adam step per instance on the InfoNCE loss, encoder and projection
/// trained jointly, instances reshuffled every epoch.
pub fn pretrain(dataset: &[PremiseInstance], vocab: &NodeVocab, config: &PretrainConfig) -> Result<Pretrained> {
    let (model, state) = init_premise_model(config, vocab)?;
    pretrain_from(dataset, vocab, config, model, state)
}

/// [`pretrain`] starting from an existing model and state.
pub fn pretrain_from(
    dataset: &[PremiseInstance],
    vocab: &NodeVocab,
    config: &PretrainConfig,
    model: PremiseModel,
    mut state: ModelState,
) -> Result<Pretrained> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    dataset.iter().try_for_each(PremiseInstance::validate)?;

    let mut adam = Adam::new(config.lr);
    // Shuffling uses its own stream so initialization is independent of it.
    let mut rng = SplitMix64::derive(config.seed, 0x5EED);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut losses = vec![0.0; dataset.len()];
        let mut correct = vec![false; dataset.len()];
        for &idx in &order {
            let inst = &dataset[idx];
            let mut tape = Tape::new();
            let candidates = inst.candidates();
            let scores = model.scores(&mut tape, &state, vocab, &inst.theorem, &candidates, Mode::Train)?;
            let loss = info_nce_from_scores(&mut tape, scores, inst.positive_index())?;
            losses[idx] = tape.scalar(loss);
            correct[idx] = argmax_first(tape.value(scores).data())? == inst.positive_index();
            let grads = tape.param_grads(loss, &state.params)?;
            adam.step(&mut state.params, &grads)?;
            commit_bn_updates(&mut state, tape.bn_updates())?;
        }
        // Summed in dataset order so the value does not depend on the shuffle.
        let n = dataset.len() as f64;
        metrics.push(EpochMetrics {
            epoch,
            mean_loss: losses.iter().sum::<f64>() / n,
            accuracy: correct.iter().filter(|&&c| c).count() as f64 / n,
        });
    }
    Ok(Pretrained { model, state, metrics })
}

/// Fraction of instances where `scorer` ranks the positive strictly first.
/// `scorer` receives the candidates in [`PremiseInstance::candidates`] order.
pub fn eval_premise_with<F>(dataset: &[PremiseInstance], mut scorer: F) -> Result<f64>
where
    F: FnMut(&PremiseInstance) -> Result<Vec<f64>>,
{
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for inst in dataset {
        if argmax_first(&scorer(inst)?)? == inst.positive_index() {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

/// Eval-mode top-1 premise-selection accuracy.
pub fn eval_premise(dataset: &[PremiseInstance], model: &PremiseModel, state: &ModelState, vocab: &NodeVocab) -> Result<f64> {
    eval_premise_with(dataset, |inst| {
        let mut tape = Tape::new();
        let scores = model.scores(&mut tape, state, vocab, &inst.theorem, &inst.candidates(), Mode::Eval)?;
        Ok(tape.value(scores).data().to_vec())
    })
}
