//! Grammar-constrained tactic decoder.
//!
//! The controller state evolves as `s_{t+1} = tanh(s_t W_s + x_t + b)` where
//! `x_t = E[a_t] W_a` after a production and `x_t = h_{p_i} W_h` after
//! choosing premise `i`. The initial state is `s_0 = tanh(h_goal W_init)`.
//! A nonterminal frontier is scored by `s_t U` masked to its productions; a
//! premise frontier by `(s_t W_p) . h_{p_i}` over the candidate premises.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::{NodeVocab, TermAst};
use crate::contrastive::EpochMetrics;
use crate::encoder::{Encoder, EncoderKind};
use crate::grammar::{replay, Action, Derivation, Frontier, Grammar, TacticAst};
use crate::layers::commit_bn_updates;
use crate::optim::Adam;
use crate::rng::SplitMix64;
use crate::tape::{masked_softmax, Mode, Tape, Var};
use crate::tensor::{ModelState, Tensor};
use crate::{Error, Result};

pub const DEFAULT_MAX_STEPS: usize = 64;

/// Decoder sizes. Parameters live under `decoder.*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TacticDecoder {
    pub productions: usize,
    pub embed: usize,
    pub state: usize,
    pub hidden: usize,
}

impl TacticDecoder {
    pub fn new(productions: usize, embed: usize, state: usize, hidden: usize) -> Result<Self> {
        if productions == 0 || embed == 0 || state == 0 || hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "decoder needs positive sizes, got P={productions} A={embed} S={state} H={hidden}"
            )));
        }
        Ok(TacticDecoder {
            productions,
            embed,
            state,
            hidden,
        })
    }

    pub fn init(&self, state: &mut ModelState, rng: &mut SplitMix64) {
        let (p, a, s, h) = (self.productions, self.embed, self.state, self.hidden);
        let params = &mut state.params;
        params.insert("decoder.embed", Tensor::glorot(p, a, rng));
        params.insert("decoder.w_init", Tensor::glorot(h, s, rng));
        params.insert("decoder.w_s", Tensor::glorot(s, s, rng));
        params.insert("decoder.w_a", Tensor::glorot(a, s, rng));
        params.insert("decoder.w_h", Tensor::glorot(h, s, rng));
        params.insert("decoder.b", Tensor::zeros(&[s]));
        params.insert("decoder.u", Tensor::glorot(s, p, rng));
        params.insert("decoder.w_p", Tensor::glorot(s, h, rng));
    }

    pub fn from_state(state: &ModelState) -> Result<Self> {
        let (productions, embed) = state.params.require("decoder.embed")?.dims2();
        let (hidden, s) = state.params.require("decoder.w_init")?.dims2();
        Self::new(productions, embed, s, hidden)
    }

    /// `s_0 = tanh(h_goal W_init)`.
    pub fn initial_state(&self, tape: &mut Tape, state: &ModelState, ctx: &DecodeContext) -> Result<Var> {
        let w = tape.param(&state.params, "decoder.w_init")?;
        let z = tape.matmul(ctx.goal, w)?;
        tape.tanh(z)
    }

    /// Unnormalized scores for `frontier` plus the validity mask (`None`
    /// means every entry is valid).
    pub fn logits(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        grammar: &Grammar,
        s: Var,
        frontier: Frontier,
        ctx: &DecodeContext,
    ) -> Result<(Var, Option<Vec<bool>>)> {
        match frontier {
            Frontier::Nonterminal(nt) => {
                if grammar.productions_for(nt).is_empty() {
                    return Err(Error::NoValidProductions(grammar.nonterminals()[nt].clone()));
                }
                let u = tape.param(&state.params, "decoder.u")?;
                Ok((tape.matmul(s, u)?, Some(grammar.mask(nt))))
            }
            Frontier::Premise => {
                let premises = ctx.premises.ok_or(Error::NoPremises)?;
                let w = tape.param(&state.params, "decoder.w_p")?;
                let q = tape.matmul(s, w)?;
                let pt = tape.transpose(premises)?;
                Ok((tape.matmul(q, pt)?, None))
            }
        }
    }

    /// Controller update after taking `action`.
    pub fn next_state(&self, tape: &mut Tape, state: &ModelState, s: Var, action: Action, ctx: &DecodeContext) -> Result<Var> {
        let x = match action {
            Action::Production(p) => {
                let table = tape.param(&state.params, "decoder.embed")?;
                let e = tape.row(table, p)?;
                let w = tape.param(&state.params, "decoder.w_a")?;
                tape.matmul(e, w)?
            }
            Action::Premise(i) => {
                let premises = ctx.premises.ok_or(Error::NoPremises)?;
                let h = tape.row(premises, i)?;
                let w = tape.param(&state.params, "decoder.w_h")?;
                tape.matmul(h, w)?
            }
        };
        let ws = tape.param(&state.params, "decoder.w_s")?;
        let b = tape.param(&state.params, "decoder.b")?;
        let r = tape.matmul(s, ws)?;
        let z = tape.add(r, x)?;
        let z = tape.add_row(z, b)?;
        tape.tanh(z)
    }

    /// Probabilities for `frontier` (masked entries are exactly 0) and the
    /// state after `action`.
    #[allow(clippy::too_many_arguments)]
    pub fn decode_step(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        grammar: &Grammar,
        s: Var,
        frontier: Frontier,
        ctx: &DecodeContext,
        action: Action,
    ) -> Result<(Vec<f64>, Var)> {
        let (logits, mask) = self.logits(tape, state, grammar, s, frontier, ctx)?;
        let probs = masked_softmax(tape.value(logits).data(), mask.as_deref())?;
        let next = self.next_state(tape, state, s, action, ctx)?;
        Ok((probs, next))
    }
}

/// Encoded goal (`1 x H`) and candidate premises (`n x H`, absent when `n = 0`).
#[derive(Debug, Clone, Copy)]
pub struct DecodeContext {
    pub goal: Var,
    pub premises: Option<Var>,
    pub num_premises: usize,
}

impl DecodeContext {
    pub fn from_embeddings(tape: &mut Tape, goal: Var, premises: &[Var]) -> Result<Self> {
        let stacked = if premises.is_empty() {
            None
        } else {
            Some(tape.concat_rows(premises)?)
        };
        Ok(DecodeContext {
            goal,
            premises: stacked,
            num_premises: premises.len(),
        })
    }
}

/// One fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofStep {
    pub file: String,
    pub position: usize,
    pub goal: TermAst,
    pub premises: Vec<TermAst>,
    pub gold: Vec<Action>,
}

impl ProofStep {
    /// The gold tree; fails unless the gold replays completely and every
    /// premise index points into `premises`.
    pub fn gold_tree(&self, grammar: &Grammar) -> Result<TacticAst> {
        if self.gold.is_empty() {
            return Err(Error::GoldInvalid("empty gold sequence".into()));
        }
        for a in &self.gold {
            if let Action::Premise(i) = a {
                if *i >= self.premises.len() {
                    return Err(Error::GoldInvalid(format!(
                        "premise index {i} out of range for {} premises",
                        self.premises.len()
                    )));
                }
            }
        }
        replay(grammar, &self.gold)
    }
}

/// Encoder plus decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TacticModel {
    pub encoder: Encoder,
    pub decoder: TacticDecoder,
}

/// Loss and bookkeeping for one teacher-forced pass.
#[derive(Debug, Clone)]
pub struct ForcedPass {
    pub loss: Var,
    /// Whether the argmax action matched gold, per position.
    pub correct: Vec<bool>,
    /// Frontier visited at each position.
    pub frontiers: Vec<Frontier>,
}

impl TacticModel {
    pub fn from_state(state: &ModelState) -> Result<Self> {
        Ok(TacticModel {
            encoder: Encoder::from_state(state)?,
            decoder: TacticDecoder::from_state(state)?,
        })
    }

    pub fn context(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        vocab: &NodeVocab,
        goal: &TermAst,
        premises: &[TermAst],
        mode: Mode,
    ) -> Result<DecodeContext> {
        let mut terms = Vec::with_capacity(premises.len() + 1);
        terms.push(goal);
        terms.extend(premises);
        let h = self.encoder.encode_many(tape, state, &terms, vocab, mode)?;
        let g = tape.row(h, 0)?;
        let mut rows = Vec::with_capacity(premises.len());
        for i in 0..premises.len() {
            rows.push(tape.row(h, i + 1)?);
        }
        DecodeContext::from_embeddings(tape, g, &rows)
    }

    /// Mean cross-entropy over the gold positions; gold actions drive every
    /// transition.
    pub fn teacher_forced_loss(
        &self,
        tape: &mut Tape,
        state: &ModelState,
        grammar: &Grammar,
        vocab: &NodeVocab,
        step: &ProofStep,
        mode: Mode,
    ) -> Result<ForcedPass> {
        step.gold_tree(grammar)?;
        let ctx = self.context(tape, state, vocab, &step.goal, &step.premises, mode)?;
        forced_pass(&self.decoder, tape, state, grammar, &ctx, &step.gold)
    }

    /// Expands the leftmost frontier with the best valid action until the
    /// derivation completes.
    pub fn greedy_decode(
        &self,
        state: &ModelState,
        grammar: &Grammar,
        vocab: &NodeVocab,
        goal: &TermAst,
        premises: &[TermAst],
        max_steps: usize,
    ) -> Result<TacticAst> {
        let mut tape = Tape::new();
        let ctx = self.context(&mut tape, state, vocab, goal, premises, Mode::Eval)?;
        let mut s = self.decoder.initial_state(&mut tape, state, &ctx)?;
        let mut derivation = Derivation::new(grammar);
        let mut actions = Vec::new();
        while let Some(frontier) = derivation.frontier() {
            if actions.len() >= max_steps {
                return Err(Error::MaxStepsExceeded(max_steps));
            }
            let (logits, mask) = self.decoder.logits(&mut tape, state, grammar, s, frontier, &ctx)?;
            let best = masked_argmax(tape.value(logits).data(), mask.as_deref())?;
            let action = match frontier {
                Frontier::Nonterminal(_) => Action::Production(best),
                Frontier::Premise => Action::Premise(best),
            };
            s = self.decoder.next_state(&mut tape, state, s, action, &ctx)?;
            derivation.apply(action)?;
            actions.push(action);
        }
        replay(grammar, &actions)
    }
}

/// Teacher-forced pass given an already encoded context.
pub fn forced_pass(
    decoder: &TacticDecoder,
    tape: &mut Tape,
    state: &ModelState,
    grammar: &Grammar,
    ctx: &DecodeContext,
    gold: &[Action],
) -> Result<ForcedPass> {
    if gold.is_empty() {
        return Err(Error::GoldInvalid("empty gold sequence".into()));
    }
    let mut s = decoder.initial_state(tape, state, ctx)?;
    let mut derivation = Derivation::new(grammar);
    let mut terms = Vec::with_capacity(gold.len());
    let mut correct = Vec::with_capacity(gold.len());
    let mut frontiers = Vec::with_capacity(gold.len());
    for &action in gold {
        let frontier = derivation
            .frontier()
            .ok_or_else(|| Error::GoldInvalid("gold continues past a complete derivation".into()))?;
        let target = match (frontier, action) {
            (Frontier::Nonterminal(_), Action::Production(p)) => p,
            (Frontier::Premise, Action::Premise(i)) if i < ctx.num_premises => i,
            _ => return Err(Error::GoldInvalid(format!("{action:?} cannot fill {frontier:?}"))),
        };
        let (logits, mask) = decoder.logits(tape, state, grammar, s, frontier, ctx)?;
        correct.push(masked_argmax(tape.value(logits).data(), mask.as_deref())? == target);
        terms.push(tape.softmax_nll(logits, mask.as_deref(), target)?);
        frontiers.push(frontier);
        s = decoder.next_state(tape, state, s, action, ctx)?;
        derivation.apply(action)?;
    }
    if !derivation.is_complete() {
        return Err(Error::GoldInvalid("gold ends before the derivation completes".into()));
    }
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    let loss = tape.scale(total, 1.0 / terms.len() as f64)?;
    Ok(ForcedPass { loss, correct, frontiers })
}

/// Argmax over valid entries, lowest index on ties.
pub fn masked_argmax(logits: &[f64], mask: Option<&[bool]>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in logits.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyCandidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub layers: usize,
    pub hidden: usize,
    pub embed: usize,
    pub state_dim: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 5,
            lr: 1e-3,
            seed: 0,
            encoder: EncoderKind::Gin,
            layers: 5,
            hidden: 256,
            embed: 64,
            state_dim: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Finetuned {
    pub model: TacticModel,
    pub state: ModelState,
    /// Mean loss and per-position teacher-forced accuracy per epoch.
    pub metrics: Vec<EpochMetrics>,
}

/// Builds the model to fine-tune. With `checkpoint`, the encoder is copied
/// from its `encoder.*` entries (anything else, such as the projection head,
/// is dropped); otherwise it is freshly initialized from the seed. The
/// decoder is always initialized from its own seeded stream.
pub fn init_tactic_model(
    config: &FinetuneConfig,
    grammar: &Grammar,
    vocab: &NodeVocab,
    checkpoint: Option<&ModelState>,
) -> Result<(TacticModel, ModelState)> {
    let wanted = Encoder::new(config.encoder, vocab.dim(), config.hidden, config.layers)?;
    let (encoder, mut state) = match checkpoint {
        Some(ckpt) => {
            let restricted = ckpt.restrict("encoder.");
            let found = Encoder::from_state(&restricted)
                .map_err(|e| Error::CheckpointMismatch(format!("no usable encoder: {e}")))?;
            if found != wanted {
                return Err(Error::CheckpointMismatch(format!(
                    "checkpoint holds {found:?}, configuration asks for {wanted:?}"
                )));
            }
            (found, restricted)
        }
        None => {
            let mut state = ModelState::new();
            wanted.init(&mut state, &mut SplitMix64::new(config.seed));
            (wanted, state)
        }
    };
    let decoder = TacticDecoder::new(grammar.num_productions(), config.embed, config.state_dim, encoder.hidden())?;
    decoder.init(&mut state, &mut SplitMix64::derive(config.seed, 1));
    Ok((TacticModel { encoder, decoder }, state))
}

/// Joint Adam training of encoder and decoder on the teacher-forced loss.
pub fn finetune(
    dataset: &[ProofStep],
    grammar: &Grammar,
    vocab: &NodeVocab,
    config: &FinetuneConfig,
    checkpoint: Option<&ModelState>,
) -> Result<Finetuned> {
    let (model, state) = init_tactic_model(config, grammar, vocab, checkpoint)?;
    finetune_from(dataset, grammar, vocab, config, model, state)
}

/// [`finetune`] from an already built model.
pub fn finetune_from(
    dataset: &[ProofStep],
    grammar: &Grammar,
    vocab: &NodeVocab,
    config: &FinetuneConfig,
    model: TacticModel,
    mut state: ModelState,
) -> Result<Finetuned> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate must be finite and non-negative, got {}", config.lr)));
    }
    for step in dataset {
        step.gold_tree(grammar)?;
    }
    let mut adam = Adam::new(config.lr);
    let mut rng = SplitMix64::derive(config.seed, 0x5EED);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut losses = vec![0.0; dataset.len()];
        let mut hits = vec![0usize; dataset.len()];
        for &idx in &order {
            let mut tape = Tape::new();
            let pass = model.teacher_forced_loss(&mut tape, &state, grammar, vocab, &dataset[idx], Mode::Train)?;
            losses[idx] = tape.scalar(pass.loss);
            hits[idx] = pass.correct.iter().filter(|&&c| c).count();
            let grads = tape.param_grads(pass.loss, &state.params)?;
            adam.step(&mut state.params, &grads)?;
            commit_bn_updates(&mut state, tape.bn_updates())?;
        }
        let positions: usize = dataset.iter().map(|s| s.gold.len()).sum();
        metrics.push(EpochMetrics {
            epoch,
            mean_loss: losses.iter().sum::<f64>() / dataset.len() as f64,
            accuracy: hits.iter().sum::<usize>() as f64 / positions as f64,
        });
    }
    Ok(Finetuned { model, state, metrics })
}

/// Teacher-forced per-position accuracy in eval mode.
pub fn position_accuracy(
    dataset: &[ProofStep],
    model: &TacticModel,
    state: &ModelState,
    grammar: &Grammar,
    vocab: &NodeVocab,
) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for step in dataset {
        let mut tape = Tape::new();
        let pass = model.teacher_forced_loss(&mut tape, state, grammar, vocab, step, Mode::Eval)?;
        hits += pass.correct.iter().filter(|&&c| c).count();
        total += pass.correct.len();
    }
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupResult {
    pub group: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TacticEval {
    /// Sorted by group name.
    pub groups: Vec<GroupResult>,
}

impl TacticEval {
    pub fn correct(&self) -> usize {
        self.groups.iter().map(|g| g.correct).sum()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.total).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }
}

/// Exact-match evaluation grouped by source file. `predict` returns the
/// predicted tree, or an error which counts as a miss.
pub fn eval_tactic_with<F>(dataset: &[ProofStep], grammar: &Grammar, mut predict: F) -> Result<TacticEval>
where
    F: FnMut(&ProofStep) -> Result<TacticAst>,
{
    let mut groups: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for step in dataset {
        let gold = step.gold_tree(grammar)?;
        let entry = groups.entry(&step.file).or_default();
        entry.1 += 1;
        if predict(step).is_ok_and(|t| t == gold) {
            entry.0 += 1;
        }
    }
    Ok(TacticEval {
        groups: groups
            .into_iter()
            .map(|(group, (correct, total))| GroupResult {
                group: group.into(),
                correct,
                total,
            })
            .collect(),
    })
}

/// Greedy-decoding exact-match evaluation.
pub fn eval_tactic(
    dataset: &[ProofStep],
    model: &TacticModel,
    state: &ModelState,
    grammar: &Grammar,
    vocab: &NodeVocab,
) -> Result<TacticEval> {
    if vocab.dim() != model.encoder.input_dim() {
        return Err(Error::CheckpointMismatch(format!(
            "vocabulary has {} labels, encoder expects {}",
            vocab.dim(),
            model.encoder.input_dim()
        )));
    }
    eval_tactic_with(dataset, grammar, |step| {
        model.greedy_decode(state, grammar, vocab, &step.goal, &step.premises, DEFAULT_MAX_STEPS)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::vocab_from_corpus;
    use crate::grammar::parse_tactic;

    fn tiny(grammar: &Grammar, seed: u64) -> (TacticModel, ModelState, NodeVocab, ProofStep) {
        let goal = TermAst::parse("(Prod (App (Const f) (Rel)) (Sort))").unwrap();
        let premises = vec![
            TermAst::parse("(App (Const f) (Rel))").unwrap(),
            TermAst::parse("(Lambda (Sort) (Var x))").unwrap(),
        ];
        let vocab = vocab_from_corpus(core::iter::once(&goal).chain(&premises));
        let config = FinetuneConfig {
            seed,
            layers: 2,
            hidden: 6,
            embed: 4,
            state_dim: 5,
            ..FinetuneConfig::default()
        };
        let (model, state) = init_tactic_model(&config, grammar, &vocab, None).unwrap();
        let tree = parse_tactic(grammar, "seq intro (apply H1)", &|s| s.strip_prefix('H')?.parse().ok()).unwrap();
        let gold = crate::grammar::derivation_sequence(grammar, &tree).unwrap();
        let step = ProofStep {
            file: "a".into(),
            position: 3,
            goal,
            premises,
            gold,
        };
        (model, state, vocab, step)
    }

    fn zero(state: &mut ModelState, name: &str) {
        state.params.get_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
    }

    #[test]
    fn zeroed_scorer_gives_uniform_over_valid() {
        let g = Grammar::parse("S -> a | b A | c\nA -> x | y").unwrap();
        let (_, _, vocab, _) = tiny(&Grammar::default_tactics(), 0);
        let config = FinetuneConfig {
            layers: 1,
            hidden: 4,
            embed: 3,
            state_dim: 3,
            ..FinetuneConfig::default()
        };
        let (model, mut state) = init_tactic_model(&config, &g, &vocab, None).unwrap();
        zero(&mut state, "decoder.u");
        let mut tape = Tape::new();
        let goal = TermAst::parse("(Sort)").unwrap();
        let ctx = model.context(&mut tape, &state, &vocab, &goal, &[], Mode::Eval).unwrap();
        let s = model.decoder.initial_state(&mut tape, &state, &ctx).unwrap();
        let (p, _) = model
            .decoder
            .decode_step(&mut tape, &state, &g, s, Frontier::Nonterminal(1), &ctx, Action::Production(3))
            .unwrap();
        assert_eq!(p, [0.0, 0.0, 0.0, 0.5, 0.5]);
        let (p, _) = model
            .decoder
            .decode_step(&mut tape, &state, &g, s, Frontier::Nonterminal(0), &ctx, Action::Production(0))
            .unwrap();
        for (i, v) in p.iter().enumerate() {
            let expected = if i < 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((v - expected).abs() <= 1e-15);
        }
        assert_eq!(
            model.decoder.logits(&mut tape, &state, &g, s, Frontier::Premise, &ctx).err(),
            Some(Error::NoPremises)
        );
    }

    #[test]
    fn single_production_grammar_has_zero_loss() {
        let g = Grammar::parse("S -> a B c\nB -> d").unwrap();
        let (_, _, vocab, base) = tiny(&Grammar::default_tactics(), 0);
        let config = FinetuneConfig {
            layers: 2,
            hidden: 4,
            embed: 3,
            state_dim: 3,
            ..FinetuneConfig::default()
        };
        let (model, state) = init_tactic_model(&config, &g, &vocab, None).unwrap();
        let step = ProofStep {
            gold: vec![Action::Production(0), Action::Production(1)],
            ..base
        };
        let mut tape = Tape::new();
        let pass = model.teacher_forced_loss(&mut tape, &state, &g, &vocab, &step, Mode::Train).unwrap();
        assert_eq!(tape.scalar(pass.loss), 0.0);
        assert_eq!(pass.correct, [true, true]);
    }

    #[test]
    fn uniform_single_step_loss_is_ln_m() {
        let g = Grammar::default_tactics();
        let (model, mut state, vocab, base) = tiny(&g, 4);
        zero(&mut state, "decoder.u");
        let step = ProofStep {
            gold: vec![Action::Production(2)],
            ..base
        };
        let mut tape = Tape::new();
        let pass = model.teacher_forced_loss(&mut tape, &state, &g, &vocab, &step, Mode::Eval).unwrap();
        assert!((tape.scalar(pass.loss) - libm::log(6.0)).abs() <= 1e-12);
    }

    #[test]
    fn invalid_gold_is_rejected() {
        let g = Grammar::default_tactics();
        let (model, state, vocab, base) = tiny(&g, 1);
        for gold in [
            vec![],
            vec![Action::Production(3)],
            vec![Action::Production(3), Action::Premise(9)],
            vec![Action::Production(0), Action::Production(0)],
            vec![Action::Premise(0)],
        ] {
            let step = ProofStep { gold, ..base.clone() };
            let mut tape = Tape::new();
            let err = model.teacher_forced_loss(&mut tape, &state, &g, &vocab, &step, Mode::Eval).unwrap_err();
            assert!(matches!(err, Error::GoldInvalid(_)), "{err:?}");
        }
    }

    #[test]
    fn scorer_perturbation_keeps_frontiers() {
        let g = Grammar::default_tactics();
        let (model, mut state, vocab, step) = tiny(&g, 2);
        let run = |state: &ModelState| {
            let mut tape = Tape::new();
            let pass = model.teacher_forced_loss(&mut tape, state, &g, &vocab, &step, Mode::Eval).unwrap();
            (tape.scalar(pass.loss), pass.frontiers)
        };
        let (l0, f0) = run(&state);
        for v in state.params.get_mut("decoder.u").unwrap().data_mut() {
            *v = -3.0 * *v + 0.5;
        }
        let (l1, f1) = run(&state);
        assert_ne!(l0, l1);
        assert_eq!(f0, f1);
        assert!(l0 >= 0.0 && l1 >= 0.0);
    }

    #[test]
    fn greedy_decode_is_valid_and_deterministic() {
        let g = Grammar::default_tactics();
        for seed in 0..8 {
            let (model, state, vocab, step) = tiny(&g, seed);
            let a = model.greedy_decode(&state, &g, &vocab, &step.goal, &step.premises, 64);
            let b = model.greedy_decode(&state, &g, &vocab, &step.goal, &step.premises, 64);
            assert_eq!(a, b);
            match a {
                Ok(tree) => tree.validate(&g).unwrap(),
                Err(e) => assert_eq!(e, Error::MaxStepsExceeded(64)),
            }
        }
    }

    #[test]
    fn recursive_grammar_can_exceed_max_steps() {
        let g = Grammar::default_tactics();
        let (model, mut state, vocab, step) = tiny(&g, 0);
        // Only `seq` scores: every frontier keeps expanding.
        let (s, p) = (model.decoder.state, model.decoder.productions);
        let mut u = Tensor::zeros(&[s, p]);
        for r in 0..s {
            u.data_mut()[r * p + 5] = 1.0;
        }
        state.params.insert("decoder.u", u);
        for name in ["decoder.w_s", "decoder.w_a", "decoder.w_h"] {
            zero(&mut state, name);
        }
        let h = model.decoder.hidden;
        state.params.insert("decoder.w_init", Tensor::filled(&[h, s], 1.0));
        state.params.insert("decoder.b", Tensor::filled(&[s], 1.0));
        let err = model.greedy_decode(&state, &g, &vocab, &step.goal, &step.premises, 64).unwrap_err();
        assert_eq!(err, Error::MaxStepsExceeded(64));
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let g = Grammar::default_tactics();
        let (_, state0, vocab, step) = tiny(&g, 3);
        let config = FinetuneConfig {
            epochs: 0,
            seed: 3,
            layers: 2,
            hidden: 6,
            embed: 4,
            state_dim: 5,
            ..FinetuneConfig::default()
        };
        let out = finetune(&[step], &g, &vocab, &config, None).unwrap();
        assert_eq!(out.state, state0);
        assert!(out.metrics.is_empty());
    }

    #[test]
    fn checkpoint_encoder_is_copied_exactly() {
        let g = Grammar::default_tactics();
        let (_, _, vocab, step) = tiny(&g, 0);
        let config = FinetuneConfig {
            epochs: 0,
            seed: 9,
            layers: 2,
            hidden: 6,
            embed: 4,
            state_dim: 5,
            ..FinetuneConfig::default()
        };
        let mut ckpt = ModelState::new();
        Encoder::new(EncoderKind::Gin, vocab.dim(), 6, 2)
            .unwrap()
            .init(&mut ckpt, &mut SplitMix64::new(1234));
        ckpt.params.insert("projection.l1.w", Tensor::zeros(&[6, 6]));
        let out = finetune(&[step.clone()], &g, &vocab, &config, Some(&ckpt)).unwrap();
        assert_eq!(out.state.restrict("encoder."), ckpt.restrict("encoder."));
        assert!(!out.state.params.contains("projection.l1.w"));

        let wrong = FinetuneConfig { hidden: 8, ..config };
        assert!(matches!(finetune(&[step], &g, &vocab, &wrong, Some(&ckpt)), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn eval_groups_sum_to_total() {
        let g = Grammar::default_tactics();
        let (_, _, _, step) = tiny(&g, 0);
        let mut data = Vec::new();
        for (file, n) in [("b", 3), ("a", 2)] {
            for k in 0..n {
                data.push(ProofStep {
                    file: file.into(),
                    position: k,
                    ..step.clone()
                });
            }
        }
        let perfect = eval_tactic_with(&data, &g, |s| s.gold_tree(&g)).unwrap();
        assert_eq!(perfect.correct(), data.len());
        assert_eq!(perfect.groups[0].group, "a");
        let none = eval_tactic_with(&data, &g, |_| Err(Error::NoPremises)).unwrap();
        assert_eq!((none.correct(), none.total()), (0, 5));
        assert_eq!(none.groups.iter().map(|r| r.total).sum::<usize>(), none.total());
    }
}
