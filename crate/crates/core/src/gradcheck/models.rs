//! Gradient checks of the composite models at small random probe points.
//!
//! A probe point is a seeded set of parameters, batch-norm statistics and
//! input terms. Every parameter is drawn away from its neutral initial value,
//! first-layer projection units are kept active, and scores stay of order one
//! so rounding stays below the finite-difference resolution.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{grad_report, GradReport, DEFAULT_PROBE};
use crate::ast::{NodeVocab, TermAst};
use crate::contrastive::{info_nce_from_scores, PremiseModel};
use crate::decoder::{ProofStep, TacticDecoder, TacticModel};
use crate::encoder::{Encoder, EncoderKind};
use crate::grammar::{derivation_sequence, parse_tactic, Grammar};
use crate::rng::SplitMix64;
use crate::tape::{Mode, Tape};
use crate::tensor::{ModelState, ParamStore};
use crate::Result;

/// Six constructor labels plus `UNK`: a 7-dimensional one-hot input.
pub const PROBE_LABELS: [&str; 6] = ["App", "Const", "Lambda", "Prod", "Rel", "Var"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Encoder, projection head and InfoNCE over four candidates.
    Premise,
    /// Encoder, decoder and teacher-forced loss on a tactic with premises.
    Tactic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeConfig {
    pub objective: Objective,
    pub encoder: EncoderKind,
    pub mode: Mode,
    pub hidden: usize,
    pub layers: usize,
    pub state: usize,
}

impl ProbeConfig {
    /// `H = 8`, `K = 2`, `S = 8`.
    pub fn tiny(objective: Objective, encoder: EncoderKind, mode: Mode) -> Self {
        ProbeConfig {
            objective,
            encoder,
            mode,
            hidden: 8,
            layers: 2,
            state: 8,
        }
    }

    pub fn describe(&self) -> String {
        let objective = match self.objective {
            Objective::Premise => "projection+infonce",
            Objective::Tactic => "decoder+teacher-forced",
        };
        format!("{}+{objective} ({:?} BN)", self.encoder, self.mode)
    }
}

pub fn probe_vocab() -> NodeVocab {
    NodeVocab::from_labels(PROBE_LABELS)
}

fn random_term(rng: &mut SplitMix64) -> TermAst {
    fn grow(rng: &mut SplitMix64, left: &mut usize) -> TermAst {
        let label = PROBE_LABELS[rng.below(PROBE_LABELS.len())];
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
    loop {
        let mut left = rng.below(12);
        let t = grow(rng, &mut left);
        if t.len() >= 3 {
            return t;
        }
    }
}

fn scramble(state: &mut ModelState, encoder: EncoderKind, rng: &mut SplitMix64) {
    for (name, t) in state.params.iter_mut() {
        let (lo, hi) = if name.ends_with(".gamma") { (0.5, 1.5) } else { (-0.6, 0.6) };
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(lo, hi));
    }
    for (name, t) in state.buffers.iter_mut() {
        let (lo, hi) = if name.ends_with(".running_var") { (0.5, 1.5) } else { (-0.3, 0.3) };
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(lo, hi));
    }
    if let Some(b) = state.params.get_mut("projection.l1.b") {
        b.data_mut().iter_mut().for_each(|v| *v = 1.5 + v.abs());
    }
    // TreeLSTM states are bounded by 1, GIN readouts are not.
    let shrink = match encoder {
        EncoderKind::Gin => 0.2,
        EncoderKind::TreeLstm => 0.5,
    };
    if let Some(w) = state.params.get_mut("projection.l2.w") {
        w.data_mut().iter_mut().for_each(|v| *v *= shrink);
    }
}

/// GIN biases feeding a train-mode batch norm. Batch statistics cancel any
/// shift they apply, so their exact gradient is zero.
pub fn is_pre_norm_bias(name: &str) -> bool {
    name.starts_with("encoder.layer") && (name.ends_with(".b1") || name.ends_with(".b2"))
}

/// Parameters checked at this probe, and those held fixed.
fn split_params(config: &ProbeConfig, state: &ModelState) -> (ParamStore, ParamStore) {
    let mut checked = ParamStore::new();
    let mut fixed = ParamStore::new();
    for (name, t) in state.params.iter() {
        let freeze = config.mode == Mode::Train && config.encoder == EncoderKind::Gin && is_pre_norm_bias(name);
        if freeze {
            fixed.insert(name.clone(), t.clone());
        } else {
            checked.insert(name.clone(), t.clone());
        }
    }
    (checked, fixed)
}

struct Probe {
    state: ModelState,
    terms: Vec<TermAst>,
    step: Option<(TacticModel, ProofStep, Grammar)>,
    premise: Option<PremiseModel>,
}

fn build(config: &ProbeConfig, seed: u64) -> Result<Probe> {
    let vocab = probe_vocab();
    let mut rng = SplitMix64::new(seed);
    let encoder = Encoder::new(config.encoder, vocab.dim(), config.hidden, config.layers)?;
    let mut state = ModelState::new();
    let terms: Vec<TermAst> = (0..4).map(|_| random_term(&mut rng)).collect();
    match config.objective {
        Objective::Premise => {
            let model = PremiseModel::new(encoder, config.hidden);
            model.init(&mut state, &mut rng);
            scramble(&mut state, config.encoder, &mut rng);
            Ok(Probe {
                state,
                terms,
                step: None,
                premise: Some(model),
            })
        }
        Objective::Tactic => {
            let grammar = Grammar::default_tactics();
            let decoder = TacticDecoder::new(grammar.num_productions(), 4, config.state, config.hidden)?;
            encoder.init(&mut state, &mut rng);
            decoder.init(&mut state, &mut rng);
            scramble(&mut state, config.encoder, &mut rng);
            let names = ["p0", "p1", "p2"];
            let tree = parse_tactic(&grammar, "seq (apply p1) (seq split (rewrite p2))", &|s: &str| {
                names.iter().position(|n| *n == s)
            })?;
            let step = ProofStep {
                file: "probe".into(),
                position: 0,
                goal: terms[0].clone(),
                premises: terms[1..].to_vec(),
                gold: derivation_sequence(&grammar, &tree)?,
            };
            Ok(Probe {
                state,
                terms,
                step: Some((TacticModel { encoder, decoder }, step, grammar)),
                premise: None,
            })
        }
    }
}

/// Gradient report at the probe point drawn from `seed`.
pub fn probe_point(config: &ProbeConfig, seed: u64) -> Result<GradReport> {
    let vocab = probe_vocab();
    let probe = build(config, seed)?;
    let (checked, fixed) = split_params(config, &probe.state);
    let assemble = |p: &ParamStore| {
        let mut params = p.clone();
        params.extend(fixed.clone());
        ModelState {
            params,
            buffers: probe.state.buffers.clone(),
        }
    };
    let mode = config.mode;
    grad_report(&checked, DEFAULT_PROBE, |tape: &mut Tape, p: &ParamStore| {
        let state = assemble(p);
        if let Some(model) = &probe.premise {
            let candidates: Vec<&TermAst> = probe.terms[1..].iter().collect();
            let scores = model.scores(tape, &state, &vocab, &probe.terms[0], &candidates, mode)?;
            info_nce_from_scores(tape, scores, candidates.len() - 1)
        } else {
            let (model, step, grammar) = probe.step.as_ref().expect("tactic probe");
            Ok(model.teacher_forced_loss(tape, &state, grammar, &vocab, step, mode)?.loss)
        }
    })
}

/// Largest analytic gradient magnitude of the parameters held fixed at the
/// probe point (zero when none are).
pub fn fixed_param_gradient(config: &ProbeConfig, seed: u64) -> Result<f64> {
    let vocab = probe_vocab();
    let probe = build(config, seed)?;
    let (_, fixed) = split_params(config, &probe.state);
    let mut tape = Tape::new();
    let loss = if let Some(model) = &probe.premise {
        let candidates: Vec<&TermAst> = probe.terms[1..].iter().collect();
        let scores = model.scores(&mut tape, &probe.state, &vocab, &probe.terms[0], &candidates, config.mode)?;
        info_nce_from_scores(&mut tape, scores, candidates.len() - 1)?
    } else {
        let (model, step, grammar) = probe.step.as_ref().expect("tactic probe");
        model.teacher_forced_loss(&mut tape, &probe.state, grammar, &vocab, step, config.mode)?.loss
    };
    let grads = tape.param_grads(loss, &probe.state.params)?;
    Ok(fixed
        .names()
        .flat_map(|n| grads.get(n).map(|t| t.data().to_vec()).unwrap_or_default())
        .fold(0.0, |m: f64, g| m.max(g.abs())))
}

/// Result of scanning seeds for a probe point whose entries are all resolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub seed: u64,
    pub report: GradReport,
    /// Seeds skipped because the point was near a kink or some entry was
    /// below the resolution floor.
    pub skipped: usize,
}

/// Scans `first_seed..first_seed + max_tries` and returns the first probe
/// point with no unresolved entries.
pub fn first_resolved(config: &ProbeConfig, first_seed: u64, max_tries: usize) -> Result<Option<ProbeOutcome>> {
    for k in 0..max_tries {
        let seed = first_seed + k as u64;
        let report = probe_point(config, seed)?;
        if report.is_resolved() {
            return Ok(Some(ProbeOutcome {
                seed,
                report,
                skipped: k,
            }));
        }
    }
    Ok(None)
}

/// The checks run by the gradient-fidelity acceptance criterion.
pub fn standard_probes() -> Vec<ProbeConfig> {
    let mut out = vec![];
    for objective in [Objective::Premise, Objective::Tactic] {
        for (encoder, mode) in [
            (EncoderKind::Gin, Mode::Eval),
            (EncoderKind::Gin, Mode::Train),
            (EncoderKind::TreeLstm, Mode::Train),
        ] {
            out.push(ProbeConfig::tiny(objective, encoder, mode));
        }
    }
    out
}
