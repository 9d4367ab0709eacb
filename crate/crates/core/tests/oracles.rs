mod support;

use prooflens_core::ast::TermAst;
use prooflens_core::contrastive::{info_nce, PremiseModel};
use prooflens_core::decoder::{DecodeContext, ProofStep, TacticDecoder, TacticModel};
use prooflens_core::encoder::{Encoder, EncoderKind};
use prooflens_core::grammar::{derivation_sequence, parse_tactic, Action, Derivation, Frontier, Grammar};
use prooflens_core::rng::SplitMix64;
use prooflens_core::tape::{Mode, Tape};
use prooflens_core::tensor::{ModelState, Tensor};

use support::oracle;
use support::{max_abs_diff, random_tree, scramble, vocab};

const TOL: f64 = 1e-12;

fn terms() -> Vec<TermAst> {
    [
        "(Prod (Var n) (App (Const S) (Rel)))",
        "(Lambda (Prod (Rel) (Rel)) (App (Var f) (Var x)))",
        "(App (Const plus) (Var a) (Var b))",
        "(Rel)",
    ]
    .iter()
    .map(|t| TermAst::parse(t).unwrap())
    .collect()
}

fn gin_state(hidden: usize, layers: usize, seed: u64) -> (Encoder, ModelState) {
    let enc = Encoder::new(EncoderKind::Gin, vocab().dim(), hidden, layers).unwrap();
    let mut state = ModelState::new();
    enc.init(&mut state, &mut SplitMix64::new(seed));
    scramble(&mut state, seed + 100);
    (enc, state)
}

#[test]
fn gin_single_graph_matches_oracle() {
    let (enc, state) = gin_state(5, 3, 1);
    let v = vocab();
    for t in terms() {
        for (mode, train) in [(Mode::Train, true), (Mode::Eval, false)] {
            let mut tape = Tape::new();
            let got = enc.encode(&mut tape, &state, &t, &v, mode).unwrap();
            let want = oracle::gin_embed(&state, &[&t], &v, 3, train);
            assert!(max_abs_diff(tape.value(got).data(), &want[0]) <= TOL, "{mode:?}");
        }
    }
}

#[test]
fn gin_batch_matches_oracle() {
    let (enc, state) = gin_state(6, 2, 2);
    let v = vocab();
    let ts = terms();
    let refs: Vec<&TermAst> = ts.iter().collect();
    for (mode, train) in [(Mode::Train, true), (Mode::Eval, false)] {
        let mut tape = Tape::new();
        let got = enc.encode_many(&mut tape, &state, &refs, &v, mode).unwrap();
        let want = oracle::gin_embed(&state, &refs, &v, 2, train);
        for (g, w) in want.iter().enumerate() {
            assert!(max_abs_diff(tape.value(got).row(g), w) <= TOL, "{mode:?} graph {g}");
        }
    }
}

#[test]
fn treelstm_matches_oracle() {
    let v = vocab();
    let enc = Encoder::new(EncoderKind::TreeLstm, v.dim(), 4, 0).unwrap();
    let mut state = ModelState::new();
    enc.init(&mut state, &mut SplitMix64::new(3));
    scramble(&mut state, 33);
    let mut rng = SplitMix64::new(4);
    let mut trees = terms();
    trees.extend((0..10).map(|_| random_tree(&mut rng, 20)));
    for t in &trees {
        let mut tape = Tape::new();
        let got = enc.encode(&mut tape, &state, t, &v, Mode::Train).unwrap();
        let want = oracle::treelstm_embed(&state, t, &v);
        assert!(max_abs_diff(tape.value(got).data(), &want) <= TOL);
    }
}

#[test]
fn info_nce_matches_oracle() {
    let mut rng = SplitMix64::new(5);
    for n in 1..=10 {
        let z = |rng: &mut SplitMix64| (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<f64>>();
        let z_t = z(&mut rng);
        let z_pos = z(&mut rng);
        let z_negs: Vec<Vec<f64>> = (0..n).map(|_| z(&mut rng)).collect();
        let mut tape = Tape::new();
        let t = tape.constant(Tensor::row_vector(&z_t)).unwrap();
        let p = tape.constant(Tensor::row_vector(&z_pos)).unwrap();
        let ns: Vec<_> = z_negs.iter().map(|z| tape.constant(Tensor::row_vector(z)).unwrap()).collect();
        let loss = info_nce(&mut tape, t, p, &ns).unwrap();
        let want = oracle::info_nce(&z_t, &z_pos, &z_negs);
        assert!((tape.scalar(loss) - want).abs() <= TOL);
    }
}

#[test]
fn info_nce_reference_values() {
    // Unit vectors with equal dot products against the theorem.
    let mut tape = Tape::new();
    let t = tape.constant(Tensor::row_vector(&[1.0, 0.0])).unwrap();
    let p = tape.constant(Tensor::row_vector(&[0.5, 3.0])).unwrap();
    let ns: Vec<_> = (0..4).map(|k| tape.constant(Tensor::row_vector(&[0.5, -(k as f64)])).unwrap()).collect();
    let loss = info_nce(&mut tape, t, p, &ns).unwrap();
    assert!((tape.scalar(loss) - 5f64.ln()).abs() <= TOL);

    let mut tape = Tape::new();
    let t = tape.constant(Tensor::row_vector(&[1.0, 1.0])).unwrap();
    let p = tape.constant(Tensor::row_vector(&[1.0, 1.0])).unwrap();
    let ns: Vec<_> = (0..2).map(|_| tape.constant(Tensor::row_vector(&[1.0, -1.0])).unwrap()).collect();
    let loss = info_nce(&mut tape, t, p, &ns).unwrap();
    assert!((tape.scalar(loss) - 0.2395447).abs() <= 1e-7);
}

#[test]
fn premise_scores_match_oracle() {
    let v = vocab();
    let enc = Encoder::new(EncoderKind::Gin, v.dim(), 5, 2).unwrap();
    let model = PremiseModel::new(enc, 3);
    let mut state = ModelState::new();
    model.init(&mut state, &mut SplitMix64::new(6));
    scramble(&mut state, 66);
    let ts = terms();
    let candidates: Vec<&TermAst> = ts[1..].iter().collect();
    let mut tape = Tape::new();
    let scores = model.scores(&mut tape, &state, &v, &ts[0], &candidates, Mode::Train).unwrap();
    let refs: Vec<&TermAst> = ts.iter().collect();
    let z: Vec<Vec<f64>> = oracle::gin_embed(&state, &refs, &v, 2, true)
        .iter()
        .map(|h| oracle::project(&state, h))
        .collect();
    let want: Vec<f64> = z[1..].iter().map(|zp| oracle::dot(&z[0], zp)).collect();
    assert!(max_abs_diff(tape.value(scores).data(), &want) <= TOL);
}

struct DecoderFixture {
    grammar: Grammar,
    decoder: TacticDecoder,
    state: ModelState,
    goal: Vec<f64>,
    premises: Vec<Vec<f64>>,
}

fn decoder_fixture(seed: u64) -> DecoderFixture {
    let grammar = Grammar::default_tactics();
    let decoder = TacticDecoder::new(grammar.num_productions(), 3, 4, 5).unwrap();
    let mut state = ModelState::new();
    decoder.init(&mut state, &mut SplitMix64::new(seed));
    scramble(&mut state, seed + 1);
    let mut rng = SplitMix64::new(seed + 2);
    let mut vecs = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect() };
    let goal = vecs(1).remove(0);
    let premises = vecs(3);
    DecoderFixture {
        grammar,
        decoder,
        state,
        goal,
        premises,
    }
}

fn gold(grammar: &Grammar) -> Vec<Action> {
    let names = ["H0", "H1", "H2"];
    let tree = parse_tactic(grammar, "seq (apply H2) (seq intro (rewrite H0))", &|s: &str| {
        names.iter().position(|n| *n == s)
    })
    .unwrap();
    derivation_sequence(grammar, &tree).unwrap()
}

#[test]
fn decode_step_matches_oracle() {
    let f = decoder_fixture(7);
    let actions = gold(&f.grammar);
    let mut tape = Tape::new();
    let goal = tape.constant(Tensor::row_vector(&f.goal)).unwrap();
    let rows: Vec<_> = f.premises.iter().map(|p| tape.constant(Tensor::row_vector(p)).unwrap()).collect();
    let ctx = DecodeContext::from_embeddings(&mut tape, goal, &rows).unwrap();
    let mut s = f.decoder.initial_state(&mut tape, &f.state, &ctx).unwrap();
    let mut s_ref = oracle::initial_state(&f.state, &f.goal);
    assert!(max_abs_diff(tape.value(s).data(), &s_ref) <= TOL);
    let mut derivation = Derivation::new(&f.grammar);
    for &action in &actions {
        let frontier = derivation.frontier().unwrap();
        let slot = match frontier {
            Frontier::Nonterminal(nt) => oracle::Slot::Nonterminal(nt),
            Frontier::Premise => oracle::Slot::Premise,
        };
        let (probs, next) = f.decoder.decode_step(&mut tape, &f.state, &f.grammar, s, frontier, &ctx, action).unwrap();
        let want = oracle::softmax(&oracle::logits(&f.state, &f.grammar, &s_ref, slot, &f.premises));
        assert!(max_abs_diff(&probs, &want) <= TOL);
        s_ref = oracle::next_state(&f.state, &s_ref, action, &f.premises);
        assert!(max_abs_diff(tape.value(next).data(), &s_ref) <= TOL);
        s = next;
        derivation.apply(action).unwrap();
    }
    assert!(derivation.is_complete());
}

#[test]
fn teacher_forced_loss_matches_oracle() {
    let v = vocab();
    let f = decoder_fixture(8);
    let enc = Encoder::new(EncoderKind::Gin, v.dim(), 5, 2).unwrap();
    let mut state = f.state.clone();
    enc.init(&mut state, &mut SplitMix64::new(9));
    scramble(&mut state, 99);
    let model = TacticModel {
        encoder: enc,
        decoder: f.decoder,
    };
    let ts = terms();
    let step = ProofStep {
        file: "f".into(),
        position: 0,
        goal: ts[0].clone(),
        premises: ts[1..].to_vec(),
        gold: gold(&f.grammar),
    };
    for (mode, train) in [(Mode::Train, true), (Mode::Eval, false)] {
        let mut tape = Tape::new();
        let pass = model.teacher_forced_loss(&mut tape, &state, &f.grammar, &v, &step, mode).unwrap();
        let refs: Vec<&TermAst> = ts.iter().collect();
        let h = oracle::gin_embed(&state, &refs, &v, 2, train);
        let want = oracle::teacher_forced_loss(&state, &f.grammar, &h[0], &h[1..].to_vec(), &step.gold);
        assert!((tape.scalar(pass.loss) - want).abs() <= TOL, "{mode:?}");
    }
}

#[test]
fn single_choice_grammar_has_zero_loss() {
    let grammar = Grammar::parse("T -> seq A B\nA -> intro\nB -> apply PREMISE_ARG\n").unwrap();
    let decoder = TacticDecoder::new(grammar.num_productions(), 3, 4, 5).unwrap();
    let mut state = ModelState::new();
    decoder.init(&mut state, &mut SplitMix64::new(10));
    scramble(&mut state, 11);
    let mut tape = Tape::new();
    let goal = tape.constant(Tensor::row_vector(&[0.3, -0.2, 0.9, 0.1, -0.5])).unwrap();
    let premise = tape.constant(Tensor::row_vector(&[1.0, 2.0, -1.0, 0.0, 0.5])).unwrap();
    let ctx = DecodeContext::from_embeddings(&mut tape, goal, &[premise]).unwrap();
    let gold = [Action::Production(0), Action::Production(1), Action::Production(2), Action::Premise(0)];
    let pass = prooflens_core::decoder::forced_pass(&decoder, &mut tape, &state, &grammar, &ctx, &gold).unwrap();
    assert_eq!(tape.scalar(pass.loss), 0.0);
}

#[test]
fn uniform_single_step_loss_is_log_m() {
    let grammar = Grammar::default_tactics();
    let f = decoder_fixture(12);
    let mut state = f.state.clone();
    state.params.insert("decoder.u", Tensor::zeros(&[4, grammar.num_productions()]));
    let mut tape = Tape::new();
    let goal = tape.constant(Tensor::row_vector(&f.goal)).unwrap();
    let ctx = DecodeContext::from_embeddings(&mut tape, goal, &[]).unwrap();
    let intro = parse_tactic(&grammar, "intro", &|_: &str| None).unwrap();
    let gold = derivation_sequence(&grammar, &intro).unwrap();
    assert_eq!(gold.len(), 1);
    let pass = prooflens_core::decoder::forced_pass(&f.decoder, &mut tape, &state, &grammar, &ctx, &gold).unwrap();
    let m = grammar.num_productions() as f64;
    assert!((tape.scalar(pass.loss) - m.ln()).abs() <= TOL);
}

#[test]
fn random_trees_match_gin_oracle() {
    let (enc, state) = gin_state(4, 2, 13);
    let v = vocab();
    let mut rng = SplitMix64::new(14);
    for _ in 0..20 {
        let t = random_tree(&mut rng, 30);
        let mut tape = Tape::new();
        let got = enc.encode(&mut tape, &state, &t, &v, Mode::Train).unwrap();
        let want = oracle::gin_embed(&state, &[&t], &v, 2, true);
        assert!(max_abs_diff(tape.value(got).data(), &want[0]) <= TOL);
    }
}
