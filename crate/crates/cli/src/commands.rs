//! Subcommand implementations. Each writes its files and a short summary to
//! `out`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use prooflens_core::ast::{vocab_from_corpus, NodeVocab};
use prooflens_core::contrastive::{eval_premise, pretrain, PremiseModel, PretrainConfig};
use prooflens_core::datagen::{build_premise_dataset, gen_synthetic_corpus, records_to_steps, split_files, CorpusConfig};
use prooflens_core::decoder::{eval_tactic, finetune, FinetuneConfig, TacticModel};
use prooflens_core::gradcheck::{first_resolved, standard_probes};

use crate::cli::{
    BuildDatasetArgs, Command, EvalPremiseArgs, EvalTacticArgs, FinetuneArgs, GenCorpusArgs, GradcheckArgs, PretrainArgs,
    ReportArgs, SplitArgs,
};
use crate::formats::{
    encode_eval, encode_metrics, encode_premises, encode_steps, load_checkpoint, load_grammar, load_vocab, read_corpus,
    read_eval, read_premises, read_steps, save_checkpoint, save_vocab, sidecar, vocab_path, write_corpus, write_text,
    PREMISES_FILE, STEPS_FILE,
};
use crate::report::Table;
use crate::{CliError, Result};

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenCorpus(a) => gen_corpus(a, out),
        Command::BuildDataset(a) => build_dataset(a, out),
        Command::Split(a) => split(a, out),
        Command::Pretrain(a) => pretrain_cmd(a, out),
        Command::Finetune(a) => finetune_cmd(a, out),
        Command::EvalPremise(a) => eval_premise_cmd(a, out),
        Command::EvalTactic(a) => eval_tactic_cmd(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(text).and_then(|_| out.write_all(b"\n")).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// A dataset path: the file itself, or `name` inside a directory.
fn dataset_file(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

fn gen_corpus(a: &GenCorpusArgs, out: &mut dyn Write) -> Result<()> {
    let grammar = load_grammar(a.grammar.as_deref())?;
    let config = CorpusConfig {
        num_files: a.files,
        statements_per_file: a.statements,
        motif_depth: a.motif_depth,
        num_labels: a.labels,
        max_depth: a.max_depth,
        seed: a.seed.seed,
    };
    let records = gen_synthetic_corpus(&config, &grammar)?;
    write_corpus(&a.out, &records, &grammar)?;
    say(out, format_args!("wrote {} statements in {} files to {}", records.len(), a.files, a.out.display()))
}

fn build_dataset(a: &BuildDatasetArgs, out: &mut dyn Write) -> Result<()> {
    let grammar = load_grammar(a.grammar.as_deref())?;
    let records = read_corpus(&a.input, &grammar)?;
    let ds = build_premise_dataset(&records)?;
    let steps = records_to_steps(&records, &grammar)?;
    write_text(&a.out.join(PREMISES_FILE), &encode_premises(&ds.instances))?;
    write_text(&a.out.join(STEPS_FILE), &encode_steps(&steps, &grammar)?)?;
    let s = ds.stats;
    say(
        out,
        format_args!(
            "records {} instances {} skipped_no_premise {} skipped_no_negatives {} mean_negatives {:.3} steps {}",
            s.records,
            s.instances,
            s.skipped_no_premise,
            s.skipped_no_negatives,
            s.mean_negatives,
            steps.len()
        ),
    )
}

fn partition_names(count: usize) -> Vec<String> {
    match count {
        2 => vec!["train".into(), "test".into()],
        3 => vec!["train".into(), "valid".into(), "test".into()],
        n => (0..n).map(|i| format!("part{i}")).collect(),
    }
}

fn split(a: &SplitArgs, out: &mut dyn Write) -> Result<()> {
    let grammar = load_grammar(a.grammar.as_deref())?;
    let premise_path = a.input.join(PREMISES_FILE);
    let steps_path = a.input.join(STEPS_FILE);
    let premises = if premise_path.exists() { Some(read_premises(&premise_path)?) } else { None };
    let steps = if steps_path.exists() { Some(read_steps(&steps_path, &grammar)?) } else { None };
    if premises.is_none() && steps.is_none() {
        return Err(CliError::FileMissing(premise_path));
    }
    let mut files: BTreeSet<String> = BTreeSet::new();
    for inst in premises.iter().flatten() {
        files.insert(inst.file.clone().unwrap_or_default());
    }
    for step in steps.iter().flatten() {
        files.insert(step.file.clone());
    }
    let parts = split_files(&files, &a.ratios, a.seed.seed)?;
    for (name, part) in partition_names(parts.len()).iter().zip(&parts) {
        let dir = a.out.join(name);
        let keep: BTreeSet<&str> = part.iter().map(String::as_str).collect();
        if let Some(p) = &premises {
            let chosen: Vec<_> = p.iter().filter(|i| keep.contains(i.file.as_deref().unwrap_or(""))).cloned().collect();
            write_text(&dir.join(PREMISES_FILE), &encode_premises(&chosen))?;
        }
        if let Some(s) = &steps {
            let chosen: Vec<_> = s.iter().filter(|st| keep.contains(st.file.as_str())).cloned().collect();
            write_text(&dir.join(STEPS_FILE), &encode_steps(&chosen, &grammar)?)?;
        }
        say(out, format_args!("{name}: {} files ({})", part.len(), part.join(" ")))?;
    }
    Ok(())
}

fn pretrain_cmd(a: &PretrainArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_premises(&dataset_file(&a.input, PREMISES_FILE))?;
    let vocab = vocab_from_corpus(data.iter().flat_map(|i| i.terms()));
    let config = PretrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed.seed,
        encoder: a.encoder.encoder.into(),
        layers: a.encoder.layers,
        hidden: a.encoder.hidden,
        proj_dim: a.proj_dim,
    };
    let trained = pretrain(&data, &vocab, &config)?;
    save_checkpoint(&a.out, &trained.state)?;
    save_vocab(&vocab_path(&a.out), &vocab)?;
    let metrics = a.metrics.clone().unwrap_or_else(|| sidecar(&a.out, ".metrics.csv"));
    write_text(&metrics, &encode_metrics(&trained.metrics))?;
    for m in &trained.metrics {
        say(out, format_args!("{}", m.csv_line()))?;
    }
    Ok(())
}

fn finetune_cmd(a: &FinetuneArgs, out: &mut dyn Write) -> Result<()> {
    let grammar = load_grammar(a.grammar.as_deref())?;
    let data = read_steps(&dataset_file(&a.input, STEPS_FILE), &grammar)?;
    let (checkpoint, vocab) = match &a.init_checkpoint {
        Some(path) => (Some(load_checkpoint(path)?), load_vocab(&vocab_path(path))?),
        None => (None, vocab_from_corpus(data.iter().flat_map(|s| std::iter::once(&s.goal).chain(&s.premises)))),
    };
    let config = FinetuneConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed.seed,
        encoder: a.encoder.encoder.into(),
        layers: a.encoder.layers,
        hidden: a.encoder.hidden,
        embed: a.embed_dim,
        state_dim: a.state_dim,
    };
    let trained = finetune(&data, &grammar, &vocab, &config, checkpoint.as_ref())?;
    save_checkpoint(&a.out, &trained.state)?;
    save_vocab(&vocab_path(&a.out), &vocab)?;
    let metrics = a.metrics.clone().unwrap_or_else(|| sidecar(&a.out, ".metrics.csv"));
    write_text(&metrics, &encode_metrics(&trained.metrics))?;
    for m in &trained.metrics {
        say(out, format_args!("{}", m.csv_line()))?;
    }
    Ok(())
}

fn load_model_files(checkpoint: &Path) -> Result<(prooflens_core::tensor::ModelState, NodeVocab)> {
    Ok((load_checkpoint(checkpoint)?, load_vocab(&vocab_path(checkpoint))?))
}

fn eval_premise_cmd(a: &EvalPremiseArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_premises(&dataset_file(&a.input, PREMISES_FILE))?;
    let (state, vocab) = load_model_files(&a.checkpoint)?;
    let model = PremiseModel::from_state(&state)?;
    let accuracy = eval_premise(&data, &model, &state, &vocab)?;
    if let Some(path) = &a.out {
        write_text(path, &format!("accuracy,instances\n{accuracy},{}\n", data.len()))?;
    }
    say(out, format_args!("accuracy {accuracy} over {} instances", data.len()))
}

fn eval_tactic_cmd(a: &EvalTacticArgs, out: &mut dyn Write) -> Result<()> {
    let grammar = load_grammar(a.grammar.as_deref())?;
    let data = read_steps(&dataset_file(&a.input, STEPS_FILE), &grammar)?;
    let (state, vocab) = load_model_files(&a.checkpoint)?;
    let model = TacticModel::from_state(&state)?;
    let eval = eval_tactic(&data, &model, &state, &grammar, &vocab)?;
    if let Some(path) = &a.out {
        write_text(path, &encode_eval(&eval))?;
    }
    let table = Table::from_evals(&[("correct".into(), eval)])?;
    say(out, format_args!("{}", table.to_text().trim_end()))
}

fn gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let mut failed = Vec::new();
    for config in standard_probes() {
        match first_resolved(&config, a.seed, a.tries)? {
            Some(o) => {
                let ok = o.report.max_error <= a.tolerance;
                say(
                    out,
                    format_args!(
                        "{} {}: max relative error {:.3e} over {} entries (seed {}, {} skipped)",
                        if ok { "ok  " } else { "FAIL" },
                        config.describe(),
                        o.report.max_error,
                        o.report.entries,
                        o.seed,
                        o.skipped
                    ),
                )?;
                if !ok {
                    failed.push(config.describe());
                }
            }
            None => {
                say(out, format_args!("FAIL {}: no resolvable probe point in {} seeds", config.describe(), a.tries))?;
                failed.push(config.describe());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(prooflens_core::Error::InvalidConfig(format!("gradient check failed for {}", failed.join(", "))).into())
    }
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    if !a.label.is_empty() && a.label.len() != a.inputs.len() {
        return Err(CliError::Usage(format!("{} labels for {} inputs", a.label.len(), a.inputs.len())));
    }
    let runs = a
        .inputs
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let label = a.label.get(i).cloned().unwrap_or_else(|| {
                path.file_stem().map_or_else(|| format!("run{i}"), |s| s.to_string_lossy().into_owned())
            });
            Ok((label, read_eval(path)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = Table::from_evals(&runs)?;
    if let Some(prefix) = &a.out {
        write_text(&sidecar(prefix, ".txt"), &table.to_text())?;
        write_text(&sidecar(prefix, ".csv"), &table.to_csv())?;
    }
    say(out, format_args!("{}", table.to_text().trim_end()))
}
