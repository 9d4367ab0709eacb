//! On-disk formats.
//!
//! * checkpoints: the `PLCKPT 1` text format, plus a `.vocab` sidecar with one
//!   node label per line;
//! * datasets: JSON lines, one premise instance or proof step per line;
//! * corpora: a directory with `manifest.tsv` (file name and statement
//!   count), and per file `<file>.sexps` (one theorem per line) and
//!   `<file>.tactics` (statement name, a tab, the tactic);
//! * metrics: one `epoch,mean_loss,accuracy` line per epoch;
//! * tactic evaluations: `group,correct,total` CSV with a header.

use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use prooflens_core::ast::{NodeVocab, TermAst};
use prooflens_core::checkpoint::{decode_checkpoint, encode_checkpoint};
use prooflens_core::contrastive::{EpochMetrics, PremiseInstance};
use prooflens_core::datagen::{NamedPremise, ProofRecord};
use prooflens_core::decoder::{GroupResult, ProofStep, TacticEval};
use prooflens_core::grammar::{derivation_sequence, parse_tactic, render_tactic, Grammar};
use prooflens_core::tensor::ModelState;

use crate::{CliError, Result};

pub const PREMISES_FILE: &str = "premises.jsonl";
pub const STEPS_FILE: &str = "steps.jsonl";
pub const MANIFEST_FILE: &str = "manifest.tsv";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::FileMissing(path.to_path_buf()),
        _ => CliError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

/// Writes `text`, creating missing parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

/// `path` with `suffix` appended to its file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn save_checkpoint(path: &Path, state: &ModelState) -> Result<()> {
    write_text(path, &encode_checkpoint(state))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    Ok(decode_checkpoint(&read_text(path)?)?)
}

pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    sidecar(checkpoint, ".vocab")
}

pub fn encode_vocab(vocab: &NodeVocab) -> String {
    let known = &vocab.labels()[..vocab.dim() - 1];
    known.iter().map(|l| format!("{l}\n")).collect()
}

pub fn save_vocab(path: &Path, vocab: &NodeVocab) -> Result<()> {
    write_text(path, &encode_vocab(vocab))
}

pub fn load_vocab(path: &Path) -> Result<NodeVocab> {
    Ok(NodeVocab::from_labels(read_text(path)?.lines().filter(|l| !l.is_empty())))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PremiseLine {
    theorem: String,
    positive: String,
    negatives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    file: String,
    position: usize,
    goal: String,
    premises: Vec<String>,
    gold: String,
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut line = serde_json::to_string(value).expect("plain structs serialize");
    line.push('\n');
    line
}

/// Non-blank lines with 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

fn malformed(path: &Path, line: usize, reason: impl ToString) -> CliError {
    CliError::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    }
}

pub fn encode_premises(instances: &[PremiseInstance]) -> String {
    instances
        .iter()
        .map(|inst| {
            to_json_line(&PremiseLine {
                theorem: inst.theorem.to_string(),
                positive: inst.positive.to_string(),
                negatives: inst.negatives.iter().map(ToString::to_string).collect(),
                file: inst.file.clone(),
            })
        })
        .collect()
}

/// Parses premise instances; `path` only labels errors.
pub fn decode_premises(text: &str, path: &Path) -> Result<Vec<PremiseInstance>> {
    numbered_lines(text)
        .map(|(n, line)| {
            let raw: PremiseLine = serde_json::from_str(line).map_err(|e| malformed(path, n, e))?;
            let term = |s: &str| TermAst::parse(s).map_err(|e| malformed(path, n, e));
            let inst = PremiseInstance {
                theorem: term(&raw.theorem)?,
                positive: term(&raw.positive)?,
                negatives: raw.negatives.iter().map(|s| term(s)).collect::<Result<_>>()?,
                file: raw.file,
            };
            inst.validate().map_err(|e| malformed(path, n, e))?;
            Ok(inst)
        })
        .collect()
}

pub fn read_premises(path: &Path) -> Result<Vec<PremiseInstance>> {
    decode_premises(&read_text(path)?, path)
}

fn premise_ref(i: usize) -> String {
    format!("#{i}")
}

pub fn encode_steps(steps: &[ProofStep], grammar: &Grammar) -> Result<String> {
    steps
        .iter()
        .map(|step| {
            let tree = step.gold_tree(grammar)?;
            Ok(to_json_line(&StepLine {
                file: step.file.clone(),
                position: step.position,
                goal: step.goal.to_string(),
                premises: step.premises.iter().map(ToString::to_string).collect(),
                gold: render_tactic(grammar, &tree, &premise_ref),
            }))
        })
        .collect()
}

pub fn decode_steps(text: &str, path: &Path, grammar: &Grammar) -> Result<Vec<ProofStep>> {
    numbered_lines(text)
        .map(|(n, line)| {
            let raw: StepLine = serde_json::from_str(line).map_err(|e| malformed(path, n, e))?;
            let term = |s: &str| TermAst::parse(s).map_err(|e| malformed(path, n, e));
            let premises: Vec<TermAst> = raw.premises.iter().map(|s| term(s)).collect::<Result<_>>()?;
            let count = premises.len();
            let resolve = |s: &str| s.strip_prefix('#')?.parse::<usize>().ok().filter(|&i| i < count);
            let tree = parse_tactic(grammar, &raw.gold, &resolve).map_err(|e| malformed(path, n, e))?;
            Ok(ProofStep {
                file: raw.file,
                position: raw.position,
                goal: term(&raw.goal)?,
                premises,
                gold: derivation_sequence(grammar, &tree).map_err(|e| malformed(path, n, e))?,
            })
        })
        .collect()
}

pub fn read_steps(path: &Path, grammar: &Grammar) -> Result<Vec<ProofStep>> {
    decode_steps(&read_text(path)?, path, grammar)
}

/// Writes a corpus directory. Statement contexts are implied by position:
/// every earlier statement of the same file.
pub fn write_corpus(dir: &Path, records: &[ProofRecord], grammar: &Grammar) -> Result<()> {
    let mut files: Vec<&str> = Vec::new();
    for r in records {
        if files.last() != Some(&r.file.as_str()) {
            files.push(&r.file);
        }
    }
    let mut manifest = String::new();
    for file in files {
        let recs: Vec<&ProofRecord> = records.iter().filter(|r| r.file == file).collect();
        let (mut sexps, mut tactics) = (String::new(), String::new());
        for (pos, r) in recs.iter().enumerate() {
            if r.position != pos || r.context.len() != pos {
                return Err(CliError::Usage(format!(
                    "{}: corpus files need consecutive positions with every earlier statement in context",
                    r.name
                )));
            }
            let _ = writeln!(sexps, "{}", r.theorem);
            let tactic = render_tactic(grammar, &r.tactic, &|i: usize| r.context[i].name.clone());
            let _ = writeln!(tactics, "{}\t{tactic}", r.name);
        }
        let _ = writeln!(manifest, "{file}\t{}", recs.len());
        write_text(&dir.join(format!("{file}.sexps")), &sexps)?;
        write_text(&dir.join(format!("{file}.tactics")), &tactics)?;
    }
    write_text(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn read_corpus(dir: &Path, grammar: &Grammar) -> Result<Vec<ProofRecord>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = read_text(&manifest_path)?;
    let mut records = Vec::new();
    for (n, line) in numbered_lines(&manifest) {
        let (file, count) = line
            .split_once('\t')
            .and_then(|(f, c)| Some((f, c.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| malformed(&manifest_path, n, "expected `file<TAB>statements`"))?;
        let sexp_path = dir.join(format!("{file}.sexps"));
        let tactic_path = dir.join(format!("{file}.tactics"));
        let sexps = read_text(&sexp_path)?;
        let tactics = read_text(&tactic_path)?;
        let theorems: Vec<(usize, &str)> = numbered_lines(&sexps).collect();
        let proofs: Vec<(usize, &str)> = numbered_lines(&tactics).collect();
        if theorems.len() != count || proofs.len() != count {
            return Err(malformed(
                &manifest_path,
                n,
                format!("{file} lists {count} statements, found {} terms and {} tactics", theorems.len(), proofs.len()),
            ));
        }
        let mut context: Vec<NamedPremise> = Vec::with_capacity(count);
        for (pos, ((tn, term), (pn, proof))) in theorems.into_iter().zip(proofs).enumerate() {
            let theorem = TermAst::parse(term).map_err(|e| malformed(&sexp_path, tn, e))?;
            let (name, text) = proof.split_once('\t').ok_or_else(|| malformed(&tactic_path, pn, "expected `name<TAB>tactic`"))?;
            let resolve = |s: &str| context.iter().position(|p| p.name == s);
            let tactic = parse_tactic(grammar, text, &resolve).map_err(|e| malformed(&tactic_path, pn, e))?;
            records.push(ProofRecord {
                file: file.to_string(),
                position: pos,
                name: name.to_string(),
                theorem: theorem.clone(),
                tactic,
                context: context.clone(),
            });
            context.push(NamedPremise {
                name: name.to_string(),
                position: pos,
                term: theorem,
            });
        }
    }
    Ok(records)
}

pub fn encode_metrics(metrics: &[EpochMetrics]) -> String {
    metrics.iter().map(|m| m.csv_line() + "\n").collect()
}

pub const EVAL_HEADER: &str = "group,correct,total";

pub fn encode_eval(eval: &TacticEval) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for g in &eval.groups {
        let _ = writeln!(out, "{},{},{}", g.group, g.correct, g.total);
    }
    out
}

pub fn decode_eval(text: &str, path: &Path) -> Result<TacticEval> {
    let mut lines = numbered_lines(text);
    match lines.next() {
        Some((_, EVAL_HEADER)) => {}
        Some((n, _)) => return Err(malformed(path, n, format!("expected header `{EVAL_HEADER}`"))),
        None => return Err(malformed(path, 1, "empty evaluation file")),
    }
    let groups = lines
        .map(|(n, line)| {
            let fields: Vec<&str> = line.rsplitn(3, ',').collect();
            match fields.as_slice() {
                [total, correct, group] => {
                    let parse = |s: &str| s.parse::<usize>().map_err(|e| malformed(path, n, e));
                    let (correct, total) = (parse(correct)?, parse(total)?);
                    if correct > total {
                        return Err(malformed(path, n, "more correct than total"));
                    }
                    Ok(GroupResult {
                        group: group.to_string(),
                        correct,
                        total,
                    })
                }
                _ => Err(malformed(path, n, "expected `group,correct,total`")),
            }
        })
        .collect::<Result<_>>()?;
    Ok(TacticEval { groups })
}

pub fn read_eval(path: &Path) -> Result<TacticEval> {
    decode_eval(&read_text(path)?, path)
}

/// Loads a grammar file, or the built-in grammar when `path` is `None`.
pub fn load_grammar(path: Option<&Path>) -> Result<Grammar> {
    match path {
        Some(p) => Ok(Grammar::parse(&read_text(p)?)?),
        None => Ok(Grammar::default_tactics()),
    }
}
