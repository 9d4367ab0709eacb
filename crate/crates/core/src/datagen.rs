//! Proof records, premise-selection dataset construction, synthetic corpora
//! and file-level splits.
//!
//! Each synthetic statement is a fresh random tree joined under a root with a
//! *motif*: a copy of a subtree taken from the fresh part of the earlier
//! statement its proof cites. The motif is chosen so that no other earlier
//! statement of the file contains it. Every statement is drawn from the same
//! label distribution and height, so only the shared substructure separates
//! the positive from the negatives.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::TermAst;
use crate::contrastive::{PremiseInstance, MAX_NEGATIVES};
use crate::decoder::ProofStep;
use crate::grammar::{derivation_sequence, Grammar, Symbol, TacticAst};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Kernel-level constructor labels used by the synthetic generator.
pub const KERNEL_LABELS: [&str; 16] = [
    "App", "Lambda", "Prod", "LetIn", "Case", "Fix", "Cast", "Proj", "Const", "Ind", "Construct", "Var", "Rel", "Sort",
    "Evar", "CoFix",
];

const NAMES: [&str; 8] = ["x", "y", "z", "f", "g", "n", "m", "p"];

/// A statement visible as a premise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedPremise {
    pub name: String,
    pub position: usize,
    pub term: TermAst,
}

/// One proof statement: a theorem, its gold tactic, and the premises in
/// scope. Premise arguments of `tactic` index into `context`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofRecord {
    pub file: String,
    pub position: usize,
    pub name: String,
    pub theorem: TermAst,
    pub tactic: TacticAst,
    pub context: Vec<NamedPremise>,
}

impl ProofRecord {
    pub fn validate(&self) -> Result<()> {
        for i in self.tactic.premises() {
            if i >= self.context.len() {
                return Err(Error::InvalidTree(format!(
                    "{}: premise argument {i} outside a context of {}",
                    self.name,
                    self.context.len()
                )));
            }
        }
        Ok(())
    }
}

/// Where an emitted instance came from, by file position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceTrace {
    pub record: usize,
    pub theorem_position: usize,
    pub positive_position: usize,
    pub negative_positions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DatasetStats {
    pub records: usize,
    pub instances: usize,
    /// Records whose tactic uses no premise.
    pub skipped_no_premise: usize,
    /// Used premises for which no negative was available.
    pub skipped_no_negatives: usize,
    pub mean_negatives: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiseDataset {
    pub instances: Vec<PremiseInstance>,
    pub traces: Vec<InstanceTrace>,
    pub stats: DatasetStats,
}

/// One instance per premise argument: the used premise is the positive and
/// the up to ten nearest preceding context premises of the same file are the
/// negatives, nearest first. Premises used by the tactic are never negatives.
pub fn build_premise_dataset(records: &[ProofRecord]) -> Result<PremiseDataset> {
    let mut out = PremiseDataset {
        instances: Vec::new(),
        traces: Vec::new(),
        stats: DatasetStats {
            records: records.len(),
            ..DatasetStats::default()
        },
    };
    let mut total_negatives = 0usize;
    for (r, rec) in records.iter().enumerate() {
        rec.validate()?;
        let used: BTreeSet<usize> = rec.tactic.premises().into_iter().collect();
        if used.is_empty() {
            out.stats.skipped_no_premise += 1;
            continue;
        }
        let mut preceding: Vec<usize> = (0..rec.context.len())
            .filter(|&i| rec.context[i].position < rec.position && !used.contains(&i))
            .collect();
        preceding.sort_by_key(|&i| core::cmp::Reverse(rec.context[i].position));
        preceding.truncate(MAX_NEGATIVES);
        for &p in &used {
            let positive = &rec.context[p];
            if positive.position >= rec.position || preceding.is_empty() {
                out.stats.skipped_no_negatives += 1;
                continue;
            }
            total_negatives += preceding.len();
            out.instances.push(PremiseInstance {
                theorem: rec.theorem.clone(),
                positive: positive.term.clone(),
                negatives: preceding.iter().map(|&i| rec.context[i].term.clone()).collect(),
                file: Some(rec.file.clone()),
            });
            out.traces.push(InstanceTrace {
                record: r,
                theorem_position: rec.position,
                positive_position: positive.position,
                negative_positions: preceding.iter().map(|&i| rec.context[i].position).collect(),
            });
        }
    }
    out.stats.instances = out.instances.len();
    if out.stats.instances > 0 {
        out.stats.mean_negatives = total_negatives as f64 / out.stats.instances as f64;
    }
    Ok(out)
}

/// Fine-tuning steps: the goal is the theorem, the candidate premises are
/// the record's context, and the gold is the tactic's leftmost derivation.
pub fn records_to_steps(records: &[ProofRecord], grammar: &Grammar) -> Result<Vec<ProofStep>> {
    records
        .iter()
        .map(|rec| {
            rec.validate()?;
            Ok(ProofStep {
                file: rec.file.clone(),
                position: rec.position,
                goal: rec.theorem.clone(),
                premises: rec.context.iter().map(|p| p.term.clone()).collect(),
                gold: derivation_sequence(grammar, &rec.tactic)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusConfig {
    pub num_files: usize,
    pub statements_per_file: usize,
    /// Height of the subtree a theorem shares with its positive premise.
    pub motif_depth: usize,
    /// Number of distinct constructor labels drawn from [`KERNEL_LABELS`].
    pub num_labels: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            num_files: 10,
            statements_per_file: 20,
            motif_depth: 3,
            num_labels: 10,
            max_depth: 5,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_files == 0 || self.statements_per_file == 0 {
            return bad("corpus needs at least one file and one statement per file");
        }
        if self.num_labels < 2 || self.num_labels > KERNEL_LABELS.len() {
            return bad("label vocabulary size must be between 2 and 16");
        }
        if self.motif_depth < 2 || self.motif_depth >= self.max_depth {
            return bad("motif depth must be at least 2 and below the maximum depth");
        }
        Ok(())
    }

    pub fn file_name(&self, index: usize) -> String {
        let width = format!("{}", self.num_files.saturating_sub(1)).len().max(2);
        format!("file{index:0width$}")
    }
}

/// Productions paired with their leading terminal.
struct TacticShapes {
    apply: (usize, usize),
    closers: Vec<(usize, usize)>,
}

/// `apply PREMISE_ARG` and the premise-free single-terminal productions of
/// the start symbol.
fn tactic_shapes(grammar: &Grammar) -> Result<TacticShapes> {
    let start = grammar.start();
    let mut apply = None;
    let mut closers = Vec::new();
    for &p in grammar.productions_for(start) {
        match grammar.production(p).rhs.as_slice() {
            [Symbol::Terminal(t), Symbol::Premise] if grammar.terminals()[*t] == "apply" => {
                apply = apply.or(Some((p, *t)))
            }
            [Symbol::Terminal(t)] => closers.push((p, *t)),
            _ => {}
        }
    }
    match apply {
        Some(apply) if !closers.is_empty() => Ok(TacticShapes { apply, closers }),
        _ => Err(Error::InvalidConfig(
            "the grammar's start symbol needs `apply PREMISE_ARG` and a premise-free single-terminal production".into(),
        )),
    }
}

struct TreeGen<'a> {
    rng: &'a mut SplitMix64,
    labels: &'a [&'static str],
}

impl TreeGen<'_> {
    fn label(&mut self) -> &'static str {
        self.labels[self.rng.below(self.labels.len())]
    }

    /// A constructor leaf, optionally carrying an identifier child.
    fn leaf(&mut self, named: bool) -> TermAst {
        let label = self.label();
        if named {
            let name = NAMES[self.rng.below(NAMES.len())];
            TermAst::compose(label, vec![TermAst::ident(name)])
        } else {
            TermAst::compose(label, Vec::new())
        }
    }

    /// Tree of height at most `depth`, or exactly `depth` when `exact`.
    /// Identifier leaves count towards the height.
    fn tree(&mut self, depth: usize, exact: bool) -> TermAst {
        if depth <= 1 {
            return self.leaf(false);
        }
        if !exact && self.rng.next_f64() < 0.3 {
            let named = self.rng.next_f64() < 0.5;
            return self.leaf(named);
        }
        if depth == 2 && self.rng.next_f64() < 0.5 {
            return self.leaf(true);
        }
        let label = self.label();
        let arity = 1 + self.rng.below(2);
        let mut children = Vec::with_capacity(arity);
        let deep = self.rng.below(arity);
        for k in 0..arity {
            children.push(self.tree(depth - 1, exact && k == deep));
        }
        TermAst::compose(label, children)
    }
}

/// Seeded synthetic corpus. A statement proves `apply <premise>` for an
/// earlier statement that still has an unshared motif; the first statement,
/// and any statement with no such candidate, closes with a premise-free
/// tactic. A statement's context is every earlier
/// statement of its file.
pub fn gen_synthetic_corpus(config: &CorpusConfig, grammar: &Grammar) -> Result<Vec<ProofRecord>> {
    config.validate()?;
    let shapes = tactic_shapes(grammar)?;
    let labels = &KERNEL_LABELS[..config.num_labels];
    let mut records = Vec::with_capacity(config.num_files * config.statements_per_file);
    for f in 0..config.num_files {
        let mut rng = SplitMix64::derive(config.seed, f as u64);
        records.extend(gen_file(config, &shapes, labels, &config.file_name(f), &mut rng));
    }
    Ok(records)
}

fn gen_file(
    config: &CorpusConfig,
    shapes: &TacticShapes,
    labels: &[&'static str],
    file: &str,
    rng: &mut SplitMix64,
) -> Vec<ProofRecord> {
    let n = config.statements_per_file;
    let mut fresh: Vec<TermAst> = Vec::with_capacity(n);
    let mut terms: Vec<TermAst> = Vec::with_capacity(n);
    let mut cites: Vec<Option<usize>> = Vec::with_capacity(n);
    let closers: Vec<(usize, usize)> = (0..n).map(|_| shapes.closers[rng.below(shapes.closers.len())]).collect();

    for j in 0..n {
        let own = TreeGen { rng: &mut *rng, labels }.tree(config.max_depth - 1, true);
        if j == 0 {
            terms.push(TermAst::compose(TreeGen { rng: &mut *rng, labels }.label(), vec![own.clone()]));
            fresh.push(own);
            cites.push(None);
            continue;
        }
        // Copy a subtree of a cited statement's own part that no other
        // earlier statement contains.
        let eligible: Vec<(usize, Vec<TermAst>)> = (0..j)
            .filter_map(|i| {
                let motifs: Vec<TermAst> = (0..fresh[i].len())
                    .filter(|&id| fresh[i].height(id) == config.motif_depth)
                    .map(|id| fresh[i].subtree(id))
                    .filter(|motif| (0..j).all(|m| m == i || !terms[m].contains_shape(motif)))
                    .collect();
                (!motifs.is_empty()).then_some((i, motifs))
            })
            .collect();
        let root = TreeGen { rng: &mut *rng, labels }.label();
        if eligible.is_empty() {
            // Every candidate motif already occurs elsewhere: close without a premise.
            terms.push(TermAst::compose(root, vec![own.clone()]));
            fresh.push(own);
            cites.push(None);
            continue;
        }
        let (i, motifs) = &eligible[rng.below(eligible.len())];
        let motif = motifs[rng.below(motifs.len())].clone();
        let mut parts = vec![own.clone(), motif];
        rng.shuffle(&mut parts);
        terms.push(TermAst::compose(root, parts));
        fresh.push(own);
        cites.push(Some(*i));
    }

    let names: Vec<String> = (0..n).map(|j| format!("{file}_lemma{j:02}")).collect();
    (0..n)
        .map(|j| {
            let tactic = match cites[j] {
                Some(i) => TacticAst::Node {
                    production: shapes.apply.0,
                    children: vec![TacticAst::Terminal(shapes.apply.1), TacticAst::Premise(i)],
                },
                None => TacticAst::Node {
                    production: closers[j].0,
                    children: vec![TacticAst::Terminal(closers[j].1)],
                },
            };
            ProofRecord {
                file: file.into(),
                position: j,
                name: names[j].clone(),
                theorem: terms[j].clone(),
                tactic,
                context: (0..j)
                    .map(|i| NamedPremise {
                        name: names[i].clone(),
                        position: i,
                        term: terms[i].clone(),
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Partition sizes for `n` items under `ratios`, each at least one.
fn partition_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("ratios must be positive and sum to 1, got {ratios:?}")));
    }
    if n < ratios.len() {
        return Err(Error::TooFewFiles {
            files: n,
            parts: ratios.len(),
        });
    }
    let mut sizes: Vec<usize> = ratios.iter().map(|r| (libm::round(r * n as f64) as usize).max(1)).collect();
    // Absorb rounding drift in the largest partition.
    while sizes.iter().sum::<usize>() != n {
        let largest = (0..sizes.len()).max_by_key(|&i| (sizes[i], core::cmp::Reverse(i))).unwrap_or(0);
        if sizes.iter().sum::<usize>() > n {
            sizes[largest] -= 1;
        } else {
            sizes[largest] += 1;
        }
    }
    Ok(sizes)
}

/// Seeded file-level split: returns the file names of each partition, sorted.
pub fn split_files(files: &BTreeSet<String>, ratios: &[f64], seed: u64) -> Result<Vec<Vec<String>>> {
    let sizes = partition_sizes(files.len(), ratios)?;
    let mut order: Vec<String> = files.iter().cloned().collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let mut out = Vec::with_capacity(sizes.len());
    let mut rest = order.as_slice();
    for size in sizes {
        let (head, tail) = rest.split_at(size);
        let mut part = head.to_vec();
        part.sort();
        out.push(part);
        rest = tail;
    }
    Ok(out)
}

/// Splits any file-tagged items so that no file spans two partitions.
pub fn split_by_file<T: Clone>(items: &[T], file_of: impl Fn(&T) -> &str, ratios: &[f64], seed: u64) -> Result<Vec<Vec<T>>> {
    let files: BTreeSet<String> = items.iter().map(|x| String::from(file_of(x))).collect();
    let parts = split_files(&files, ratios, seed)?;
    Ok(parts
        .iter()
        .map(|names| items.iter().filter(|x| names.iter().any(|n| n == file_of(x))).cloned().collect())
        .collect())
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

/// Train / valid / test records at file granularity.
pub fn split_corpus(records: &[ProofRecord], ratios: &[f64], seed: u64) -> Result<Vec<Vec<ProofRecord>>> {
    split_by_file(records, |r| &r.file, ratios, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(k: usize) -> TermAst {
        TermAst::parse(&format!("(App (Const c{k}) (Rel))")).unwrap()
    }

    fn record(position: usize, prior: usize, tactic: TacticAst) -> ProofRecord {
        ProofRecord {
            file: "f".into(),
            position,
            name: format!("t{position}"),
            theorem: term(position),
            tactic,
            context: (0..prior)
                .map(|i| NamedPremise {
                    name: format!("t{i}"),
                    position: position - prior + i,
                    term: term(i),
                })
                .collect(),
        }
    }

    fn apply(i: usize) -> TacticAst {
        TacticAst::Node {
            production: 3,
            children: vec![TacticAst::Terminal(3), TacticAst::Premise(i)],
        }
    }

    #[test]
    fn ten_nearest_negatives() {
        // Positive at position 8 lies outside the ten nearest (10..19).
        let rec = record(20, 15, apply(3));
        let ds = build_premise_dataset(&[rec]).unwrap();
        assert_eq!(ds.instances.len(), 1);
        assert_eq!(ds.traces[0].negative_positions, (10..20).rev().collect::<Vec<_>>());
        assert_eq!(ds.traces[0].positive_position, 8);

        // Positive among the nearest: it is skipped and the window extends.
        let rec = record(20, 15, apply(10));
        let ds = build_premise_dataset(&[rec]).unwrap();
        let mut expected: Vec<usize> = (9..20).rev().filter(|&p| p != 15).collect();
        expected.truncate(10);
        assert_eq!(ds.traces[0].negative_positions, expected);
    }

    #[test]
    fn few_priors_and_no_premise() {
        let ds = build_premise_dataset(&[record(4, 4, apply(0))]).unwrap();
        assert_eq!(ds.instances[0].negatives.len(), 3);
        let closer = TacticAst::Node {
            production: 1,
            children: vec![TacticAst::Terminal(1)],
        };
        let ds = build_premise_dataset(&[record(4, 4, closer), record(1, 1, apply(0))]).unwrap();
        assert!(ds.instances.is_empty());
        assert_eq!(ds.stats.skipped_no_premise, 1);
        assert_eq!(ds.stats.skipped_no_negatives, 1);
    }

    #[test]
    fn corpus_counts_and_separability() {
        let g = Grammar::default_tactics();
        let config = CorpusConfig {
            seed: 7,
            ..CorpusConfig::default()
        };
        let records = gen_synthetic_corpus(&config, &g).unwrap();
        assert_eq!(records.len(), 200);
        let files: BTreeSet<&str> = records.iter().map(|r| r.file.as_str()).collect();
        assert_eq!(files.len(), 10);
        let ds = build_premise_dataset(&records).unwrap();
        assert!(ds.stats.mean_negatives >= 5.0, "{:?}", ds.stats);
        for rec in &records {
            rec.tactic.validate(&g).unwrap();
            assert!(rec.theorem.height(0) <= config.max_depth);
        }
        assert_eq!(records, gen_synthetic_corpus(&config, &g).unwrap());
        let other = gen_synthetic_corpus(&CorpusConfig { seed: 8, ..config }, &g).unwrap();
        assert_ne!(records, other);
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let files: BTreeSet<String> = (0..10).map(|i| format!("file{i:02}")).collect();
        let parts = split_files(&files, &DEFAULT_RATIOS, 3).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [6, 2, 2]);
        let union: BTreeSet<&String> = parts.iter().flatten().collect();
        assert_eq!(union.len(), 10);
        let few: BTreeSet<String> = ["a".into(), "b".into()].into();
        assert_eq!(split_files(&few, &DEFAULT_RATIOS, 0), Err(Error::TooFewFiles { files: 2, parts: 3 }));
        assert!(split_files(&files, &[0.5, 0.6, -0.1], 0).is_err());
        let big: BTreeSet<String> = (0..123).map(|i| format!("p{i:03}")).collect();
        let parts = split_files(&big, &[70.0 / 123.0, 26.0 / 123.0, 27.0 / 123.0], 0).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [70, 26, 27]);
    }

    #[test]
    fn invalid_corpus_configs() {
        let g = Grammar::default_tactics();
        for config in [
            CorpusConfig { num_files: 0, ..CorpusConfig::default() },
            CorpusConfig { num_labels: 1, ..CorpusConfig::default() },
            CorpusConfig { motif_depth: 5, ..CorpusConfig::default() },
        ] {
            assert!(gen_synthetic_corpus(&config, &g).is_err());
        }
        let no_apply = Grammar::parse("T -> intro").unwrap();
        assert!(gen_synthetic_corpus(&CorpusConfig::default(), &no_apply).is_err());
    }
}
