//! Context-free tactic grammars, derivation trees and leftmost derivations.
//!
//! Grammar text holds one production per line, `LHS -> sym sym ...`, with
//! `|` separating alternatives and `#` starting a comment. Uppercase-initial
//! symbols are nonterminals, `PREMISE_ARG` is the reserved premise slot, and
//! everything else is a terminal. The first left-hand side is the start
//! symbol.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::sexpr::{parse_sexpr, SExpr};
use crate::{Error, Result};

pub const PREMISE_ARG: &str = "PREMISE_ARG";

/// The built-in mini tactic grammar.
pub const DEFAULT_GRAMMAR: &str = "\
# Mini tactic grammar.
T -> intro
T -> reflexivity
T -> split
T -> apply PREMISE_ARG
T -> rewrite PREMISE_ARG
T -> seq T T
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Nonterminal(usize),
    Terminal(usize),
    Premise,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: usize,
    pub rhs: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    productions: Vec<Production>,
    by_lhs: Vec<Vec<usize>>,
    start: usize,
}

fn is_nonterminal_name(sym: &str) -> bool {
    sym != PREMISE_ARG && sym.starts_with(|c: char| c.is_ascii_uppercase())
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: Vec<(String, Vec<&str>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| Error::Grammar(format!("line {}: expected `LHS -> ...`", lineno + 1)))?;
            let lhs = lhs.trim();
            if lhs.split_whitespace().count() != 1 || !is_nonterminal_name(lhs) {
                return Err(Error::Grammar(format!(
                    "line {}: left-hand side {lhs:?} must be one uppercase-initial symbol",
                    lineno + 1
                )));
            }
            for alt in rhs.split('|') {
                raw.push((lhs.to_owned(), alt.split_whitespace().collect()));
            }
        }
        if raw.is_empty() {
            return Err(Error::Grammar("no productions".into()));
        }

        let mut nonterminals: Vec<String> = Vec::new();
        for (lhs, _) in &raw {
            if !nonterminals.contains(lhs) {
                nonterminals.push(lhs.clone());
            }
        }
        let mut terminals: Vec<String> = Vec::new();
        let mut productions = Vec::with_capacity(raw.len());
        for (lhs, rhs) in &raw {
            let mut symbols = Vec::with_capacity(rhs.len());
            for &sym in rhs {
                let s = if sym == PREMISE_ARG {
                    Symbol::Premise
                } else if is_nonterminal_name(sym) {
                    let idx = nonterminals
                        .iter()
                        .position(|n| n == sym)
                        .ok_or_else(|| Error::Grammar(format!("nonterminal {sym} has no productions")))?;
                    Symbol::Nonterminal(idx)
                } else {
                    if sym.contains(['(', ')']) {
                        return Err(Error::Grammar(format!("terminal {sym:?} may not contain parentheses")));
                    }
                    let idx = terminals.iter().position(|t| t == sym).unwrap_or_else(|| {
                        terminals.push(sym.to_owned());
                        terminals.len() - 1
                    });
                    Symbol::Terminal(idx)
                };
                symbols.push(s);
            }
            let lhs = nonterminals.iter().position(|n| n == lhs).expect("collected above");
            productions.push(Production { lhs, rhs: symbols });
        }
        let mut by_lhs = vec![Vec::new(); nonterminals.len()];
        for (id, p) in productions.iter().enumerate() {
            by_lhs[p.lhs].push(id);
        }
        Ok(Grammar {
            nonterminals,
            terminals,
            productions,
            by_lhs,
            start: 0,
        })
    }

    pub fn default_tactics() -> Self {
        Self::parse(DEFAULT_GRAMMAR).expect("built-in grammar is valid")
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: usize) -> &Production {
        &self.productions[id]
    }

    pub fn num_productions(&self) -> usize {
        self.productions.len()
    }

    /// Production ids with left-hand side `nonterminal`, in id order.
    pub fn productions_for(&self, nonterminal: usize) -> &[usize] {
        &self.by_lhs[nonterminal]
    }

    /// `mask[p]` is true iff production `p` expands `nonterminal`.
    pub fn mask(&self, nonterminal: usize) -> Vec<bool> {
        self.productions.iter().map(|p| p.lhs == nonterminal).collect()
    }

    pub fn symbol_name(&self, sym: Symbol) -> &str {
        match sym {
            Symbol::Nonterminal(i) => &self.nonterminals[i],
            Symbol::Terminal(i) => &self.terminals[i],
            Symbol::Premise => PREMISE_ARG,
        }
    }

    /// `LHS -> rhs...` for production `id`.
    pub fn describe_production(&self, id: usize) -> String {
        let p = &self.productions[id];
        let mut s = format!("{} ->", self.nonterminals[p.lhs]);
        for &sym in &p.rhs {
            let _ = write!(s, " {}", self.symbol_name(sym));
        }
        s
    }
}

/// One decision in a leftmost derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Production(usize),
    Premise(usize),
}

/// What the leftmost unexpanded position asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frontier {
    Nonterminal(usize),
    Premise,
}

/// Derivation tree. Internal nodes record the chosen production; their
/// children mirror its right-hand side one-to-one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TacticAst {
    Node { production: usize, children: Vec<TacticAst> },
    Terminal(usize),
    Premise(usize),
}

impl TacticAst {
    /// Premise indices in left-to-right order.
    pub fn premises(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_premises(&mut out);
        out
    }

    fn collect_premises(&self, out: &mut Vec<usize>) {
        match self {
            TacticAst::Node { children, .. } => children.iter().for_each(|c| c.collect_premises(out)),
            TacticAst::Terminal(_) => {}
            TacticAst::Premise(i) => out.push(*i),
        }
    }

    /// Checks that the tree is a complete derivation from the start symbol.
    pub fn validate(&self, grammar: &Grammar) -> Result<()> {
        derivation_sequence(grammar, self).map(|_| ())
    }

    /// Copy with every premise index mapped through `f`.
    pub fn map_premises(&self, f: &impl Fn(usize) -> usize) -> TacticAst {
        match self {
            TacticAst::Node { production, children } => TacticAst::Node {
                production: *production,
                children: children.iter().map(|c| c.map_premises(f)).collect(),
            },
            TacticAst::Terminal(t) => TacticAst::Terminal(*t),
            TacticAst::Premise(i) => TacticAst::Premise(f(*i)),
        }
    }
}

/// Leftmost derivation state: a stack of pending decisions.
#[derive(Debug, Clone)]
pub struct Derivation<'g> {
    grammar: &'g Grammar,
    pending: Vec<Frontier>,
}

impl<'g> Derivation<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        Derivation {
            grammar,
            pending: vec![Frontier::Nonterminal(grammar.start())],
        }
    }

    pub fn frontier(&self) -> Option<Frontier> {
        self.pending.last().copied()
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn apply(&mut self, action: Action) -> Result<()> {
        let top = self.frontier().ok_or_else(|| Error::GoldInvalid("derivation already complete".into()))?;
        match (top, action) {
            (Frontier::Nonterminal(nt), Action::Production(p)) => {
                let prod = self
                    .grammar
                    .productions
                    .get(p)
                    .ok_or_else(|| Error::GoldInvalid(format!("unknown production {p}")))?;
                if prod.lhs != nt {
                    return Err(Error::GoldInvalid(format!(
                        "production {p} does not expand {}",
                        self.grammar.nonterminals[nt]
                    )));
                }
                self.pending.pop();
                for &sym in prod.rhs.iter().rev() {
                    match sym {
                        Symbol::Nonterminal(n) => self.pending.push(Frontier::Nonterminal(n)),
                        Symbol::Premise => self.pending.push(Frontier::Premise),
                        Symbol::Terminal(_) => {}
                    }
                }
                Ok(())
            }
            (Frontier::Premise, Action::Premise(_)) => {
                self.pending.pop();
                Ok(())
            }
            (frontier, action) => Err(Error::GoldInvalid(format!("{action:?} cannot fill {frontier:?}"))),
        }
    }
}

/// Depth-first leftmost action sequence of `tree`.
pub fn derivation_sequence(grammar: &Grammar, tree: &TacticAst) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    walk(grammar, tree, Symbol::Nonterminal(grammar.start()), &mut out)?;
    Ok(out)
}

fn walk(grammar: &Grammar, tree: &TacticAst, expected: Symbol, out: &mut Vec<Action>) -> Result<()> {
    match (tree, expected) {
        (TacticAst::Node { production, children }, Symbol::Nonterminal(nt)) => {
            let prod = grammar
                .productions
                .get(*production)
                .ok_or_else(|| Error::InvalidTree(format!("unknown production {production}")))?;
            if prod.lhs != nt {
                return Err(Error::InvalidTree(format!(
                    "production {production} used where {} is expected",
                    grammar.nonterminals[nt]
                )));
            }
            if prod.rhs.len() != children.len() {
                return Err(Error::InvalidTree(format!(
                    "production {production} has {} symbols but the node has {} children",
                    prod.rhs.len(),
                    children.len()
                )));
            }
            out.push(Action::Production(*production));
            for (child, &sym) in children.iter().zip(&prod.rhs) {
                walk(grammar, child, sym, out)?;
            }
            Ok(())
        }
        (TacticAst::Terminal(t), Symbol::Terminal(e)) if t == &e => Ok(()),
        (TacticAst::Premise(i), Symbol::Premise) => {
            out.push(Action::Premise(*i));
            Ok(())
        }
        (node, sym) => Err(Error::InvalidTree(format!(
            "{node:?} does not match symbol {}",
            grammar.symbol_name(sym)
        ))),
    }
}

/// Rebuilds the derivation tree from a complete leftmost action sequence.
pub fn replay(grammar: &Grammar, actions: &[Action]) -> Result<TacticAst> {
    let mut it = actions.iter().copied();
    let tree = build(grammar, Symbol::Nonterminal(grammar.start()), &mut it, 0)?;
    if it.next().is_some() {
        return Err(Error::GoldInvalid("actions remain after the derivation completed".into()));
    }
    Ok(tree)
}

fn build(grammar: &Grammar, sym: Symbol, it: &mut impl Iterator<Item = Action>, depth: usize) -> Result<TacticAst> {
    if depth > 4096 {
        return Err(Error::GoldInvalid("derivation too deep".into()));
    }
    match sym {
        Symbol::Terminal(t) => Ok(TacticAst::Terminal(t)),
        Symbol::Premise => match it.next() {
            Some(Action::Premise(i)) => Ok(TacticAst::Premise(i)),
            other => Err(Error::GoldInvalid(format!("expected a premise index, found {other:?}"))),
        },
        Symbol::Nonterminal(nt) => match it.next() {
            Some(Action::Production(p)) if grammar.productions.get(p).is_some_and(|x| x.lhs == nt) => {
                let children = grammar.productions[p]
                    .rhs
                    .iter()
                    .map(|&s| build(grammar, s, it, depth + 1))
                    .collect::<Result<_>>()?;
                Ok(TacticAst::Node { production: p, children })
            }
            other => Err(Error::GoldInvalid(format!(
                "expected a production for {}, found {other:?}",
                grammar.nonterminals[nt]
            ))),
        },
    }
}

/// Renders a tactic as text. A node whose production has a single symbol
/// prints that symbol bare; longer productions are parenthesized, except at
/// the root. `premise` names premise indices.
pub fn render_tactic(grammar: &Grammar, tree: &TacticAst, premise: &impl Fn(usize) -> String) -> String {
    let mut out = String::new();
    render(grammar, tree, premise, true, &mut out);
    out
}

fn render(grammar: &Grammar, tree: &TacticAst, premise: &impl Fn(usize) -> String, root: bool, out: &mut String) {
    match tree {
        TacticAst::Terminal(t) => out.push_str(&grammar.terminals[*t]),
        TacticAst::Premise(i) => out.push_str(&premise(*i)),
        TacticAst::Node { children, .. } => {
            let wrap = !root && children.len() != 1;
            if wrap {
                out.push('(');
            }
            for (k, c) in children.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                render(grammar, c, premise, false, out);
            }
            if wrap {
                out.push(')');
            }
        }
    }
}

/// Parses text produced by [`render_tactic`]. `premise` resolves premise
/// names to indices. Among several matching productions the lowest id wins.
pub fn parse_tactic(grammar: &Grammar, text: &str, premise: &impl Fn(&str) -> Option<usize>) -> Result<TacticAst> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::InvalidTree("empty tactic".into()));
    }
    let sexpr = parse_sexpr(&format!("({text})"))?;
    let items = match sexpr {
        SExpr::List(items) => items,
        SExpr::Atom(_) => unreachable!("wrapped in parentheses"),
    };
    let start = grammar.start();
    let root = if items.len() == 1 {
        match_item(grammar, &items[0], start, premise, 0)
    } else {
        match_list(grammar, &items, start, premise, 0)
    };
    root.ok_or_else(|| Error::InvalidTree(format!("{text:?} is not derivable from the grammar")))
}

fn match_list(
    grammar: &Grammar,
    items: &[SExpr],
    nt: usize,
    premise: &impl Fn(&str) -> Option<usize>,
    depth: usize,
) -> Option<TacticAst> {
    if depth > 256 {
        return None;
    }
    for &p in grammar.productions_for(nt) {
        let rhs = &grammar.productions[p].rhs;
        if rhs.len() != items.len() {
            continue;
        }
        if rhs.len() == 1 {
            if let Some(child) = match_symbol(grammar, &items[0], rhs[0], premise, depth + 1) {
                return Some(TacticAst::Node {
                    production: p,
                    children: vec![child],
                });
            }
            continue;
        }
        let children: Option<Vec<TacticAst>> = rhs
            .iter()
            .zip(items)
            .map(|(&sym, item)| match_symbol(grammar, item, sym, premise, depth + 1))
            .collect();
        if let Some(children) = children {
            return Some(TacticAst::Node { production: p, children });
        }
    }
    None
}

/// A single item standing for nonterminal `nt`.
fn match_item(
    grammar: &Grammar,
    item: &SExpr,
    nt: usize,
    premise: &impl Fn(&str) -> Option<usize>,
    depth: usize,
) -> Option<TacticAst> {
    match item {
        SExpr::List(items) => match_list(grammar, items, nt, premise, depth),
        SExpr::Atom(_) => match_list(grammar, core::slice::from_ref(item), nt, premise, depth),
    }
}

fn match_symbol(
    grammar: &Grammar,
    item: &SExpr,
    sym: Symbol,
    premise: &impl Fn(&str) -> Option<usize>,
    depth: usize,
) -> Option<TacticAst> {
    match (sym, item) {
        (Symbol::Terminal(t), SExpr::Atom(a)) if a == &grammar.terminals[t] => Some(TacticAst::Terminal(t)),
        (Symbol::Premise, SExpr::Atom(a)) => premise(a).map(TacticAst::Premise),
        (Symbol::Nonterminal(n), _) => match_item(grammar, item, n, premise, depth),
        _ => None,
    }
}
