//! Labeled term trees and their undirected-graph view.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::sexpr::SExpr;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Label given to leaves that stand for identifier atoms.
pub const IDENT: &str = "IDENT";
/// Reserved final vocabulary entry for labels never seen while building it.
pub const UNK: &str = "UNK";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub label: String,
    /// Identifier text, only on `IDENT` leaves. Never featurized.
    pub ident: Option<String>,
    pub children: Vec<usize>,
}

/// A term as a tree whose node ids are assigned in pre-order, so the root is
/// always node 0 and every node precedes its descendants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermAst {
    nodes: Vec<AstNode>,
}

impl TermAst {
    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &AstNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Parses a term from its s-expression text.
    pub fn parse(text: &str) -> Result<Self> {
        sexpr_to_ast(&crate::sexpr::parse_sexpr(text)?)
    }

    /// Builds a tree from a label and already-built subtrees.
    pub fn compose(label: &str, children: Vec<TermAst>) -> Self {
        let mut nodes = vec![AstNode {
            label: label.to_string(),
            ident: None,
            children: Vec::with_capacity(children.len()),
        }];
        for child in children {
            let offset = nodes.len();
            nodes[0].children.push(offset);
            nodes.extend(child.nodes.into_iter().map(|mut n| {
                n.children.iter_mut().for_each(|c| *c += offset);
                n
            }));
        }
        TermAst { nodes }
    }

    /// A single `IDENT` leaf.
    pub fn ident(name: &str) -> Self {
        TermAst {
            nodes: vec![AstNode {
                label: IDENT.to_string(),
                ident: Some(name.to_string()),
                children: Vec::new(),
            }],
        }
    }

    pub fn to_sexpr(&self) -> SExpr {
        self.sexpr_at(0)
    }

    fn sexpr_at(&self, id: usize) -> SExpr {
        let node = &self.nodes[id];
        match (&node.ident, node.children.is_empty()) {
            (Some(name), true) if node.label == IDENT => SExpr::Atom(name.clone()),
            _ => {
                let mut items = Vec::with_capacity(node.children.len() + 1);
                items.push(SExpr::Atom(node.label.clone()));
                items.extend(node.children.iter().map(|&c| self.sexpr_at(c)));
                SExpr::List(items)
            }
        }
    }

    /// Copy of the subtree rooted at `id`.
    pub fn subtree(&self, id: usize) -> TermAst {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            return TermAst { nodes: vec![node.clone()] };
        }
        TermAst::compose(&node.label, node.children.iter().map(|&c| self.subtree(c)).collect())
    }

    /// Height of the subtree rooted at `id` (a leaf has height 1).
    pub fn height(&self, id: usize) -> usize {
        1 + self.nodes[id]
            .children
            .iter()
            .map(|&c| self.height(c))
            .max()
            .unwrap_or(0)
    }

    /// Order-insensitive, identifier-insensitive shape of the subtree at `id`:
    /// exactly what the graph encoders can observe.
    pub fn canonical_shape(&self, id: usize) -> String {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            return node.label.clone();
        }
        let mut parts: Vec<String> = node.children.iter().map(|&c| self.canonical_shape(c)).collect();
        parts.sort();
        let mut out = String::new();
        out.push('(');
        out.push_str(&node.label);
        for p in parts {
            out.push(' ');
            out.push_str(&p);
        }
        out.push(')');
        out
    }

    /// Whether some subtree of `self` has the same canonical shape as `other`.
    pub fn contains_shape(&self, other: &TermAst) -> bool {
        let target = other.canonical_shape(0);
        let target_height = other.height(0);
        (0..self.len()).any(|id| self.height(id) == target_height && self.canonical_shape(id) == target)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.label.as_str())
    }

    /// Checks the tree invariants: pre-order ids, single parent per node,
    /// identifiers only on `IDENT` leaves.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyList);
        }
        // A pre-order walk must visit ids 0, 1, 2, ... exactly once each.
        let mut expected = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if id != expected {
                return Err(Error::InvalidTree("ids are not a pre-order tree numbering".into()));
            }
            expected += 1;
            let node = &self.nodes[id];
            if node.ident.is_some() && (node.label != IDENT || !node.children.is_empty()) {
                return Err(Error::InvalidTree("identifier on a non-IDENT-leaf node".into()));
            }
            for &c in node.children.iter().rev() {
                if c >= self.nodes.len() {
                    return Err(Error::InvalidTree("child id out of range".into()));
                }
                stack.push(c);
            }
            if expected > self.nodes.len() {
                return Err(Error::InvalidTree("node reachable twice".into()));
            }
        }
        if expected != self.nodes.len() {
            return Err(Error::InvalidTree("nodes unreachable from the root".into()));
        }
        Ok(())
    }
}

impl core::fmt::Display for TermAst {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

/// Converts an s-expression to a tree. A list's head atom becomes the node
/// label; every other atom becomes an `IDENT` leaf carrying its text.
pub fn sexpr_to_ast(s: &SExpr) -> Result<TermAst> {
    let mut nodes = Vec::new();
    build(s, &mut nodes)?;
    Ok(TermAst { nodes })
}

fn build(s: &SExpr, nodes: &mut Vec<AstNode>) -> Result<usize> {
    let id = nodes.len();
    match s {
        SExpr::Atom(text) => {
            nodes.push(AstNode {
                label: IDENT.to_string(),
                ident: Some(text.clone()),
                children: Vec::new(),
            });
        }
        SExpr::List(items) => {
            let (head, rest) = items.split_first().ok_or(Error::EmptyList)?;
            let SExpr::Atom(label) = head else {
                return Err(Error::NonAtomHead);
            };
            nodes.push(AstNode {
                label: label.clone(),
                ident: None,
                children: Vec::with_capacity(rest.len()),
            });
            for child in rest {
                let cid = build(child, nodes)?;
                nodes[id].children.push(cid);
            }
        }
    }
    Ok(id)
}

/// Vocabulary of syntactic roles, sorted, with `UNK` as the final entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeVocab {
    labels: Vec<String>,
}

impl NodeVocab {
    /// Builds a vocabulary from explicit labels; `UNK` is appended if absent.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = labels
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .filter(|s| s != UNK)
            .collect();
        let mut labels: Vec<String> = set.into_iter().collect();
        labels.push(UNK.to_string());
        NodeVocab { labels }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index(&self, label: &str) -> usize {
        let known = &self.labels[..self.labels.len() - 1];
        known
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .unwrap_or(self.labels.len() - 1)
    }
}

pub fn vocab_from_corpus<'a, I>(asts: I) -> NodeVocab
where
    I: IntoIterator<Item = &'a TermAst>,
{
    NodeVocab::from_labels(asts.into_iter().flat_map(|a| a.labels()))
}

/// Undirected graph view of a term with one-hot node features.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGraph {
    num_nodes: usize,
    /// Directed records; every undirected edge appears in both directions.
    edges: Vec<(usize, usize)>,
    features: Tensor,
    neighbors: Vec<Vec<usize>>,
}

impl TermGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// Builds a graph from raw parts; used for relabeling and for tests.
    pub fn from_parts(num_nodes: usize, undirected: &[(usize, usize)], features: Tensor) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::ShapeMismatch {
                op: "graph",
                detail: alloc::format!("{} feature rows for {} nodes", features.rows(), num_nodes),
            });
        }
        let mut edges = Vec::with_capacity(undirected.len() * 2);
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(a, b) in undirected {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::ShapeMismatch {
                    op: "graph",
                    detail: alloc::format!("edge ({a}, {b}) out of range"),
                });
            }
            edges.push((a, b));
            edges.push((b, a));
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Ok(TermGraph {
            num_nodes,
            edges,
            features,
            neighbors,
        })
    }

    /// Disjoint union; graph `g` occupies rows `offsets[g]..offsets[g + 1]`.
    pub fn disjoint_union(graphs: &[TermGraph]) -> Result<(TermGraph, Vec<usize>)> {
        let d = graphs.first().map_or(0, |g| g.features.cols());
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        let mut data = Vec::new();
        let mut undirected = Vec::new();
        let mut n = 0;
        for g in graphs {
            if g.features.cols() != d {
                return Err(Error::ShapeMismatch {
                    op: "graph union",
                    detail: alloc::format!("feature widths {} and {d}", g.features.cols()),
                });
            }
            offsets.push(n);
            data.extend_from_slice(g.features.data());
            undirected.extend(g.edges.chunks(2).map(|pair| (pair[0].0 + n, pair[0].1 + n)));
            n += g.num_nodes;
        }
        offsets.push(n);
        let union = Self::from_parts(n, &undirected, Tensor::from_vec(vec![n, d], data)?)?;
        Ok((union, offsets))
    }

    /// The same graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes;
        let mut check = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || core::mem::replace(&mut check[p], true)) {
            return Err(Error::InvalidConfig("not a permutation".into()));
        }
        let d = self.features.cols();
        let mut data = vec![0.0; n * d];
        for (old, &new) in perm.iter().enumerate() {
            data[new * d..(new + 1) * d].copy_from_slice(self.features.row(old));
        }
        let undirected: Vec<(usize, usize)> = self
            .edges
            .chunks(2)
            .map(|pair| (perm[pair[0].0], perm[pair[0].1]))
            .collect();
        Self::from_parts(n, &undirected, Tensor::from_vec(vec![n, d], data)?)
    }
}

pub fn ast_to_graph(ast: &TermAst, vocab: &NodeVocab) -> TermGraph {
    let n = ast.len();
    let d = vocab.dim();
    let mut data = vec![0.0; n * d];
    let mut undirected = Vec::with_capacity(n.saturating_sub(1));
    for (id, node) in ast.nodes().iter().enumerate() {
        data[id * d + vocab.index(&node.label)] = 1.0;
        for &c in &node.children {
            undirected.push((id, c));
        }
    }
    let features = Tensor::from_vec(vec![n, d], data).expect("feature shape");
    TermGraph::from_parts(n, &undirected, features).expect("tree edges are in range")
}
