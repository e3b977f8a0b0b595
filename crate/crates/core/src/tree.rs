//! Rooted phylogenetic trees: Newick parsing, canonical node indexing and
//! the structural queries used by the pruning recursions.
//!
//! Node ids are 0-based. Leaves occupy `0..S` in the order they appear in the
//! Newick text (or in an explicitly requested order), internal nodes are
//! numbered in post-order from `S`, so the root is always the last node and
//! every child has a smaller id than its parent. A branch is identified by
//! the id of its child node, so branch ids are `0..node_count() - 1`.
//!
//! File formats that expose node ids (null-model and partition JSON) use the
//! 1-based convention `id + 1`.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("unbalanced parentheses at byte {offset}")]
    Unbalanced { offset: usize },
    #[error("duplicate leaf label `{label}` at byte {offset}")]
    DuplicateLabel { label: String, offset: usize },
    #[error("empty leaf label at byte {offset}")]
    EmptyLabel { offset: usize },
    #[error("trailing input after tree at byte {offset}")]
    TrailingGarbage { offset: usize },
    #[error("missing terminating `;` at byte {offset}")]
    MissingSemicolon { offset: usize },
    #[error("invalid branch length at byte {offset}")]
    BadLength { offset: usize },
    #[error("unterminated quoted label starting at byte {offset}")]
    UnterminatedQuote { offset: usize },
    #[error("tree must have at least two leaves")]
    TooFewLeaves,
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<TreeError>,
    },
    #[error("tree on line {line} does not share the leaf set of line 1: species `{species}`")]
    LeafSetMismatch { line: usize, species: String },
    #[error("species `{0}` is not a leaf of the tree")]
    UnknownLeaf(String),
    #[error("leaf order has {got} labels but the tree has {expected} leaves")]
    LeafCountMismatch { expected: usize, got: usize },
    #[error("node {node} out of range (tree has {count} nodes)")]
    NodeOutOfRange { node: NodeId, count: usize },
    #[error("tree set is empty")]
    EmptySet,
    #[error("tree weights must be non-negative and sum to 1")]
    BadWeights,
}

/// Nested, index-free form of a tree; what the parser produces and what the
/// renderer and tree generators consume.
#[derive(Debug, Clone, PartialEq)]
pub enum Clade {
    Leaf {
        name: String,
        length: Option<f64>,
    },
    Inner {
        children: Vec<Clade>,
        label: Option<String>,
        length: Option<f64>,
    },
}

impl Clade {
    pub fn leaf(name: impl Into<String>) -> Self {
        Clade::Leaf {
            name: name.into(),
            length: None,
        }
    }

    pub fn inner(children: Vec<Clade>) -> Self {
        Clade::Inner {
            children,
            label: None,
            length: None,
        }
    }

    fn collect_leaf_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Clade::Leaf { name, .. } => out.push(name),
            Clade::Inner { children, .. } => children.iter().for_each(|c| c.collect_leaf_names(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    leaf_labels: Vec<String>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    lengths: Vec<Option<f64>>,
    inner_labels: Vec<Option<String>>,
    // ascending node ids of each clade, so iteration is bottom-up
    subtrees: Vec<Vec<NodeId>>,
}

impl PhyloTree {
    /// Builds a canonically indexed tree with leaves in order of appearance.
    pub fn from_clade(clade: &Clade) -> Result<Self, TreeError> {
        let mut names = Vec::new();
        clade.collect_leaf_names(&mut names);
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(TreeError::EmptyLabel { offset: 0 });
            }
            if !seen.insert(*n) {
                return Err(TreeError::DuplicateLabel {
                    label: n.to_string(),
                    offset: 0,
                });
            }
        }
        let order: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        Self::build(clade, &order)
    }

    fn build(clade: &Clade, leaf_order: &[String]) -> Result<Self, TreeError> {
        let s = leaf_order.len();
        if s < 2 {
            return Err(TreeError::TooFewLeaves);
        }
        let index: HashMap<&str, NodeId> = leaf_order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut b = Builder {
            index,
            next_inner: s,
            parent: vec![None; s],
            children: vec![Vec::new(); s],
            lengths: vec![None; s],
            inner_labels: vec![None; s],
        };
        let root = b.visit(clade)?;
        let n = b.parent.len();
        debug_assert_eq!(root, n - 1);
        let mut tree = PhyloTree {
            leaf_labels: leaf_order.to_vec(),
            parent: b.parent,
            children: b.children,
            lengths: b.lengths,
            inner_labels: b.inner_labels,
            subtrees: Vec::new(),
        };
        tree.subtrees = (0..n)
            .map(|v| {
                let mut nodes = Vec::new();
                let mut stack = vec![v];
                while let Some(u) = stack.pop() {
                    nodes.push(u);
                    stack.extend_from_slice(&tree.children[u]);
                }
                nodes.sort_unstable();
                nodes
            })
            .collect();
        Ok(tree)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_labels.len()
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Number of branches, one per non-root node.
    pub fn branch_count(&self) -> usize {
        self.node_count() - 1
    }

    pub fn root(&self) -> NodeId {
        self.node_count() - 1
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        node < self.leaf_count()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node]
    }

    pub fn leaf_labels(&self) -> &[String] {
        &self.leaf_labels
    }

    pub fn leaf_index(&self, name: &str) -> Option<NodeId> {
        self.leaf_labels.iter().position(|l| l == name)
    }

    pub fn branch_length(&self, node: NodeId) -> Option<f64> {
        self.lengths[node]
    }

    /// All nodes of the clade rooted at `node`, including it, ascending.
    pub fn subtree_nodes(&self, node: NodeId) -> Result<&[NodeId], TreeError> {
        self.subtrees
            .get(node)
            .map(Vec::as_slice)
            .ok_or(TreeError::NodeOutOfRange {
                node,
                count: self.node_count(),
            })
    }

    /// Unchecked clade lookup for hot loops; panics if `node` is out of range.
    pub fn clade(&self, node: NodeId) -> &[NodeId] {
        &self.subtrees[node]
    }

    pub fn in_subtree(&self, root: NodeId, node: NodeId) -> bool {
        self.subtrees[root].binary_search(&node).is_ok()
    }

    pub fn clade_leaves(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let s = self.leaf_count();
        self.subtrees[node].iter().copied().take_while(move |&v| v < s)
    }

    pub fn to_clade(&self) -> Clade {
        self.clade_of(self.root())
    }

    fn clade_of(&self, node: NodeId) -> Clade {
        if self.is_leaf(node) {
            Clade::Leaf {
                name: self.leaf_labels[node].clone(),
                length: self.lengths[node],
            }
        } else {
            Clade::Inner {
                children: self.children[node].iter().map(|&c| self.clade_of(c)).collect(),
                label: self.inner_labels[node].clone(),
                length: self.lengths[node],
            }
        }
    }

    /// Re-indexes the leaves so that `order[k]` becomes leaf `k`.
    pub fn with_leaf_order(&self, order: &[String]) -> Result<Self, TreeError> {
        if order.len() != self.leaf_count() {
            return Err(TreeError::LeafCountMismatch {
                expected: self.leaf_count(),
                got: order.len(),
            });
        }
        for name in order {
            if self.leaf_index(name).is_none() {
                return Err(TreeError::UnknownLeaf(name.clone()));
            }
        }
        let distinct: HashSet<&String> = order.iter().collect();
        if distinct.len() != order.len() {
            return Err(TreeError::LeafCountMismatch {
                expected: self.leaf_count(),
                got: distinct.len(),
            });
        }
        Self::build(&self.to_clade(), order)
    }

    /// Newick text for the tree, terminated by `;`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(self.root(), &mut out);
        out.push(';');
        out
    }

    fn render_node(&self, node: NodeId, out: &mut String) {
        if self.is_leaf(node) {
            push_label(out, &self.leaf_labels[node]);
        } else {
            out.push('(');
            for (i, &c) in self.children[node].iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.render_node(c, out);
            }
            out.push(')');
            if let Some(l) = &self.inner_labels[node] {
                push_label(out, l);
            }
        }
        if let Some(len) = self.lengths[node] {
            out.push(':');
            out.push_str(&format!("{len}"));
        }
    }
}

struct Builder<'a> {
    index: HashMap<&'a str, NodeId>,
    next_inner: NodeId,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    lengths: Vec<Option<f64>>,
    inner_labels: Vec<Option<String>>,
}

impl Builder<'_> {
    fn visit(&mut self, clade: &Clade) -> Result<NodeId, TreeError> {
        match clade {
            Clade::Leaf { name, length } => {
                let id = *self
                    .index
                    .get(name.as_str())
                    .ok_or_else(|| TreeError::UnknownLeaf(name.clone()))?;
                self.lengths[id] = *length;
                Ok(id)
            }
            Clade::Inner {
                children,
                label,
                length,
            } => {
                let kids = children
                    .iter()
                    .map(|c| self.visit(c))
                    .collect::<Result<Vec<_>, _>>()?;
                let id = self.next_inner;
                self.next_inner += 1;
                self.parent.push(None);
                self.children.push(kids.clone());
                self.lengths.push(*length);
                self.inner_labels.push(label.clone());
                for k in kids {
                    self.parent[k] = Some(id);
                }
                Ok(id)
            }
        }
    }
}

fn needs_quotes(label: &str) -> bool {
    label
        .chars()
        .any(|c| c.is_whitespace() || "(),:;[]'".contains(c))
}

fn push_label(out: &mut String, label: &str) {
    if needs_quotes(label) {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

/// Parses a single Newick expression terminated by `;`.
///
/// Multifurcations are kept; branch lengths are parsed and stored but carry
/// no meaning for the models.
pub fn parse_newick(text: &str) -> Result<PhyloTree, TreeError> {
    let clade = parse_clade_text(text)?;
    PhyloTree::from_clade(&clade)
}

/// Parses the text into a [`Clade`] with byte-offset error reporting.
pub fn parse_clade_text(text: &str) -> Result<Clade, TreeError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        seen: HashSet::new(),
    };
    p.skip_ws();
    let clade = p.clade()?;
    p.skip_ws();
    match p.peek() {
        None => return Err(TreeError::MissingSemicolon { offset: p.pos }),
        Some(b';') => p.pos += 1,
        Some(b')') => return Err(TreeError::Unbalanced { offset: p.pos }),
        Some(_) => return Err(TreeError::TrailingGarbage { offset: p.pos }),
    }
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(TreeError::TrailingGarbage { offset: p.pos });
    }
    if let Clade::Leaf { .. } = clade {
        return Err(TreeError::TooFewLeaves);
    }
    Ok(clade)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    seen: HashSet<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    // comment; unterminated comments swallow the rest
                    while let Some(c) = self.peek() {
                        self.pos += 1;
                        if c == b']' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn clade(&mut self) -> Result<Clade, TreeError> {
        if self.peek() == Some(b'(') {
            let open = self.pos;
            self.pos += 1;
            let mut children = Vec::new();
            loop {
                self.skip_ws();
                children.push(self.clade()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    None | Some(b';') => return Err(TreeError::Unbalanced { offset: open }),
                    Some(_) => return Err(TreeError::TrailingGarbage { offset: self.pos }),
                }
            }
            self.skip_ws();
            let label = self.label()?;
            let length = self.length()?;
            Ok(Clade::Inner {
                children,
                label: (!label.is_empty()).then_some(label),
                length,
            })
        } else {
            let start = self.pos;
            let name = self.label()?;
            if name.is_empty() {
                return match self.peek() {
                    Some(b')') if !self.has_open_paren_before(start) => {
                        Err(TreeError::Unbalanced { offset: start })
                    }
                    _ => Err(TreeError::EmptyLabel { offset: start }),
                };
            }
            if !self.seen.insert(name.clone()) {
                return Err(TreeError::DuplicateLabel {
                    label: name,
                    offset: start,
                });
            }
            let length = self.length()?;
            Ok(Clade::Leaf { name, length })
        }
    }

    fn has_open_paren_before(&self, pos: usize) -> bool {
        self.src[..pos].contains(&b'(')
    }

    fn label(&mut self) -> Result<String, TreeError> {
        if self.peek() == Some(b'\'') {
            let start = self.pos;
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(TreeError::UnterminatedQuote { offset: start }),
                    Some(b'\'') => {
                        if self.src.get(self.pos + 1) == Some(&b'\'') {
                            out.push(b'\'');
                            self.pos += 2;
                        } else {
                            self.pos += 1;
                            break;
                        }
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            self.skip_ws();
            return Ok(String::from_utf8_lossy(&out).into_owned());
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || b"(),:;[".contains(&c) {
                break;
            }
            self.pos += 1;
        }
        let raw = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.skip_ws();
        Ok(raw)
    }

    fn length(&mut self) -> Result<Option<f64>, TreeError> {
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let v: f64 = text
            .parse()
            .map_err(|_| TreeError::BadLength { offset: start })?;
        self.skip_ws();
        Ok(Some(v))
    }
}

/// A finite empirical distribution over trees sharing one leaf indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSet {
    trees: Vec<PhyloTree>,
    weights: Vec<f64>,
}

impl TreeSet {
    pub fn single(tree: PhyloTree) -> Self {
        TreeSet {
            trees: vec![tree],
            weights: vec![1.0],
        }
    }

    /// Uniformly weighted set; all trees are re-indexed to the first tree's leaf order.
    pub fn uniform(trees: Vec<PhyloTree>) -> Result<Self, TreeError> {
        let n = trees.len();
        Self::new(trees, vec![1.0 / n as f64; n])
    }

    pub fn new(trees: Vec<PhyloTree>, weights: Vec<f64>) -> Result<Self, TreeError> {
        if trees.is_empty() {
            return Err(TreeError::EmptySet);
        }
        let total: f64 = weights.iter().sum();
        if weights.len() != trees.len() || weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(TreeError::BadWeights);
        }
        let order = trees[0].leaf_labels().to_vec();
        let mut out = Vec::with_capacity(trees.len());
        for (i, t) in trees.iter().enumerate() {
            check_same_leaves(&order, t, i + 1)?;
            out.push(t.with_leaf_order(&order)?);
        }
        Ok(TreeSet {
            trees: out,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[PhyloTree] {
        &self.trees
    }

    pub fn tree(&self, i: usize) -> &PhyloTree {
        &self.trees[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn leaf_labels(&self) -> &[String] {
        self.trees[0].leaf_labels()
    }

    /// Same trees re-indexed so that `order[k]` is leaf `k` in every tree.
    pub fn with_leaf_order(&self, order: &[String]) -> Result<Self, TreeError> {
        Ok(TreeSet {
            trees: self
                .trees
                .iter()
                .map(|t| t.with_leaf_order(order))
                .collect::<Result<_, _>>()?,
            weights: self.weights.clone(),
        })
    }
}

fn check_same_leaves(order: &[String], tree: &PhyloTree, line: usize) -> Result<(), TreeError> {
    let reference: HashSet<&str> = order.iter().map(String::as_str).collect();
    let other: HashSet<&str> = tree.leaf_labels().iter().map(String::as_str).collect();
    if let Some(s) = other.difference(&reference).min() {
        return Err(TreeError::LeafSetMismatch {
            line,
            species: s.to_string(),
        });
    }
    if let Some(s) = reference.difference(&other).min() {
        return Err(TreeError::LeafSetMismatch {
            line,
            species: s.to_string(),
        });
    }
    Ok(())
}

/// Parses one Newick tree per non-empty line into a uniformly weighted set.
pub fn parse_tree_set(text: &str) -> Result<TreeSet, TreeError> {
    let mut trees = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_newick(line).map_err(|e| TreeError::AtLine {
            line: i + 1,
            source: Box::new(e),
        })?;
        trees.push(t);
        lines.push(i + 1);
    }
    if trees.is_empty() {
        return Err(TreeError::EmptySet);
    }
    let order = trees[0].leaf_labels().to_vec();
    for (t, &line) in trees.iter().zip(&lines) {
        check_same_leaves(&order, t, line)?;
    }
    TreeSet::uniform(trees)
}
