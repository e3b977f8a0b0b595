//! Random trees, perturbed tree sets and labelled synthetic profile matrices.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::SimError;
use crate::profiles::ProfileMatrix;
use crate::tree::{Clade, NodeId, PhyloTree, TreeSet};
use crate::treehmm::HiddenHistory;

/// Random rooted binary tree on `leaves` species named `S1..Sn`, built by
/// recursively splitting a shuffled species list at a uniform point.
pub fn random_tree<R: Rng + ?Sized>(leaves: usize, rng: &mut R) -> Result<PhyloTree, SimError> {
    if leaves < 2 {
        return Err(SimError::Config(format!("a tree needs at least 2 leaves, got {leaves}")));
    }
    let mut names: Vec<String> = (1..=leaves).map(|i| format!("S{i}")).collect();
    names.shuffle(rng);
    fn split<R: Rng + ?Sized>(names: &[String], rng: &mut R) -> Clade {
        if names.len() == 1 {
            return Clade::leaf(names[0].clone());
        }
        let k = rng.random_range(1..names.len());
        Clade::inner(vec![split(&names[..k], rng), split(&names[k..], rng)])
    }
    Ok(PhyloTree::from_clade(&split(&names, rng))?)
}

fn clade_from(children: &[Vec<NodeId>], names: &[String], node: NodeId) -> Clade {
    if children[node].is_empty() {
        Clade::leaf(names[node].clone())
    } else {
        Clade::inner(children[node].iter().map(|&c| clade_from(children, names, c)).collect())
    }
}

/// `moves` random nearest-neighbour interchanges on a binary tree; the result
/// keeps the input's leaf indexing.
pub fn nni_perturb<R: Rng + ?Sized>(tree: &PhyloTree, moves: usize, rng: &mut R) -> Result<PhyloTree, SimError> {
    let mut children: Vec<Vec<NodeId>> = (0..tree.node_count()).map(|v| tree.children(v).to_vec()).collect();
    let mut parent: Vec<Option<NodeId>> = (0..tree.node_count()).map(|v| tree.parent(v)).collect();
    let inner: Vec<NodeId> = (tree.leaf_count()..tree.node_count())
        .filter(|&v| v != tree.root())
        .collect();
    if inner.is_empty() {
        return Ok(tree.clone());
    }
    for _ in 0..moves {
        let u = *inner.choose(rng).expect("non-empty");
        let p = parent[u].expect("not the root");
        let Some(&c) = children[p].iter().find(|&&c| c != u) else {
            continue;
        };
        let a = *children[u].choose(rng).expect("inner node");
        for v in children[p].iter_mut() {
            if *v == c {
                *v = a;
            }
        }
        for v in children[u].iter_mut() {
            if *v == a {
                *v = c;
            }
        }
        parent[a] = Some(p);
        parent[c] = Some(u);
    }
    let names: Vec<String> = (0..tree.node_count())
        .map(|v| if v < tree.leaf_count() { tree.leaf_labels()[v].clone() } else { String::new() })
        .collect();
    let clade = clade_from(&children, &names, tree.root());
    Ok(PhyloTree::from_clade(&clade)?.with_leaf_order(tree.leaf_labels())?)
}

/// `base` followed by `size - 1` independent perturbations of it, uniformly
/// weighted.
pub fn perturbed_tree_set<R: Rng + ?Sized>(
    base: &PhyloTree,
    size: usize,
    moves: usize,
    rng: &mut R,
) -> Result<TreeSet, SimError> {
    let mut trees = vec![base.clone()];
    for _ in 1..size.max(1) {
        trees.push(nni_perturb(base, moves, rng)?);
    }
    Ok(TreeSet::uniform(trees)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    TreeBased,
    TreeIndependent,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::TreeBased => "tree_based",
            Regime::TreeIndependent => "tree_independent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tree_based" => Some(Regime::TreeBased),
            "tree_independent" => Some(Regime::TreeIndependent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub ecm_count: usize,
    pub genes_per_ecm: usize,
    /// Loss branches per module.
    pub loss_branches: usize,
    pub loss_prob: f64,
    pub singletons: usize,
    pub q_sim: f64,
    pub regime: Regime,
    /// Smallest gain clade, in leaves, for the tree-based regime.
    pub min_gain_leaves: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ecm_count: 5,
            genes_per_ecm: 10,
            loss_branches: 10,
            loss_prob: 0.9,
            singletons: 0,
            q_sim: 0.02,
            regime: Regime::TreeBased,
            min_gain_leaves: 32,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ecm_count == 0 || self.genes_per_ecm == 0 || self.loss_branches == 0 {
            return Err(SimError::Config(
                "module count, genes per module and loss branches must be positive".into(),
            ));
        }
        if !(self.loss_prob > 0.0 && self.loss_prob <= 1.0) {
            return Err(SimError::Config(format!("loss probability must lie in (0, 1], got {}", self.loss_prob)));
        }
        if !(0.0..0.5).contains(&self.q_sim) {
            return Err(SimError::Config(format!("observation error must lie in [0, 0.5), got {}", self.q_sim)));
        }
        Ok(())
    }

    pub fn gene_count(&self) -> usize {
        self.ecm_count * self.genes_per_ecm + self.singletons
    }
}

/// A synthetic matrix with its generating partition and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// Columns follow the leaf order of the generating tree.
    pub matrix: ProfileMatrix,
    /// True module per gene; singleton genes get labels after the modules.
    pub labels: Vec<usize>,
    pub tree_index: usize,
    pub gains: Vec<NodeId>,
    /// Loss probabilities per true module.
    pub thetas: Vec<Vec<f64>>,
    pub histories: Vec<HiddenHistory>,
}

/// Top-down history draw from `gain` under per-branch loss probabilities.
fn draw_history<R: Rng + ?Sized>(tree: &PhyloTree, gain: NodeId, theta: &[f64], rng: &mut R) -> HiddenHistory {
    let mut states = vec![false; tree.node_count()];
    states[gain] = true;
    for &s in tree.clade(gain).iter().rev() {
        if s == gain {
            continue;
        }
        let p = tree.parent(s).expect("below the gain node");
        states[s] = states[p] && !(theta[s] > 0.0 && rng.random_bool(theta[s]));
    }
    HiddenHistory { states, gain }
}

fn emit<R: Rng + ?Sized>(tree: &PhyloTree, h: &HiddenHistory, q: f64, rng: &mut R) -> Vec<u8> {
    h.leaf_states(tree)
        .iter()
        .map(|&present| {
            let flip = q > 0.0 && rng.random_bool(q);
            u8::from(present != flip)
        })
        .collect()
}

/// One gene: a history drawn top-down from `gain` and its noisy leaf row.
pub fn simulate_profile<R: Rng + ?Sized>(
    tree: &PhyloTree,
    gain: NodeId,
    theta: &[f64],
    q: f64,
    rng: &mut R,
) -> (HiddenHistory, Vec<u8>) {
    let h = draw_history(tree, gain, theta, rng);
    let x = emit(tree, &h, q, rng);
    (h, x)
}

struct ModuleSpec {
    gain: NodeId,
    theta: Vec<f64>,
    size: usize,
}

fn assemble<R: Rng + ?Sized>(
    tree: &PhyloTree,
    tree_index: usize,
    modules: Vec<ModuleSpec>,
    q: f64,
    rng: &mut R,
) -> Result<LabeledDataset, SimError> {
    let total: usize = modules.iter().map(|m| m.size).sum();
    let width = total.to_string().len().max(3);
    let mut names = Vec::with_capacity(total);
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut gains = Vec::with_capacity(total);
    let mut histories = Vec::with_capacity(total);
    let mut thetas = Vec::with_capacity(modules.len());
    for (k, m) in modules.into_iter().enumerate() {
        for _ in 0..m.size {
            let (h, x) = simulate_profile(tree, m.gain, &m.theta, q, rng);
            rows.push(x);
            names.push(format!("G{:0width$}", names.len() + 1));
            labels.push(k);
            gains.push(m.gain);
            histories.push(h);
        }
        thetas.push(m.theta);
    }
    Ok(LabeledDataset {
        matrix: ProfileMatrix::from_rows(names, tree.leaf_labels().to_vec(), rows)?,
        labels,
        tree_index,
        gains,
        thetas,
        histories,
    })
}

/// Modules with a random gain node (clade of at least `min_gain_leaves`
/// leaves) and `loss_branches` random loss branches below it, drawn on a
/// tree picked uniformly from `trees`.
pub fn simulate_tree_based<R: Rng + ?Sized>(
    trees: &TreeSet,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<LabeledDataset, SimError> {
    cfg.validate()?;
    let tree_index = rng.random_range(0..trees.len());
    let tree = trees.tree(tree_index);
    let eligible: Vec<NodeId> = (0..tree.node_count())
        .filter(|&v| tree.clade(v).len() > cfg.loss_branches && tree.clade_leaves(v).count() >= cfg.min_gain_leaves)
        .collect();
    if eligible.is_empty() {
        if tree.branch_count() < cfg.loss_branches {
            return Err(SimError::TreeTooSmall {
                needed: cfg.loss_branches,
                available: tree.branch_count(),
            });
        }
        return Err(SimError::NoGainClade(cfg.min_gain_leaves));
    }
    let n_modules = cfg.ecm_count + cfg.singletons;
    let mut modules = Vec::with_capacity(n_modules);
    for k in 0..n_modules {
        let gain = *eligible.choose(rng).expect("non-empty");
        let below: Vec<NodeId> = tree.clade(gain).iter().copied().filter(|&v| v != gain).collect();
        let mut theta = vec![0.0; tree.branch_count()];
        for &s in below.choose_multiple(rng, cfg.loss_branches) {
            theta[s] = cfg.loss_prob;
        }
        let size = if k < cfg.ecm_count { cfg.genes_per_ecm } else { 1 };
        modules.push(ModuleSpec { gain, theta, size });
    }
    assemble(tree, tree_index, modules, cfg.q_sim, rng)
}

/// Modules gained at the root whose losses fall on `loss_branches` random
/// leaves, ignoring the tree's internal structure.
pub fn simulate_tree_independent<R: Rng + ?Sized>(
    tree: &PhyloTree,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<LabeledDataset, SimError> {
    cfg.validate()?;
    let s = tree.leaf_count();
    if cfg.loss_branches > s {
        return Err(SimError::TreeTooSmall {
            needed: cfg.loss_branches,
            available: s,
        });
    }
    let leaves: Vec<NodeId> = (0..s).collect();
    let n_modules = cfg.ecm_count + cfg.singletons;
    let mut modules = Vec::with_capacity(n_modules);
    for k in 0..n_modules {
        let mut theta = vec![0.0; tree.branch_count()];
        for &v in leaves.choose_multiple(rng, cfg.loss_branches) {
            theta[v] = cfg.loss_prob;
        }
        assert!(theta[s..].iter().all(|&t| t == 0.0));
        let size = if k < cfg.ecm_count { cfg.genes_per_ecm } else { 1 };
        modules.push(ModuleSpec {
            gain: tree.root(),
            theta,
            size,
        });
    }
    assemble(tree, 0, modules, cfg.q_sim, rng)
}
