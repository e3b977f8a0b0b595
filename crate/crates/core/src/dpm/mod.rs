//! Partition of a gene set into modules: collapsed Gibbs sampling under a
//! Dirichlet-process prior, MAP extraction, module strengths and loss
//! estimates.

pub mod chib;
pub mod crp;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

pub use chib::{chib_log_marginal, chib_with_draws, ChibEstimate};
pub use crp::{crp_assignment_probs, crp_log_prior, crp_weights};

use crate::profiles::ProfileMatrix;
use crate::rng::{fnv1a, sample_categorical, stream, StreamRng};
use crate::scalar::{normalize_log_weights, Real};
use crate::tree::{NodeId, PhyloTree};
use crate::treehmm::{
    emission_loglik, marginal_with, BackwardTable, BetaCounts, BetaPrior, ErrorRate, HiddenHistory, HmmError,
    LossParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpmError {
    #[error("need at least one sweep")]
    NoSweeps,
    #[error("concentration must be positive, got {0}")]
    BadAlpha(f64),
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BadBurnIn(f64),
    #[error("need at least one Chib sample")]
    NoChibSamples,
    #[error("no genes to partition")]
    NoGenes,
    #[error("module has no genes")]
    EmptyEcm,
    #[error("trace has no retained sweeps")]
    EmptyTrace,
    #[error("expected {expected} gain nodes, got {got}")]
    LambdaCount { expected: usize, got: usize },
    #[error("gain node {0} is not a node of the tree")]
    BadLambda(NodeId),
    #[error("profile has {got} columns but the tree has {expected} leaves")]
    Width { expected: usize, got: usize },
    #[error("module {0} does not exist")]
    NoSuchEcm(usize),
    #[error("expected gain nodes for {expected} trees, got {got}")]
    TreeCount { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig<F> {
    pub alpha: F,
    pub prior: BetaPrior<F>,
    pub q: ErrorRate<F>,
    pub iterations: usize,
    /// Fraction of sweeps discarded before MAP search and summaries.
    pub burn_in: F,
    /// Retained draws per Chib estimate (and per loss estimate).
    pub chib_samples: usize,
    /// Discarded sweeps at the start of each conditioned chain.
    pub chib_burn_in: usize,
    /// Retained draws per Chib estimate inside the tree-sampling step.
    pub tree_chib_samples: usize,
    pub seed: u64,
}

impl<F: Real> Default for SamplerConfig<F> {
    fn default() -> Self {
        SamplerConfig {
            alpha: F::one(),
            prior: BetaPrior::default(),
            q: ErrorRate::new(F::of(0.01)).expect("valid default"),
            iterations: 1000,
            burn_in: F::of(0.2),
            chib_samples: 1000,
            chib_burn_in: 100,
            tree_chib_samples: 200,
            seed: 0,
        }
    }
}

impl<F: Real> SamplerConfig<F> {
    pub fn validate(&self) -> Result<(), DpmError> {
        if self.iterations == 0 {
            return Err(DpmError::NoSweeps);
        }
        if !(self.alpha > F::zero() && self.alpha.is_finite()) {
            return Err(DpmError::BadAlpha(self.alpha.to_f64_lossy()));
        }
        if !(self.burn_in >= F::zero() && self.burn_in < F::one()) {
            return Err(DpmError::BadBurnIn(self.burn_in.to_f64_lossy()));
        }
        if self.chib_samples == 0 || self.tree_chib_samples == 0 {
            return Err(DpmError::NoChibSamples);
        }
        Ok(())
    }

    pub fn burn_in_sweeps(&self) -> usize {
        let b = (self.burn_in * F::of(self.iterations as f64)).floor();
        b.to_usize().unwrap_or(0).min(self.iterations - 1)
    }
}

pub(crate) fn check_inputs<'a>(
    tree: &PhyloTree,
    rows: impl IntoIterator<Item = &'a [u8]>,
    lambdas: &[NodeId],
) -> Result<(), DpmError> {
    let mut n = 0;
    for r in rows {
        if r.len() != tree.leaf_count() {
            return Err(DpmError::Width {
                expected: tree.leaf_count(),
                got: r.len(),
            });
        }
        n += 1;
    }
    if lambdas.len() != n {
        return Err(DpmError::LambdaCount {
            expected: n,
            got: lambdas.len(),
        });
    }
    if let Some(&l) = lambdas.iter().find(|&&l| l >= tree.node_count()) {
        return Err(DpmError::BadLambda(l));
    }
    Ok(())
}

/// Per-sweep record of a partition chain. Labels are dense, numbered by
/// first appearance in gene-name order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<F> {
    pub gene_ids: Vec<String>,
    pub labels: Vec<Vec<u32>>,
    /// `ln P(I) + ln P(X, H | I)` with losses integrated out.
    pub log_joint: Vec<F>,
    /// Tree index in effect after each sweep.
    pub trees: Vec<usize>,
    pub burn_in: usize,
}

impl<F> ChainTrace<F> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn retained(&self) -> std::ops::Range<usize> {
        self.burn_in.min(self.len())..self.len()
    }
}

#[derive(Debug, Clone)]
struct Cluster<F> {
    size: usize,
    counts: BetaCounts<F>,
}

/// Mutable state of the partition chain on one tree at a time.
#[derive(Debug, Clone)]
pub(crate) struct GibbsState<F: Real> {
    pub(crate) order: Vec<usize>,
    rngs: Vec<StreamRng>,
    labels: Vec<usize>,
    clusters: Vec<Cluster<F>>,
    pub(crate) histories: Vec<HiddenHistory>,
    singleton: Vec<F>,
    tables: Vec<BackwardTable<F>>,
    log_w: Vec<F>,
    cand: Vec<usize>,
    prior: BetaPrior<F>,
}

impl<F: Real> GibbsState<F> {
    /// Every gene in its own module, histories drawn under the prior.
    pub(crate) fn new(matrix: &ProfileMatrix, tree: &PhyloTree, lambdas: &[NodeId], cfg: &SamplerConfig<F>) -> Self {
        let n = matrix.n_genes();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| matrix.gene_ids()[i].cmp(&matrix.gene_ids()[j]));
        let mut rngs: Vec<StreamRng> = matrix
            .gene_ids()
            .iter()
            .map(|g| stream(cfg.seed, "gibbs", fnv1a(g.as_bytes())))
            .collect();
        let empty = BetaCounts::empty(cfg.prior, tree.branch_count());
        let mut table = BackwardTable::new(tree);
        let mut labels = vec![0; n];
        let mut clusters = Vec::with_capacity(n);
        let mut histories = vec![
            HiddenHistory {
                states: Vec::new(),
                gain: 0,
            };
            n
        ];
        for (k, &i) in order.iter().enumerate() {
            table.compute(tree, matrix.row(i), lambdas[i], cfg.q, empty.means());
            let h = table.sample(tree, empty.means(), &mut rngs[i]);
            let mut counts = empty.clone();
            counts.add(tree, &h);
            clusters.push(Cluster { size: 1, counts });
            histories[i] = h;
            labels[i] = k;
        }
        let mut state = GibbsState {
            order,
            rngs,
            labels,
            clusters,
            histories,
            singleton: Vec::new(),
            tables: Vec::new(),
            log_w: Vec::new(),
            cand: Vec::new(),
            prior: cfg.prior,
        };
        state.cache_singletons(matrix, tree, lambdas, cfg.q);
        state
    }

    fn cache_singletons(&mut self, matrix: &ProfileMatrix, tree: &PhyloTree, lambdas: &[NodeId], q: ErrorRate<F>) {
        let empty = BetaCounts::empty(self.prior, tree.branch_count());
        let mut table = BackwardTable::new(tree);
        self.singleton = (0..matrix.n_genes())
            .map(|i| marginal_with(&mut table, tree, matrix.row(i), empty.means(), lambdas[i], q))
            .collect();
        self.tables.clear();
    }

    /// Switches to another tree, replacing every history.
    pub(crate) fn set_tree(
        &mut self,
        matrix: &ProfileMatrix,
        tree: &PhyloTree,
        lambdas: &[NodeId],
        q: ErrorRate<F>,
        histories: Vec<HiddenHistory>,
    ) {
        self.histories = histories;
        for c in &mut self.clusters {
            c.counts = BetaCounts::empty(self.prior, tree.branch_count());
        }
        for (i, h) in self.histories.iter().enumerate() {
            self.clusters[self.labels[i]].counts.add(tree, h);
        }
        self.cache_singletons(matrix, tree, lambdas, q);
    }

    fn ensure_tables(&mut self, tree: &PhyloTree, n: usize) {
        while self.tables.len() < n {
            self.tables.push(BackwardTable::new(tree));
        }
    }

    /// One sweep: every history given its module, then every label jointly
    /// with a fresh history under the chosen module.
    pub(crate) fn sweep(&mut self, matrix: &ProfileMatrix, tree: &PhyloTree, lambdas: &[NodeId], cfg: &SamplerConfig<F>) {
        self.ensure_tables(tree, 1);
        for idx in 0..self.order.len() {
            let i = self.order[idx];
            let c = &mut self.clusters[self.labels[i]];
            let h = &mut self.histories[i];
            c.counts.remove(tree, h);
            let table = &mut self.tables[0];
            table.compute(tree, matrix.row(i), lambdas[i], cfg.q, c.counts.means());
            table.sample_into(tree, c.counts.means(), &mut self.rngs[i], &mut h.states);
            c.counts.add(tree, h);
        }

        let alpha_ln = cfg.alpha.ln();
        for idx in 0..self.order.len() {
            let i = self.order[idx];
            let x = matrix.row(i);
            let old = self.labels[i];
            {
                let c = &mut self.clusters[old];
                c.counts.remove(tree, &self.histories[i]);
                c.size -= 1;
            }
            self.cand.clear();
            self.log_w.clear();
            let live = self.clusters.iter().filter(|c| c.size > 0).count();
            self.ensure_tables(tree, live + 1);
            for (k, c) in self.clusters.iter().enumerate() {
                if c.size == 0 {
                    continue;
                }
                let j = self.cand.len();
                let ll = marginal_with(&mut self.tables[j], tree, x, c.counts.means(), lambdas[i], cfg.q);
                self.log_w.push(F::of(c.size as f64).ln() + ll);
                self.cand.push(k);
            }
            self.log_w.push(alpha_ln + self.singleton[i]);
            let probs = normalize_log_weights(&self.log_w);
            let rng = &mut self.rngs[i];
            let j = sample_categorical(&probs, rng);
            let k = if j < self.cand.len() {
                self.cand[j]
            } else {
                let slot = match self.clusters.iter().position(|c| c.size == 0) {
                    Some(s) => s,
                    None => {
                        self.clusters.push(Cluster {
                            size: 0,
                            counts: BetaCounts::empty(self.prior, tree.branch_count()),
                        });
                        self.clusters.len() - 1
                    }
                };
                let means = self.clusters[slot].counts.means();
                self.tables[j].compute(tree, x, lambdas[i], cfg.q, means);
                slot
            };
            let c = &mut self.clusters[k];
            let h = &mut self.histories[i];
            self.tables[j].sample_into(tree, c.counts.means(), rng, &mut h.states);
            c.counts.add(tree, h);
            c.size += 1;
            self.labels[i] = k;
        }
        self.relabel();
    }

    /// Drops empty modules and renumbers by first appearance in scan order.
    fn relabel(&mut self) {
        let mut map = vec![usize::MAX; self.clusters.len()];
        let mut next = 0;
        for &i in &self.order {
            let l = self.labels[i];
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
        }
        let mut clusters: Vec<Option<Cluster<F>>> = vec![None; next];
        for (old, c) in self.clusters.drain(..).enumerate() {
            if map[old] != usize::MAX {
                clusters[map[old]] = Some(c);
            }
        }
        self.clusters = clusters.into_iter().map(|c| c.expect("dense")).collect();
        for l in &mut self.labels {
            *l = map[*l];
        }
        debug_assert!(self.clusters.iter().all(|c| c.size > 0));
    }

    pub(crate) fn snapshot(&self) -> Vec<u32> {
        self.labels.iter().map(|&l| l as u32).collect()
    }

    pub(crate) fn log_joint(&self, matrix: &ProfileMatrix, tree: &PhyloTree, cfg: &SamplerConfig<F>) -> F {
        let mut v = crp_log_prior(&self.labels, cfg.alpha);
        for (i, h) in self.histories.iter().enumerate() {
            v = v + emission_loglik(matrix.row(i), h.leaf_states(tree), cfg.q).unwrap_or(F::neg_infinity());
        }
        let base = F::ln_beta(cfg.prior.a, cfg.prior.b);
        for c in &self.clusters {
            for s in 0..tree.branch_count() {
                if c.counts.loss()[s] + c.counts.keep()[s] > 0 {
                    let (a, b) = c.counts.posterior(s);
                    v = v + F::ln_beta(a, b) - base;
                }
            }
        }
        v
    }
}

pub(crate) fn validate_partition_inputs<F: Real>(
    matrix: &ProfileMatrix,
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
) -> Result<(), DpmError> {
    cfg.validate()?;
    if matrix.n_genes() == 0 {
        return Err(DpmError::NoGenes);
    }
    check_inputs(tree, matrix.rows(), lambdas)
}

/// Runs the partition chain. `matrix` columns must follow the tree's leaf
/// order and `lambdas` gives each gene's gain node.
pub fn gibbs_partition<F: Real>(
    matrix: &ProfileMatrix,
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
) -> Result<ChainTrace<F>, DpmError> {
    validate_partition_inputs(matrix, tree, lambdas, cfg)?;
    let mut state = GibbsState::new(matrix, tree, lambdas, cfg);
    let mut trace = ChainTrace {
        gene_ids: matrix.gene_ids().to_vec(),
        labels: Vec::with_capacity(cfg.iterations),
        log_joint: Vec::with_capacity(cfg.iterations),
        trees: Vec::with_capacity(cfg.iterations),
        burn_in: cfg.burn_in_sweeps(),
    };
    for _ in 0..cfg.iterations {
        state.sweep(matrix, tree, lambdas, cfg);
        trace.labels.push(state.snapshot());
        trace.log_joint.push(state.log_joint(matrix, tree, cfg));
        trace.trees.push(0);
    }
    Ok(trace)
}

/// Score of one module under one tree.
#[derive(Debug, Clone)]
pub struct EcmScore<F> {
    /// Chib estimate, or the exact value for a single gene.
    pub log_marginal: F,
    pub strength: F,
    pub theta_hat: Vec<F>,
    pub histories: Vec<HiddenHistory>,
    pub theta_draws: Vec<Vec<F>>,
}

/// Members sorted by gene name; the key for caches and RNG streams.
pub(crate) fn fingerprint(matrix: &ProfileMatrix, members: &[usize]) -> Vec<usize> {
    let mut m = members.to_vec();
    m.sort_by(|&i, &j| matrix.gene_ids()[i].cmp(&matrix.gene_ids()[j]));
    m
}

pub(crate) fn fingerprint_seed(matrix: &ProfileMatrix, members: &[usize]) -> u64 {
    let mut bytes = Vec::new();
    for &i in members {
        bytes.extend_from_slice(matrix.gene_ids()[i].as_bytes());
        bytes.push(b'\t');
    }
    fnv1a(&bytes)
}

/// Chib estimate, strength and loss estimate for the module `members`
/// (sorted by name). The RNG stream is keyed by the member names only, so
/// the result does not depend on evaluation order and different trees see
/// common random numbers.
pub fn ecm_score<F: Real>(
    matrix: &ProfileMatrix,
    members: &[usize],
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
    samples: usize,
) -> Result<EcmScore<F>, DpmError> {
    ecm_score_impl(matrix, members, tree, lambdas, cfg, samples, false)
}

pub(crate) fn ecm_score_impl<F: Real>(
    matrix: &ProfileMatrix,
    members: &[usize],
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
    samples: usize,
    keep_draws: bool,
) -> Result<EcmScore<F>, DpmError> {
    if members.is_empty() {
        return Err(DpmError::EmptyEcm);
    }
    let rows: Vec<&[u8]> = members.iter().map(|&i| matrix.row(i)).collect();
    let lams: Vec<NodeId> = members.iter().map(|&i| lambdas[i]).collect();
    let mut rng = stream(cfg.seed, "chib", fingerprint_seed(matrix, members));
    let est = if keep_draws {
        chib_with_draws(tree, &rows, &lams, cfg.prior, cfg.q, samples, cfg.chib_burn_in, &mut rng)?
    } else {
        chib_log_marginal(tree, &rows, &lams, cfg.prior, cfg.q, samples, cfg.chib_burn_in, &mut rng)?
    };
    if members.len() == 1 {
        let empty = BetaCounts::empty(cfg.prior, tree.branch_count());
        let mut table = BackwardTable::new(tree);
        let exact = marginal_with(&mut table, tree, rows[0], empty.means(), lams[0], cfg.q);
        return Ok(EcmScore {
            log_marginal: exact,
            strength: F::zero(),
            theta_hat: est.theta_hat,
            histories: est.histories,
            theta_draws: est.theta_draws,
        });
    }
    let empty = BetaCounts::empty(cfg.prior, tree.branch_count());
    let mut table = BackwardTable::new(tree);
    let singles: F = rows
        .iter()
        .zip(&lams)
        .map(|(x, &l)| marginal_with(&mut table, tree, x, empty.means(), l, cfg.q))
        .sum();
    Ok(EcmScore {
        log_marginal: est.log_marginal,
        strength: (est.log_marginal - singles) / F::of(members.len() as f64),
        theta_hat: est.theta_hat,
        histories: est.histories,
        theta_draws: est.theta_draws,
    })
}

/// Per-gene normalized log Bayes factor of a shared loss vector against
/// independent ones; exactly zero for one gene.
pub fn ecm_strength<F: Real>(
    matrix: &ProfileMatrix,
    members: &[usize],
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
) -> Result<F, DpmError> {
    let m = fingerprint(matrix, members);
    Ok(ecm_score(matrix, &m, tree, lambdas, cfg, cfg.chib_samples)?.strength)
}

/// Rao-Blackwellized loss estimate for module `k` of `labels`.
pub fn point_theta<F: Real>(
    matrix: &ProfileMatrix,
    labels: &[usize],
    k: usize,
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
) -> Result<LossParams<F>, DpmError> {
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
    if members.is_empty() {
        return Err(DpmError::NoSuchEcm(k));
    }
    let m = fingerprint(matrix, &members);
    let s = ecm_score(matrix, &m, tree, lambdas, cfg, cfg.chib_samples)?;
    Ok(LossParams::new(s.theta_hat)?)
}

/// The selected partition with per-module summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmAssignment<F> {
    pub gene_ids: Vec<String>,
    /// Dense 0-based module per gene.
    pub labels: Vec<usize>,
    pub strengths: Vec<F>,
    pub theta_hat: Vec<LossParams<F>>,
    pub log_marginals: Vec<F>,
    /// Log posterior score of the partition, up to a constant.
    pub score: F,
    /// Sweep the partition was taken from.
    pub iteration: usize,
    /// Tree the summaries refer to.
    pub tree: usize,
}

impl<F> EcmAssignment<F> {
    pub fn k(&self) -> usize {
        self.strengths.len()
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == k).collect()
    }
}

pub(crate) fn groups(labels: &[u32]) -> Vec<Vec<usize>> {
    let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut g = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        g[l as usize].push(i);
    }
    g
}

pub(crate) type ScoreCache<F> = HashMap<Vec<usize>, EcmScore<F>>;

/// Fills `cache` with scores for every module of every retained snapshot.
pub(crate) fn score_modules<F: Real>(
    matrix: &ProfileMatrix,
    snapshots: &[&[u32]],
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
    samples: usize,
    cache: &mut ScoreCache<F>,
) -> Result<(), DpmError> {
    let mut seen = HashSet::new();
    let mut todo = Vec::new();
    for labels in snapshots {
        for g in groups(labels) {
            let key = fingerprint(matrix, &g);
            if !cache.contains_key(&key) && seen.insert(key.clone()) {
                todo.push(key);
            }
        }
    }
    let scored: Vec<Result<EcmScore<F>, DpmError>> = todo
        .par_iter()
        .map(|m| ecm_score(matrix, m, tree, lambdas, cfg, samples))
        .collect();
    for (key, s) in todo.into_iter().zip(scored) {
        cache.insert(key, s?);
    }
    Ok(())
}

pub(crate) fn assignment_from<F: Real>(
    matrix: &ProfileMatrix,
    labels: &[u32],
    cache: &ScoreCache<F>,
    score: F,
    iteration: usize,
    tree: usize,
) -> Result<EcmAssignment<F>, DpmError> {
    let mut out = EcmAssignment {
        gene_ids: matrix.gene_ids().to_vec(),
        labels: labels.iter().map(|&l| l as usize).collect(),
        strengths: Vec::new(),
        theta_hat: Vec::new(),
        log_marginals: Vec::new(),
        score,
        iteration,
        tree,
    };
    for g in groups(labels) {
        let s = &cache[&fingerprint(matrix, &g)];
        out.strengths.push(s.strength);
        out.theta_hat.push(LossParams::new(s.theta_hat.clone())?);
        out.log_marginals.push(s.log_marginal);
    }
    Ok(out)
}

/// MAP partition among retained snapshots under
/// `ln P(I) + sum_k ln P(X_k | I)`; ties go to the earliest sweep.
pub fn map_assignment<F: Real>(
    trace: &ChainTrace<F>,
    matrix: &ProfileMatrix,
    tree: &PhyloTree,
    lambdas: &[NodeId],
    cfg: &SamplerConfig<F>,
) -> Result<EcmAssignment<F>, DpmError> {
    validate_partition_inputs(matrix, tree, lambdas, cfg)?;
    let range = trace.retained();
    if range.is_empty() {
        return Err(DpmError::EmptyTrace);
    }
    let snaps: Vec<&[u32]> = trace.labels[range.clone()].iter().map(|v| v.as_slice()).collect();
    let mut cache = ScoreCache::new();
    score_modules(matrix, &snaps, tree, lambdas, cfg, cfg.chib_samples, &mut cache)?;
    let mut best: Option<(usize, F)> = None;
    let mut last: Option<(&[u32], F)> = None;
    for (it, labels) in range.zip(&snaps) {
        let score = match last {
            Some((prev, s)) if prev == *labels => s,
            _ => partition_score(matrix, labels, &cache, cfg.alpha),
        };
        last = Some((labels, score));
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((it, score));
        }
    }
    let (it, score) = best.expect("non-empty");
    assignment_from(matrix, &trace.labels[it], &cache, score, it, 0)
}

pub(crate) fn partition_score<F: Real>(matrix: &ProfileMatrix, labels: &[u32], cache: &ScoreCache<F>, alpha: F) -> F {
    let l: Vec<usize> = labels.iter().map(|&v| v as usize).collect();
    crp_log_prior(&l, alpha) + modules_log_marginal(matrix, labels, cache)
}

/// `sum_k ln P(X_k | I)`, summed in fingerprint order.
pub(crate) fn modules_log_marginal<F: Real>(matrix: &ProfileMatrix, labels: &[u32], cache: &ScoreCache<F>) -> F {
    let mut keys: Vec<Vec<usize>> = groups(labels).iter().map(|g| fingerprint(matrix, g)).collect();
    keys.sort();
    let mut s = F::zero();
    for k in &keys {
        s = s + cache[k].log_marginal;
    }
    s
}
