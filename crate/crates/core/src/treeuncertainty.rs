//! Partition and expansion integrated over a finite, weighted set of trees.
//!
//! Gain nodes are tree-specific, so every entry point takes one gain-node
//! vector per tree (`lambdas[tree][gene]`).

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::dpm::{
    assignment_from, crp_log_prior, ecm_score, ecm_score_impl, fingerprint, groups, modules_log_marginal,
    score_modules, validate_partition_inputs, ChainTrace, DpmError, EcmAssignment, GibbsState, SamplerConfig,
    ScoreCache,
};
use crate::expansion::{build_report, ExpansionError, ExpansionReport, NO_SIGNAL};
use crate::preprocess::NullModel;
use crate::profiles::ProfileMatrix;
use crate::rng::{sample_categorical, stream, StreamRng};
use crate::scalar::{log_sum_exp, Real};
use crate::tree::{NodeId, PhyloTree, TreeSet};
use crate::treehmm::{marginal_with, BackwardTable, ErrorRate, HiddenHistory, HmmError, LossParams};

fn check_tree_inputs<F: Real>(
    matrix: &ProfileMatrix,
    trees: &TreeSet,
    lambdas: &[Vec<NodeId>],
    cfg: &SamplerConfig<F>,
) -> Result<(), DpmError> {
    if lambdas.len() != trees.len() {
        return Err(DpmError::TreeCount {
            expected: trees.len(),
            got: lambdas.len(),
        });
    }
    for (t, l) in trees.trees().iter().zip(lambdas) {
        validate_partition_inputs(matrix, t, l, cfg)?;
    }
    Ok(())
}

fn ln_weights<F: Real>(trees: &TreeSet) -> Vec<F> {
    trees.weights().iter().map(|&w| F::of(w).ln()).collect()
}

/// Tree-step state: the current tree and, per tree, module scores keyed by
/// the exact member set they were computed for.
#[derive(Debug, Clone)]
pub struct TreeAveragedState<F: Real> {
    current: usize,
    lambdas: Vec<Vec<NodeId>>,
    caches: Vec<ScoreCache<F>>,
}

impl<F: Real> TreeAveragedState<F> {
    pub fn new(trees: &TreeSet, lambdas: Vec<Vec<NodeId>>, start: usize) -> Self {
        TreeAveragedState {
            current: start,
            lambdas,
            caches: vec![ScoreCache::new(); trees.len()],
        }
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn lambdas(&self, tree: usize) -> &[NodeId] {
        &self.lambdas[tree]
    }

    fn fill(
        &mut self,
        matrix: &ProfileMatrix,
        trees: &TreeSet,
        labels: &[u32],
        cfg: &SamplerConfig<F>,
    ) -> Result<(), DpmError> {
        let keys: Vec<Vec<usize>> = groups(labels).iter().map(|g| fingerprint(matrix, g)).collect();
        let mut todo = Vec::new();
        for (t, cache) in self.caches.iter().enumerate() {
            for k in &keys {
                if !cache.contains_key(k) {
                    todo.push((t, k.clone()));
                }
            }
        }
        let lambdas = &self.lambdas;
        let scored: Vec<_> = todo
            .par_iter()
            .map(|(t, k)| ecm_score(matrix, k, trees.tree(*t), &lambdas[*t], cfg, cfg.tree_chib_samples))
            .collect();
        for ((t, k), s) in todo.into_iter().zip(scored) {
            self.caches[t].insert(k, s?);
        }
        Ok(())
    }

    /// Normalized `ln P(T_i | X, I)` under the tree prior weights.
    pub fn tree_log_posterior(
        &mut self,
        matrix: &ProfileMatrix,
        trees: &TreeSet,
        labels: &[u32],
        cfg: &SamplerConfig<F>,
    ) -> Result<Vec<F>, DpmError> {
        self.fill(matrix, trees, labels, cfg)?;
        let lw: Vec<F> = ln_weights::<F>(trees)
            .into_iter()
            .zip(&self.caches)
            .map(|(w, c)| w + modules_log_marginal(matrix, labels, c))
            .collect();
        let z = log_sum_exp(&lw);
        if !z.is_finite() {
            return Err(DpmError::NonFinite("tree posterior"));
        }
        Ok(lw.into_iter().map(|v| v - z).collect())
    }

    /// Draws the tree given the partition and makes it current.
    pub fn sample_tree<R: Rng + ?Sized>(
        &mut self,
        matrix: &ProfileMatrix,
        trees: &TreeSet,
        labels: &[u32],
        cfg: &SamplerConfig<F>,
        rng: &mut R,
    ) -> Result<usize, DpmError> {
        let post = self.tree_log_posterior(matrix, trees, labels, cfg)?;
        let p: Vec<F> = post.iter().map(|v| v.exp()).collect();
        self.current = sample_categorical(&p, rng);
        Ok(self.current)
    }

    /// Histories of every gene drawn by the conditioned chains of the
    /// current tree.
    fn histories(&self, matrix: &ProfileMatrix, labels: &[u32]) -> Vec<HiddenHistory> {
        let mut out = vec![
            HiddenHistory {
                states: Vec::new(),
                gain: 0,
            };
            labels.len()
        ];
        let cache = &self.caches[self.current];
        for g in groups(labels) {
            let key = fingerprint(matrix, &g);
            for (h, &i) in cache[&key].histories.iter().zip(&key) {
                out[i] = h.clone();
            }
        }
        out
    }
}

fn start_tree(trees: &TreeSet) -> usize {
    let w = trees.weights();
    let mut best = 0;
    for i in 1..w.len() {
        if w[i] > w[best] {
            best = i;
        }
    }
    best
}

/// Partition chain that also samples the tree. With a single tree the trace
/// equals [`crate::dpm::gibbs_partition`]'s.
pub fn gibbs_partition_11<F: Real>(
    matrix: &ProfileMatrix,
    trees: &TreeSet,
    lambdas: &[Vec<NodeId>],
    cfg: &SamplerConfig<F>,
) -> Result<ChainTrace<F>, DpmError> {
    check_tree_inputs(matrix, trees, lambdas, cfg)?;
    let start = start_tree(trees);
    let mut state = GibbsState::new(matrix, trees.tree(start), &lambdas[start], cfg);
    let mut tstate = TreeAveragedState::new(trees, lambdas.to_vec(), start);
    let mut rng: StreamRng = stream(cfg.seed, "trees", 0);
    let mut trace = ChainTrace {
        gene_ids: matrix.gene_ids().to_vec(),
        labels: Vec::with_capacity(cfg.iterations),
        log_joint: Vec::with_capacity(cfg.iterations),
        trees: Vec::with_capacity(cfg.iterations),
        burn_in: cfg.burn_in_sweeps(),
    };
    for _ in 0..cfg.iterations {
        let cur = tstate.current();
        state.sweep(matrix, trees.tree(cur), &lambdas[cur], cfg);
        let snap = state.snapshot();
        if trees.len() > 1 {
            let next = tstate.sample_tree(matrix, trees, &snap, cfg, &mut rng)?;
            if next != cur {
                let h = tstate.histories(matrix, &snap);
                state.set_tree(matrix, trees.tree(next), &lambdas[next], cfg.q, h);
            }
        }
        let cur = tstate.current();
        trace.log_joint.push(state.log_joint(matrix, trees.tree(cur), cfg));
        trace.labels.push(snap);
        trace.trees.push(cur);
    }
    Ok(trace)
}

/// Fraction of retained sweeps spent on each tree.
pub fn tree_frequencies<F: Real>(trace: &ChainTrace<F>, n_trees: usize) -> Vec<F> {
    let mut counts = vec![0usize; n_trees];
    let r = trace.retained();
    for &t in &trace.trees[r.clone()] {
        counts[t] += 1;
    }
    let n = F::of(r.len().max(1) as f64);
    counts.into_iter().map(|c| F::of(c as f64) / n).collect()
}

/// MAP partition under `ln P(I) + ln sum_i w_i P(X | I, T_i)`. Module
/// summaries refer to the tree with the largest posterior weight under the
/// selected partition.
pub fn map_assignment_11<F: Real>(
    trace: &ChainTrace<F>,
    matrix: &ProfileMatrix,
    trees: &TreeSet,
    lambdas: &[Vec<NodeId>],
    cfg: &SamplerConfig<F>,
) -> Result<EcmAssignment<F>, DpmError> {
    check_tree_inputs(matrix, trees, lambdas, cfg)?;
    let range = trace.retained();
    if range.is_empty() {
        return Err(DpmError::EmptyTrace);
    }
    let snaps: Vec<&[u32]> = trace.labels[range.clone()].iter().map(|v| v.as_slice()).collect();
    let mut distinct = HashSet::new();
    let unique: Vec<&[u32]> = snaps.iter().copied().filter(|s| distinct.insert(*s)).collect();
    let mut caches = vec![ScoreCache::new(); trees.len()];
    for (t, cache) in caches.iter_mut().enumerate() {
        score_modules(matrix, &unique, trees.tree(t), &lambdas[t], cfg, cfg.chib_samples, cache)?;
    }
    let lw: Vec<F> = ln_weights(trees);
    let per_tree = |labels: &[u32]| -> Vec<F> {
        caches
            .iter()
            .zip(&lw)
            .map(|(c, &w)| w + modules_log_marginal(matrix, labels, c))
            .collect()
    };
    let mut best: Option<(usize, F)> = None;
    let mut last: Option<(&[u32], F)> = None;
    for (it, labels) in range.zip(&snaps) {
        let score = match last {
            Some((prev, s)) if prev == *labels => s,
            _ => {
                let l: Vec<usize> = labels.iter().map(|&v| v as usize).collect();
                crp_log_prior(&l, cfg.alpha) + log_sum_exp(&per_tree(labels))
            }
        };
        last = Some((labels, score));
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((it, score));
        }
    }
    let (it, score) = best.expect("non-empty");
    let labels = &trace.labels[it];
    let pt = per_tree(labels);
    let mut tree = 0;
    for t in 1..pt.len() {
        if pt[t] > pt[tree] {
            tree = t;
        }
    }
    assignment_from(matrix, labels, &caches[tree], score, it, tree)
}

/// Per-tree material for tree-averaged expansion of a fixed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePredictive<F> {
    /// Normalized `ln w_i + ln P(X | T_i, I)`.
    pub log_tree_weights: Vec<F>,
    /// `theta_draws[tree][module][draw]`: posterior-mean loss vectors along
    /// each module's conditioned chain.
    pub theta_draws: Vec<Vec<Vec<Vec<F>>>>,
}

/// Runs every module's conditioned chain under every tree, keeping the draws.
/// Uses the same RNG streams as MAP scoring, so the tree weights reproduce
/// the MAP scores exactly.
pub fn tree_predictive<F: Real>(
    matrix: &ProfileMatrix,
    assignment: &EcmAssignment<F>,
    trees: &TreeSet,
    lambdas: &[Vec<NodeId>],
    cfg: &SamplerConfig<F>,
) -> Result<TreePredictive<F>, DpmError> {
    check_tree_inputs(matrix, trees, lambdas, cfg)?;
    let index: Vec<usize> = assignment
        .gene_ids
        .iter()
        .map(|g| matrix.gene_index(g).ok_or(DpmError::NoSuchEcm(0)))
        .collect::<Result<_, _>>()?;
    let keys: Vec<Vec<usize>> = (0..assignment.k())
        .map(|k| {
            let m: Vec<usize> = assignment.members(k).into_iter().map(|j| index[j]).collect();
            fingerprint(matrix, &m)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..trees.len()).flat_map(|t| (0..keys.len()).map(move |k| (t, k))).collect();
    let scored: Vec<_> = jobs
        .par_iter()
        .map(|&(t, k)| ecm_score_impl(matrix, &keys[k], trees.tree(t), &lambdas[t], cfg, cfg.chib_samples, true))
        .collect();
    let mut draws = vec![Vec::with_capacity(keys.len()); trees.len()];
    let mut lw: Vec<F> = ln_weights(trees);
    for (&(t, k), s) in jobs.iter().zip(scored) {
        let s = s?;
        debug_assert_eq!(draws[t].len(), k);
        lw[t] = lw[t] + s.log_marginal;
        draws[t].push(s.theta_draws);
    }
    let z = log_sum_exp(&lw);
    if !z.is_finite() {
        return Err(DpmError::NonFinite("tree weights"));
    }
    Ok(TreePredictive {
        log_tree_weights: lw.into_iter().map(|v| v - z).collect(),
        theta_draws: draws,
    })
}

fn log_predictive<F: Real>(
    table: &mut BackwardTable<F>,
    tree: &PhyloTree,
    x: &[u8],
    draws: &[Vec<F>],
    lambda: NodeId,
    q: ErrorRate<F>,
) -> F {
    let v: Vec<F> = draws.iter().map(|th| marginal_with(table, tree, x, th, lambda, q)).collect();
    log_sum_exp(&v) - F::of(draws.len() as f64).ln()
}

/// Tree-averaged LLR of one profile for module `k`. `lambdas[i]` and
/// `theta0[i]` are the gene's gain node and the background losses under
/// tree `i`.
pub fn llr_11<F: Real>(
    x: &[u8],
    k: usize,
    model: &TreePredictive<F>,
    theta0: &[LossParams<F>],
    lambdas: &[NodeId],
    trees: &TreeSet,
    q: ErrorRate<F>,
) -> Result<F, HmmError> {
    let mut table = BackwardTable::new(trees.tree(0));
    llr_11_with(&mut table, x, k, model, theta0, lambdas, trees, q)
}

#[allow(clippy::too_many_arguments)]
fn llr_11_with<F: Real>(
    table: &mut BackwardTable<F>,
    x: &[u8],
    k: usize,
    model: &TreePredictive<F>,
    theta0: &[LossParams<F>],
    lambdas: &[NodeId],
    trees: &TreeSet,
    q: ErrorRate<F>,
) -> Result<F, HmmError> {
    let n = trees.len();
    if model.log_tree_weights.len() != n || theta0.len() != n || lambdas.len() != n {
        return Err(HmmError::SizeMismatch {
            expected: n,
            got: model.log_tree_weights.len().min(theta0.len()).min(lambdas.len()),
        });
    }
    if x.len() != trees.tree(0).leaf_count() {
        return Err(HmmError::SizeMismatch {
            expected: trees.tree(0).leaf_count(),
            got: x.len(),
        });
    }
    let mut num = Vec::with_capacity(n);
    let mut den = Vec::with_capacity(n);
    for (t, tree) in trees.trees().iter().enumerate() {
        if lambdas[t] >= tree.node_count() {
            return Err(HmmError::NodeOutOfRange(lambdas[t]));
        }
        let w = model.log_tree_weights[t];
        let draws = &model.theta_draws[t][k];
        num.push(w + log_predictive(table, tree, x, draws, lambdas[t], q));
        den.push(w + marginal_with(table, tree, x, theta0[t].as_slice(), lambdas[t], q));
    }
    Ok(log_sum_exp(&num) - log_sum_exp(&den))
}

/// Tree-averaged counterpart of [`crate::expansion::expand_ecm`]; `nulls[i]`
/// is the background model estimated under tree `i`.
pub fn expand_ecm_11<F: Real>(
    candidates: &ProfileMatrix,
    assignment: &EcmAssignment<F>,
    model: &TreePredictive<F>,
    nulls: &[NullModel<F>],
    trees: &TreeSet,
    q: ErrorRate<F>,
    threshold: F,
) -> Result<ExpansionReport<F>, ExpansionError> {
    let leaves = trees.tree(0).leaf_count();
    if candidates.n_species() != leaves {
        return Err(ExpansionError::SpeciesMismatch {
            expected: leaves,
            got: candidates.n_species(),
        });
    }
    if nulls.len() != trees.len() {
        return Err(HmmError::SizeMismatch {
            expected: trees.len(),
            got: nulls.len(),
        }
        .into());
    }
    let k = assignment.k();
    let theta0: Vec<LossParams<F>> = nulls.iter().map(|n| n.theta0.clone()).collect();
    let mut info = Vec::with_capacity(candidates.n_genes());
    for g in candidates.gene_ids() {
        let mut lams = Vec::with_capacity(nulls.len());
        let mut no_signal = false;
        for n in nulls {
            let i = n
                .gene_ids
                .iter()
                .position(|m| m == g)
                .ok_or_else(|| ExpansionError::UnknownGene(g.clone()))?;
            lams.push(n.lambdas[i]);
            no_signal |= n.no_signal[i];
        }
        let own = assignment.gene_ids.iter().position(|n| n == g).map(|j| assignment.labels[j]);
        info.push((lams, no_signal, own));
    }
    let llr: Vec<Result<Vec<Option<F>>, HmmError>> = (0..candidates.n_genes())
        .into_par_iter()
        .map_init(
            || BackwardTable::new(trees.tree(0)),
            |table, g| {
                let (lams, no_signal, own) = &info[g];
                if *no_signal {
                    return Ok(vec![None; k]);
                }
                (0..k)
                    .map(|e| {
                        if *own == Some(e) {
                            return Ok(None);
                        }
                        llr_11_with(table, candidates.row(g), e, model, &theta0, lams, trees, q).map(Some)
                    })
                    .collect()
            },
        )
        .collect();
    let llr = llr.into_iter().collect::<Result<Vec<_>, _>>()?;
    let skipped = (0..candidates.n_genes())
        .filter(|&g| info[g].1)
        .map(|g| (candidates.gene_ids()[g].clone(), NO_SIGNAL.to_string()))
        .collect();
    Ok(build_report(candidates.gene_ids(), llr, k, skipped, threshold))
}
