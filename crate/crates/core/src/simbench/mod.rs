//! Synthetic benchmark: generators, baseline clusterers, ARI scoring and the
//! replicate grid runner.

pub mod ari;
pub mod generate;
pub mod hclust;

use rayon::prelude::*;
use thiserror::Error;

pub use ari::adjusted_rand_index;
pub use generate::{
    nni_perturb, perturbed_tree_set, random_tree, simulate_profile, simulate_tree_based, simulate_tree_independent, LabeledDataset,
    Regime, SimConfig,
};
pub use hclust::{dendrogram, hierarchical_cluster, Merge, Metric};

use crate::dpm::{gibbs_partition, map_assignment, DpmError, EcmAssignment, SamplerConfig};
use crate::preprocess::{estimate_null, NullModel, PreprocessConfig, PreprocessError};
use crate::profiles::{ProfileError, ProfileMatrix};
use crate::rng::{derive_seed, stream};
use crate::tree::{PhyloTree, TreeError, TreeSet};
use crate::treeuncertainty::{gibbs_partition_11, map_assignment_11};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error("need {needed} loss branches but only {available} are available")]
    TreeTooSmall { needed: usize, available: usize },
    #[error("no clade has at least {0} leaves and room for the loss branches")]
    NoGainClade(usize),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Dpm(#[from] DpmError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Clime10,
    Clime11,
    HcHamming,
    HcAnticorr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Clime10, Method::Clime11, Method::HcHamming, Method::HcAnticorr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Clime10 => "clime10",
            Method::Clime11 => "clime11",
            Method::HcHamming => "hc_hamming",
            Method::HcAnticorr => "hc_anticorr",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SimError::UnknownMethod(s.to_string()))
    }
}

/// Background model and gain nodes, then the partition chain and its MAP,
/// all on one tree.
pub fn fit_single_tree(
    matrix: &ProfileMatrix,
    tree: &PhyloTree,
    pre: &PreprocessConfig<f64>,
    cfg: &SamplerConfig<f64>,
) -> Result<(NullModel<f64>, EcmAssignment<f64>), SimError> {
    let null = estimate_null(matrix, tree, pre)?;
    let trace = gibbs_partition(matrix, tree, &null.lambdas, cfg)?;
    let a = map_assignment(&trace, matrix, tree, &null.lambdas, cfg)?;
    Ok((null, a))
}

/// Per-tree background models, then the tree-sampling chain and its MAP.
pub fn fit_tree_set(
    matrix: &ProfileMatrix,
    trees: &TreeSet,
    pre: &PreprocessConfig<f64>,
    cfg: &SamplerConfig<f64>,
) -> Result<(Vec<NullModel<f64>>, EcmAssignment<f64>), SimError> {
    let nulls = trees
        .trees()
        .iter()
        .map(|t| estimate_null(matrix, t, pre))
        .collect::<Result<Vec<_>, _>>()?;
    let lambdas: Vec<Vec<usize>> = nulls.iter().map(|n| n.lambdas.clone()).collect();
    let trace = gibbs_partition_11(matrix, trees, &lambdas, cfg)?;
    let a = map_assignment_11(&trace, matrix, trees, &lambdas, cfg)?;
    Ok((nulls, a))
}

/// Labels a method assigns to a dataset. Single-tree methods see only the
/// first tree of `trees`.
pub fn cluster_with(
    method: Method,
    data: &LabeledDataset,
    trees: &TreeSet,
    pre: &PreprocessConfig<f64>,
    cfg: &SamplerConfig<f64>,
    singleton_fraction: f64,
) -> Result<Vec<usize>, SimError> {
    Ok(match method {
        Method::Clime10 => fit_single_tree(&data.matrix, trees.tree(0), pre, cfg)?.1.labels,
        Method::Clime11 => fit_tree_set(&data.matrix, trees, pre, cfg)?.1.labels,
        Method::HcHamming => hierarchical_cluster(&data.matrix, Metric::Hamming, singleton_fraction),
        Method::HcAnticorr => hierarchical_cluster(&data.matrix, Metric::Anticorrelation, singleton_fraction),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub leaves: usize,
    /// Trees in the candidate set; data come from a random member, and
    /// single-tree methods get the first.
    pub tree_set_size: usize,
    pub nni_moves: usize,
    pub singleton_fraction: f64,
    pub preprocess: PreprocessConfig<f64>,
    pub sampler: SamplerConfig<f64>,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            leaves: 64,
            tree_set_size: 1,
            nni_moves: 8,
            singleton_fraction: 0.1,
            preprocess: PreprocessConfig::default(),
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub cell: usize,
    pub config: SimConfig,
    pub method: Method,
    pub replicate: usize,
    pub tree_index: usize,
    pub ari: f64,
}

/// The dataset and tree set of one replicate; a pure function of the
/// settings' seed, the cell index and the replicate index.
pub fn replicate_data(
    cell: usize,
    cfg: &SimConfig,
    replicate: usize,
    settings: &BenchSettings,
) -> Result<(TreeSet, LabeledDataset), SimError> {
    let mut rng = stream(settings.seed, &format!("bench/{cell}"), replicate as u64);
    let base = random_tree(settings.leaves, &mut rng)?;
    let trees = perturbed_tree_set(&base, settings.tree_set_size, settings.nni_moves, &mut rng)?;
    let data = match cfg.regime {
        Regime::TreeBased => simulate_tree_based(&trees, cfg, &mut rng)?,
        Regime::TreeIndependent => simulate_tree_independent(trees.tree(0), cfg, &mut rng)?,
    };
    Ok((trees, data))
}

/// Every (cell, replicate, method) combination; replicates run in parallel
/// and rows come back in (cell, replicate, method) order.
pub fn run_benchmark(
    cells: &[SimConfig],
    methods: &[Method],
    replicates: usize,
    settings: &BenchSettings,
) -> Result<Vec<BenchRow>, SimError> {
    for c in cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..replicates).map(move |r| (c, r)))
        .collect();
    let out: Vec<Result<Vec<BenchRow>, SimError>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (trees, data) = replicate_data(c, &cells[c], r, settings)?;
            let mut sampler = settings.sampler.clone();
            sampler.seed = derive_seed(settings.seed, &format!("bench/fit/{c}"), r as u64);
            let mut pre = settings.preprocess.clone();
            pre.seed = sampler.seed;
            methods
                .iter()
                .map(|&m| {
                    let labels = cluster_with(m, &data, &trees, &pre, &sampler, settings.singleton_fraction)?;
                    Ok(BenchRow {
                        cell: c,
                        config: cells[c].clone(),
                        method: m,
                        replicate: r,
                        tree_index: data.tree_index,
                        ari: adjusted_rand_index(&labels, &data.labels)?,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in out {
        rows.extend(r?);
    }
    Ok(rows)
}

pub const RESULTS_HEADER: &str =
    "cell\tregime\tecm_count\tgenes_per_ecm\tloss_branches\tloss_prob\tsingletons\tq_sim\tmethod\treplicate\ttree_index\tari";

pub fn results_tsv(rows: &[BenchRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let c = &r.config;
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\n",
            r.cell,
            c.regime.name(),
            c.ecm_count,
            c.genes_per_ecm,
            c.loss_branches,
            c.loss_prob,
            c.singletons,
            c.q_sim,
            r.method.name(),
            r.replicate,
            r.tree_index,
            r.ari
        ));
    }
    s
}

/// Mean ARI per (cell, method), sorted by cell then method.
pub fn mean_ari(rows: &[BenchRow]) -> Vec<(usize, Method, f64)> {
    let mut acc: std::collections::BTreeMap<(usize, Method), (f64, usize)> = Default::default();
    for r in rows {
        let e = acc.entry((r.cell, r.method)).or_insert((0.0, 0));
        e.0 += r.ari;
        e.1 += 1;
    }
    acc.into_iter().map(|((c, m), (s, n))| (c, m, s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("kmeans").is_err());
    }

    #[test]
    fn zero_replicates_give_no_rows() {
        let rows = run_benchmark(&[SimConfig::default()], &Method::ALL, 0, &BenchSettings::default()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(results_tsv(&rows).lines().count(), 1);
    }

    #[test]
    fn hamming_baseline_rows_are_reproducible() {
        let settings = BenchSettings {
            leaves: 24,
            ..BenchSettings::default()
        };
        let cells = [SimConfig {
            loss_branches: 4,
            min_gain_leaves: 8,
            ..SimConfig::default()
        }];
        let a = run_benchmark(&cells, &[Method::HcHamming, Method::HcAnticorr], 2, &settings).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, run_benchmark(&cells, &[Method::HcHamming, Method::HcAnticorr], 2, &settings).unwrap());
        assert!(a.iter().all(|r| r.ari <= 1.0));
    }
}
