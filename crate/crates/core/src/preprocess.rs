//! Gain nodes for every gene and the genome-wide background loss vector.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::profiles::ProfileMatrix;
use crate::rng::{fnv1a, sample_categorical, stream, StreamRng};
use crate::scalar::{normalize_log_weights, Real};
use crate::tree::{NodeId, PhyloTree};
use crate::treehmm::{gain_logliks, BackwardTable, BetaCounts, BetaPrior, ErrorRate, HiddenHistory, HmmError, LossParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("no genes")]
    NoGenes,
    #[error("need at least one sweep")]
    NoSweeps,
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BadBurnIn(f64),
    #[error("profile has {got} columns but the tree has {expected} leaves")]
    Width { expected: usize, got: usize },
    #[error("invalid Beta parameters ({0}, {1})")]
    BetaDraw(f64, f64),
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig<F> {
    pub sweeps: usize,
    pub burn_in: F,
    pub prior: BetaPrior<F>,
    pub q: ErrorRate<F>,
    pub seed: u64,
}

impl<F: Real> Default for PreprocessConfig<F> {
    fn default() -> Self {
        PreprocessConfig {
            sweeps: 500,
            burn_in: F::of(0.2),
            prior: BetaPrior::default(),
            q: ErrorRate::new(F::of(0.01)).expect("valid default"),
            seed: 0,
        }
    }
}

impl<F: Real> PreprocessConfig<F> {
    fn burn_in_sweeps(&self) -> usize {
        (self.burn_in * F::of(self.sweeps as f64))
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.sweeps - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModel<F> {
    pub gene_ids: Vec<String>,
    pub theta0: LossParams<F>,
    pub lambdas: Vec<NodeId>,
    /// Posterior mass of the selected gain node.
    pub lambda_mass: Vec<F>,
    /// All-zero profiles: gain node fixed at the root, excluded from the chain.
    pub no_signal: Vec<bool>,
    /// Fraction of gain-node draws that moved, over all sweeps and genes.
    pub lambda_move_rate: F,
}

impl<F> NullModel<F> {
    pub fn lambda_of(&self, gene: &str) -> Option<NodeId> {
        self.gene_ids.iter().position(|g| g == gene).map(|i| self.lambdas[i])
    }
}

/// `P(lambda = s | x, theta0)` for every node under a uniform prior.
pub fn gain_posterior<F: Real>(
    x: &[u8],
    theta0: &LossParams<F>,
    q: ErrorRate<F>,
    tree: &PhyloTree,
) -> Result<Vec<F>, HmmError> {
    if x.len() != tree.leaf_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.leaf_count(),
            got: x.len(),
        });
    }
    if theta0.len() != tree.branch_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.branch_count(),
            got: theta0.len(),
        });
    }
    let mut table = BackwardTable::new(tree);
    Ok(normalize_log_weights(&gain_logliks(&mut table, tree, x, theta0.as_slice(), q)))
}

/// One draw from the conjugate conditional of the background loss vector.
pub fn draw_theta0<F: Real, R: Rng + ?Sized>(counts: &BetaCounts<F>, rng: &mut R) -> Result<LossParams<F>, PreprocessError> {
    let mut theta = Vec::with_capacity(counts.loss().len());
    for s in 0..counts.loss().len() {
        let (a, b) = counts.posterior(s);
        let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
        let d = Beta::new(a, b).map_err(|_| PreprocessError::BetaDraw(a, b))?;
        let v = d.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        theta.push(F::of(v));
    }
    Ok(LossParams::new(theta)?)
}

struct GeneChain {
    rng: StreamRng,
    lambda: NodeId,
    history: HiddenHistory,
    visits: Vec<u32>,
    moves: u64,
}

/// Joint chain over gain nodes, histories and the background loss vector.
pub fn estimate_null<F: Real>(
    matrix: &ProfileMatrix,
    tree: &PhyloTree,
    cfg: &PreprocessConfig<F>,
) -> Result<NullModel<F>, PreprocessError> {
    if matrix.n_genes() == 0 {
        return Err(PreprocessError::NoGenes);
    }
    if cfg.sweeps == 0 {
        return Err(PreprocessError::NoSweeps);
    }
    if !(cfg.burn_in >= F::zero() && cfg.burn_in < F::one()) {
        return Err(PreprocessError::BadBurnIn(cfg.burn_in.to_f64_lossy()));
    }
    if matrix.n_species() != tree.leaf_count() {
        return Err(PreprocessError::Width {
            expected: tree.leaf_count(),
            got: matrix.n_species(),
        });
    }
    let root = tree.root();
    let nb = tree.branch_count();
    let no_signal: Vec<bool> = matrix.rows().map(|r| r.iter().all(|&v| v == 0)).collect();
    let active: Vec<usize> = (0..matrix.n_genes()).filter(|&i| !no_signal[i]).collect();

    let mut chains: Vec<GeneChain> = active
        .iter()
        .map(|&i| GeneChain {
            rng: stream(cfg.seed, "null/gene", fnv1a(matrix.gene_ids()[i].as_bytes())),
            lambda: root,
            history: HiddenHistory::all_present(tree, root),
            visits: vec![0; tree.node_count()],
            moves: 0,
        })
        .collect();
    let mut theta_rng = stream(cfg.seed, "null/theta", 0);
    let mut theta0 = LossParams::new(vec![cfg.prior.mean(); nb])?;
    let burn = cfg.burn_in_sweeps();
    let mut theta_sum = vec![F::zero(); nb];

    for sweep in 0..cfg.sweeps {
        let keep = sweep >= burn;
        chains
            .par_iter_mut()
            .zip(active.par_iter())
            .for_each_init(
                || BackwardTable::new(tree),
                |table, (c, &i)| {
                    let lls = gain_logliks(table, tree, matrix.row(i), theta0.as_slice(), cfg.q);
                    let post = normalize_log_weights(&lls);
                    let lambda = sample_categorical(&post, &mut c.rng);
                    if lambda != c.lambda {
                        c.moves += 1;
                    }
                    c.lambda = lambda;
                    c.history = table.sample_at(tree, lambda, theta0.as_slice(), &mut c.rng);
                    if keep {
                        c.visits[lambda] += 1;
                    }
                },
            );
        let mut counts = BetaCounts::empty(cfg.prior, nb);
        for c in &chains {
            counts.add(tree, &c.history);
        }
        if keep {
            for (s, m) in counts.means().iter().enumerate() {
                theta_sum[s] = theta_sum[s] + *m;
            }
        }
        theta0 = draw_theta0(&counts, &mut theta_rng)?;
    }

    let retained = F::of((cfg.sweeps - burn) as f64);
    let theta_hat: Vec<F> = theta_sum.iter().map(|&v| v / retained).collect();
    let mut lambdas = vec![root; matrix.n_genes()];
    let mut lambda_mass = vec![F::one(); matrix.n_genes()];
    let mut moves = 0u64;
    for (c, &i) in chains.iter().zip(&active) {
        let mut best = 0;
        for s in 1..c.visits.len() {
            if c.visits[s] > c.visits[best] {
                best = s;
            }
        }
        lambdas[i] = best;
        lambda_mass[i] = F::of(f64::from(c.visits[best])) / retained;
        moves += c.moves;
    }
    let draws = (active.len() * cfg.sweeps).max(1);
    Ok(NullModel {
        gene_ids: matrix.gene_ids().to_vec(),
        theta0: LossParams::new(theta_hat)?,
        lambdas,
        lambda_mass,
        no_signal,
        lambda_move_rate: F::of(moves as f64 / draws as f64),
    })
}
