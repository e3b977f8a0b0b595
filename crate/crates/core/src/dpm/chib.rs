//! Marginal likelihood of one module by Chib's method, with Rao-Blackwellized
//! loss estimates taken from the same conditioned chain.

use rand::Rng;

use super::DpmError;
use crate::scalar::{log_sum_exp, Real};
use crate::tree::{NodeId, PhyloTree};
use crate::treehmm::{marginal_with, BackwardTable, BetaCounts, BetaPrior, ErrorRate, HiddenHistory};

pub const BOUNDARY_RETREAT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ChibEstimate<F> {
    pub log_marginal: F,
    /// Average over retained draws of the per-branch posterior means; the
    /// prior mean on branches no member's gain clade reaches.
    pub theta_hat: Vec<F>,
    /// Final histories of the conditioned chain, in row order.
    pub histories: Vec<HiddenHistory>,
    pub retreated: bool,
    /// Per retained draw, the posterior-mean loss vector; empty unless
    /// requested.
    pub theta_draws: Vec<Vec<F>>,
}

/// Gibbs over histories only, with the module's membership fixed.
struct ConditionedChain<'a, F: Real> {
    tree: &'a PhyloTree,
    rows: &'a [&'a [u8]],
    lambdas: &'a [NodeId],
    q: ErrorRate<F>,
    order: Vec<usize>,
    counts: BetaCounts<F>,
    table: BackwardTable<F>,
    histories: Vec<HiddenHistory>,
}

impl<'a, F: Real> ConditionedChain<'a, F> {
    fn start<R: Rng + ?Sized>(
        tree: &'a PhyloTree,
        rows: &'a [&'a [u8]],
        lambdas: &'a [NodeId],
        prior: BetaPrior<F>,
        q: ErrorRate<F>,
        rng: &mut R,
    ) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&i, &j| rows[i].cmp(rows[j]).then(lambdas[i].cmp(&lambdas[j])));
        let mut counts = BetaCounts::empty(prior, tree.branch_count());
        let mut table = BackwardTable::new(tree);
        let mut histories = vec![
            HiddenHistory {
                states: Vec::new(),
                gain: 0,
            };
            rows.len()
        ];
        for &i in &order {
            table.compute(tree, rows[i], lambdas[i], q, counts.means());
            let h = table.sample(tree, counts.means(), rng);
            counts.add(tree, &h);
            histories[i] = h;
        }
        ConditionedChain {
            tree,
            rows,
            lambdas,
            q,
            order,
            counts,
            table,
            histories,
        }
    }

    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for &i in &self.order {
            let h = &mut self.histories[i];
            self.counts.remove(self.tree, h);
            self.table
                .compute(self.tree, self.rows[i], self.lambdas[i], self.q, self.counts.means());
            self.table.sample_into(self.tree, self.counts.means(), rng, &mut h.states);
            self.counts.add(self.tree, h);
        }
    }
}

/// `ln Gamma(c + k)` for `k = 0..=n`.
fn ln_gamma_table<F: Real>(c: F, n: usize) -> Vec<F> {
    (0..=n).map(|k| (c + F::of(k as f64)).ln_gamma()).collect()
}

/// Chib estimate of `ln P(X_k | I)` for the rows of one module.
///
/// The estimate is invariant to the order of `rows`: the chain scans members
/// in a canonical order.
#[allow(clippy::too_many_arguments)]
pub fn chib_log_marginal<F: Real, R: Rng + ?Sized>(
    tree: &PhyloTree,
    rows: &[&[u8]],
    lambdas: &[NodeId],
    prior: BetaPrior<F>,
    q: ErrorRate<F>,
    samples: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<ChibEstimate<F>, DpmError> {
    chib_run(tree, rows, lambdas, prior, q, samples, burn_in, false, rng)
}

/// As [`chib_log_marginal`], also keeping the per-draw loss means.
#[allow(clippy::too_many_arguments)]
pub fn chib_with_draws<F: Real, R: Rng + ?Sized>(
    tree: &PhyloTree,
    rows: &[&[u8]],
    lambdas: &[NodeId],
    prior: BetaPrior<F>,
    q: ErrorRate<F>,
    samples: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<ChibEstimate<F>, DpmError> {
    chib_run(tree, rows, lambdas, prior, q, samples, burn_in, true, rng)
}

#[allow(clippy::too_many_arguments)]
fn chib_run<F: Real, R: Rng + ?Sized>(
    tree: &PhyloTree,
    rows: &[&[u8]],
    lambdas: &[NodeId],
    prior: BetaPrior<F>,
    q: ErrorRate<F>,
    samples: usize,
    burn_in: usize,
    keep: bool,
    rng: &mut R,
) -> Result<ChibEstimate<F>, DpmError> {
    if rows.is_empty() {
        return Err(DpmError::EmptyEcm);
    }
    if samples == 0 {
        return Err(DpmError::NoChibSamples);
    }
    super::check_inputs(tree, rows.iter().copied(), lambdas)?;
    let n = rows.len();
    let nb = tree.branch_count();

    let mut relevant = vec![false; nb];
    for &l in lambdas {
        for &s in tree.clade(l) {
            if s != l {
                relevant[s] = true;
            }
        }
    }
    let rel: Vec<usize> = (0..nb).filter(|&s| relevant[s]).collect();

    let mut chain = ConditionedChain::start(tree, rows, lambdas, prior, q, rng);
    for _ in 0..burn_in {
        chain.sweep(rng);
    }
    let mut draws: Vec<(u32, u32)> = Vec::with_capacity(samples * rel.len());
    let mut theta_sum = vec![F::zero(); nb];
    let mut theta_draws = Vec::with_capacity(if keep { samples } else { 0 });
    for _ in 0..samples {
        chain.sweep(rng);
        if keep {
            theta_draws.push(chain.counts.means().to_vec());
        }
        for &s in &rel {
            draws.push((chain.counts.loss()[s], chain.counts.keep()[s]));
            theta_sum[s] = theta_sum[s] + chain.counts.means()[s];
        }
    }

    let m = F::of(samples as f64);
    let prior_mean = prior.mean();
    let eps = F::of(BOUNDARY_RETREAT);
    let mut retreated = false;
    let mut theta = vec![prior_mean; nb];
    for &s in &rel {
        let mut t = theta_sum[s] / m;
        if !(t > F::zero() && t < F::one() && t.ln().is_finite() && (F::one() - t).ln().is_finite()) {
            t = if t >= prior_mean { F::one() - eps } else { eps };
            retreated = true;
        }
        theta[s] = t;
    }
    if retreated {
        log::warn!("loss estimate at the boundary; retreated by {BOUNDARY_RETREAT}");
    }

    let mut table = BackwardTable::new(tree);
    let mut log_lik = F::zero();
    for (x, &l) in rows.iter().zip(lambdas) {
        log_lik = log_lik + marginal_with(&mut table, tree, x, &theta, l, q);
    }

    let ln_t: Vec<F> = rel.iter().map(|&s| theta[s].ln()).collect();
    let ln_1mt: Vec<F> = rel.iter().map(|&s| (F::one() - theta[s]).ln()).collect();
    let (a, b) = (prior.a, prior.b);
    let ga = ln_gamma_table(a, n);
    let gb = ln_gamma_table(b, n);
    let gab = ln_gamma_table(a + b, n);

    let mut log_prior = F::zero();
    for j in 0..rel.len() {
        log_prior = log_prior + (a - F::one()) * ln_t[j] + (b - F::one()) * ln_1mt[j] - (ga[0] + gb[0] - gab[0]);
    }
    let mut per_draw = Vec::with_capacity(samples);
    for draw in draws.chunks(rel.len().max(1)).take(samples) {
        let mut v = F::zero();
        for (j, &(c01, c11)) in draw.iter().enumerate() {
            let (c01, c11) = (c01 as usize, c11 as usize);
            let pa = a + F::of(c01 as f64);
            let pb = b + F::of(c11 as f64);
            v = v + (pa - F::one()) * ln_t[j] + (pb - F::one()) * ln_1mt[j] - (ga[c01] + gb[c11] - gab[c01 + c11]);
        }
        per_draw.push(v);
    }
    if rel.is_empty() {
        per_draw = vec![F::zero(); samples];
    }
    let log_post = log_sum_exp(&per_draw) - m.ln();
    let log_marginal = log_lik + log_prior - log_post;
    if !log_marginal.is_finite() {
        return Err(DpmError::NonFinite("Chib marginal likelihood"));
    }
    Ok(ChibEstimate {
        log_marginal,
        theta_hat: theta,
        histories: chain.histories,
        retreated,
        theta_draws,
    })
}
