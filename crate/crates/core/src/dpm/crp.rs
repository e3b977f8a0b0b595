//! Chinese restaurant process prior and the label conditional of the sampler.

use std::collections::BTreeMap;

use crate::scalar::{normalize_log_weights, Real};
use crate::tree::{NodeId, PhyloTree};
use crate::treehmm::{BackwardTable, BetaCounts, BetaPrior, ErrorRate, HmmError};

/// `ln P(I)` under the CRP with concentration `alpha`:
/// `K ln alpha + sum_k ln (n_k - 1)! + ln Gamma(alpha) - ln Gamma(alpha + n)`.
pub fn crp_log_prior<F: Real>(labels: &[usize], alpha: F) -> F {
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    let mut sizes: Vec<usize> = sizes.into_values().collect();
    sizes.sort_unstable();
    let n = F::of(labels.len() as f64);
    let mut v = F::of(sizes.len() as f64) * alpha.ln();
    for &size in &sizes {
        v = v + F::of(size as f64).ln_gamma();
    }
    v + alpha.ln_gamma() - (alpha + n).ln_gamma()
}

/// Normalized label probabilities from cluster sizes and per-cluster
/// predictive log-likelihoods; the final entry is a new cluster.
pub fn crp_weights<F: Real>(sizes: &[usize], log_liks: &[F], new_log_lik: F, alpha: F) -> Vec<F> {
    debug_assert_eq!(sizes.len(), log_liks.len());
    let mut log_w: Vec<F> = sizes
        .iter()
        .zip(log_liks)
        .map(|(&n, &ll)| F::of(n as f64).ln() + ll)
        .collect();
    log_w.push(alpha.ln() + new_log_lik);
    normalize_log_weights(&log_w)
}

/// `P(I_i = k | X_i, H_{-i}, I_{-i})` over the given clusters (counts with
/// gene `i` already removed) plus a new cluster in the final slot.
pub fn crp_assignment_probs<F: Real>(
    tree: &PhyloTree,
    x: &[u8],
    lambda: NodeId,
    clusters: &[(usize, &BetaCounts<F>)],
    prior: BetaPrior<F>,
    alpha: F,
    q: ErrorRate<F>,
) -> Result<Vec<F>, HmmError> {
    if x.len() != tree.leaf_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.leaf_count(),
            got: x.len(),
        });
    }
    if lambda >= tree.node_count() {
        return Err(HmmError::NodeOutOfRange(lambda));
    }
    let mut table = BackwardTable::new(tree);
    let sizes: Vec<usize> = clusters.iter().map(|c| c.0).collect();
    let lls: Vec<F> = clusters
        .iter()
        .map(|(_, c)| crate::treehmm::marginal_with(&mut table, tree, x, c.means(), lambda, q))
        .collect();
    let empty = BetaCounts::empty(prior, tree.branch_count());
    let new_ll = crate::treehmm::marginal_with(&mut table, tree, x, empty.means(), lambda, q);
    Ok(crp_weights(&sizes, &lls, new_ll, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![0]];
        for _ in 1..n {
            let mut next = Vec::new();
            for p in out {
                let k = p.iter().max().unwrap() + 1;
                for l in 0..=k {
                    let mut q = p.clone();
                    q.push(l);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn paper_formula_at_unit_alpha() {
        let v = crp_log_prior(&[0, 0, 1], 1.0f64);
        assert!((v - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        let v = crp_log_prior(&[0, 1], 1.0f64);
        assert!((v - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn normalizes_over_partitions() {
        let ps = partitions(4);
        assert_eq!(ps.len(), 15);
        for alpha in [0.5f64, 1.0, 2.0] {
            let total: f64 = ps.iter().map(|p| crp_log_prior(p, alpha).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{alpha}: {total}");
        }
    }

    #[test]
    fn relabeling_invariant() {
        assert_eq!(crp_log_prior(&[0, 0, 1, 2], 0.7f64), crp_log_prior(&[5, 5, 2, 9], 0.7f64));
    }

    #[test]
    fn flat_likelihood_weights() {
        let p = crp_weights(&[1], &[-3.0f64], -3.0, 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let p = crp_weights(&[1], &[-3.0f64], -3.0, 1e-300);
        assert!(p[1] < 1e-250);
    }
}
