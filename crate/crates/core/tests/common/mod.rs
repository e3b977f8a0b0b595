//! Independent reference computations for the likelihood kernels: exhaustive
//! enumeration of hidden histories and Gauss-Jacobi quadrature over Beta
//! posteriors. Deliberately slow and simple.
#![allow(dead_code)]

use ecm_core::tree::{NodeId, PhyloTree};
use ecm_core::treehmm::{complete_loglik, ErrorRate, HiddenHistory, LossParams};
use nalgebra::{DMatrix, SymmetricEigen};

/// Every history consistent with a gain at `lambda`.
pub fn enumerate_histories(tree: &PhyloTree, lambda: NodeId) -> Vec<HiddenHistory> {
    let below: Vec<NodeId> = tree
        .clade(lambda)
        .iter()
        .rev()
        .copied()
        .filter(|&v| v != lambda)
        .collect();
    let mut out = Vec::new();
    let mut states = vec![false; tree.node_count()];
    states[lambda] = true;
    fn rec(tree: &PhyloTree, below: &[NodeId], i: usize, states: &mut Vec<bool>, lambda: NodeId, out: &mut Vec<HiddenHistory>) {
        if i == below.len() {
            out.push(HiddenHistory {
                states: states.clone(),
                gain: lambda,
            });
            return;
        }
        let v = below[i];
        states[v] = false;
        rec(tree, below, i + 1, states, lambda, out);
        if states[tree.parent(v).unwrap()] {
            states[v] = true;
            rec(tree, below, i + 1, states, lambda, out);
            states[v] = false;
        }
    }
    rec(tree, &below, 0, &mut states, lambda, &mut out);
    out
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln P(x | theta)` as a sum over all histories.
pub fn brute_marginal(tree: &PhyloTree, x: &[u8], theta: &LossParams<f64>, lambda: NodeId, q: f64) -> f64 {
    let q = ErrorRate::new(q).unwrap();
    let terms: Vec<f64> = enumerate_histories(tree, lambda)
        .iter()
        .map(|h| complete_loglik(tree, x, h, theta, q).unwrap())
        .collect();
    log_sum_exp(&terms)
}

/// Exact conditional law of the history given `x`.
pub fn history_posterior(
    tree: &PhyloTree,
    x: &[u8],
    theta: &LossParams<f64>,
    lambda: NodeId,
    q: f64,
) -> Vec<(HiddenHistory, f64)> {
    let qe = ErrorRate::new(q).unwrap();
    let hs = enumerate_histories(tree, lambda);
    let lls: Vec<f64> = hs.iter().map(|h| complete_loglik(tree, x, h, theta, qe).unwrap()).collect();
    let z = log_sum_exp(&lls);
    hs.into_iter().zip(lls).map(|(h, l)| (h, (l - z).exp())).collect()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    lanczos_ln_gamma(a) + lanczos_ln_gamma(b) - lanczos_ln_gamma(a + b)
}

// Lanczos approximation (g = 7, n = 9), kept local so the oracle does not
// share code with the crate under test.
fn lanczos_ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - lanczos_ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln P(X_1..X_n | shared theta)` with theta integrated against Beta(a, b)
/// on every branch, by enumerating joint histories and using Beta functions.
pub fn exact_cluster_log_marginal(
    tree: &PhyloTree,
    xs: &[Vec<u8>],
    lambdas: &[NodeId],
    q: f64,
    a: f64,
    b: f64,
) -> f64 {
    let qe = ErrorRate::new(q).unwrap();
    let per_gene: Vec<Vec<(HiddenHistory, f64)>> = xs
        .iter()
        .zip(lambdas)
        .map(|(x, &l)| {
            enumerate_histories(tree, l)
                .into_iter()
                .map(|h| {
                    let e = ecm_core::treehmm::emission_loglik(x, h.leaf_states(tree), qe).unwrap();
                    (h, e)
                })
                .collect()
        })
        .collect();
    let nb = tree.branch_count();
    let mut terms = Vec::new();
    let mut idx = vec![0usize; xs.len()];
    loop {
        let mut loss = vec![0u32; nb];
        let mut keep = vec![0u32; nb];
        let mut ll = 0.0;
        for (g, &i) in idx.iter().enumerate() {
            let (h, e) = &per_gene[g][i];
            ll += e;
            for s in 0..nb {
                let p = tree.parent(s).unwrap();
                if h.states[p] && tree.in_subtree(h.gain, s) && s != h.gain {
                    if h.states[s] {
                        keep[s] += 1;
                    } else {
                        loss[s] += 1;
                    }
                }
            }
        }
        for s in 0..nb {
            ll += ln_beta(a + loss[s] as f64, b + keep[s] as f64) - ln_beta(a, b);
        }
        terms.push(ll);
        let mut g = 0;
        loop {
            if g == idx.len() {
                return log_sum_exp(&terms);
            }
            idx[g] += 1;
            if idx[g] < per_gene[g].len() {
                break;
            }
            idx[g] = 0;
            g += 1;
        }
    }
}

/// Exact posterior mean of every loss probability given the rows of one
/// module, by the same joint enumeration.
pub fn exact_posterior_theta_mean(
    tree: &PhyloTree,
    xs: &[Vec<u8>],
    lambdas: &[NodeId],
    q: f64,
    a: f64,
    b: f64,
) -> Vec<f64> {
    let qe = ErrorRate::new(q).unwrap();
    let per_gene: Vec<Vec<(HiddenHistory, f64)>> = xs
        .iter()
        .zip(lambdas)
        .map(|(x, &l)| {
            enumerate_histories(tree, l)
                .into_iter()
                .map(|h| {
                    let e = ecm_core::treehmm::emission_loglik(x, h.leaf_states(tree), qe).unwrap();
                    (h, e)
                })
                .collect()
        })
        .collect();
    let nb = tree.branch_count();
    let mut logw = Vec::new();
    let mut means: Vec<Vec<f64>> = Vec::new();
    let mut idx = vec![0usize; xs.len()];
    loop {
        let mut loss = vec![0u32; nb];
        let mut keep = vec![0u32; nb];
        let mut ll = 0.0;
        for (g, &i) in idx.iter().enumerate() {
            let (h, e) = &per_gene[g][i];
            ll += e;
            for s in 0..nb {
                let p = tree.parent(s).unwrap();
                if h.states[p] && tree.in_subtree(h.gain, s) && s != h.gain {
                    if h.states[s] {
                        keep[s] += 1;
                    } else {
                        loss[s] += 1;
                    }
                }
            }
        }
        for s in 0..nb {
            ll += ln_beta(a + loss[s] as f64, b + keep[s] as f64) - ln_beta(a, b);
        }
        logw.push(ll);
        means.push(
            (0..nb)
                .map(|s| (a + loss[s] as f64) / (a + b + (loss[s] + keep[s]) as f64))
                .collect(),
        );
        let mut g = 0;
        loop {
            if g == idx.len() {
                let z = log_sum_exp(&logw);
                let mut out = vec![0.0; nb];
                for (w, m) in logw.iter().zip(&means) {
                    for s in 0..nb {
                        out[s] += (w - z).exp() * m[s];
                    }
                }
                return out;
            }
            idx[g] += 1;
            if idx[g] < per_gene[g].len() {
                break;
            }
            idx[g] = 0;
            g += 1;
        }
    }
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Gauss-Jacobi rule for expectations under Beta(alpha, beta) on (0, 1):
/// nodes and weights summing to one (Golub-Welsch).
pub fn beta_quadrature(alpha: f64, beta: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let a = beta - 1.0;
    let b = alpha - 1.0;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0))
        };
        j[(k, k)] = diag;
        if k + 1 < n {
            let m = (k + 1) as f64;
            let beta_m = if m == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + a + b)
                    / ((2.0 * m + a + b).powi(2) * (2.0 * m + a + b + 1.0) * (2.0 * m + a + b - 1.0))
            };
            j[(k, k + 1)] = beta_m.sqrt();
            j[(k + 1, k)] = beta_m.sqrt();
        }
    }
    let eig = SymmetricEigen::new(j);
    let nodes = eig.eigenvalues.iter().map(|t| (t + 1.0) / 2.0).collect();
    let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

/// `ln E[P(x | theta)]` with independent Beta(post_a[s], post_b[s]) on each
/// branch of the gain clade, by tensor-product quadrature. Branches outside
/// the clade do not enter the likelihood and are pinned to their means.
pub fn quadrature_expected_marginal(
    tree: &PhyloTree,
    x: &[u8],
    post_a: &[f64],
    post_b: &[f64],
    lambda: NodeId,
    q: f64,
    points: usize,
) -> f64 {
    let branches: Vec<NodeId> = tree.clade(lambda).iter().copied().filter(|&v| v != lambda).collect();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = branches
        .iter()
        .map(|&s| beta_quadrature(post_a[s], post_b[s], points))
        .collect();
    let mut theta: Vec<f64> = (0..tree.branch_count())
        .map(|s| post_a[s] / (post_a[s] + post_b[s]))
        .collect();
    let mut idx = vec![0usize; branches.len()];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (k, &s) in branches.iter().enumerate() {
            theta[s] = rules[k].0[idx[k]];
            w *= rules[k].1[idx[k]];
        }
        let lp = LossParams::new(theta.clone()).unwrap();
        total += w * brute_marginal(tree, x, &lp, lambda, q).exp();
        let mut k = 0;
        loop {
            if k == idx.len() {
                return total.ln();
            }
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Random rooted tree over `s` leaves named `L0..`, by repeatedly joining two
/// (occasionally three) random subtrees.
pub fn random_newick<R: rand::Rng>(s: usize, rng: &mut R) -> String {
    let mut parts: Vec<String> = (0..s).map(|i| format!("L{i}")).collect();
    while parts.len() > 1 {
        let k = if parts.len() >= 3 && rng.random_bool(0.2) { 3 } else { 2 };
        let mut picked = Vec::new();
        for _ in 0..k {
            let i = rng.random_range(0..parts.len());
            picked.push(parts.swap_remove(i));
        }
        parts.push(format!("({})", picked.join(",")));
    }
    format!("{};", parts[0])
}
