//! Per-gene likelihood kernels of the tree-structured hidden Markov model.
//!
//! A gene is gained at node `lambda`, stays absent outside that clade, and is
//! lost along branch `s` with probability `theta[s]`; absence is absorbing.
//! Leaves are observed with an independent flip probability `q`.
//!
//! Leaves outside the gain clade are hidden-absent, so an observed presence
//! there costs one observation error. This keeps likelihoods for different
//! gain nodes on a common footing.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;
use crate::tree::{NodeId, PhyloTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmmError {
    #[error("observation error rate must lie in [0, 0.5), got {0}")]
    InvalidErrorRate(f64),
    #[error("loss probability for branch {branch} must lie in [0, 1], got {value}")]
    InvalidLoss { branch: usize, value: f64 },
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(NodeId),
    #[error("Beta prior parameters must be positive, got ({0}, {1})")]
    InvalidPrior(f64, f64),
}

/// Observation flip probability `q`, restricted to `[0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRate<F>(F);

impl<F: Real> ErrorRate<F> {
    pub fn new(q: F) -> Result<Self, HmmError> {
        if q >= F::zero() && q < F::of(0.5) {
            Ok(ErrorRate(q))
        } else {
            Err(HmmError::InvalidErrorRate(q.to_f64_lossy()))
        }
    }

    pub fn value(self) -> F {
        self.0
    }

    /// `(P(x | h = 0), P(x | h = 1))` for one observed leaf state.
    #[inline]
    pub fn emission(self, x: u8) -> [F; 2] {
        let q = self.0;
        let p = F::one() - q;
        if x == 1 {
            [q, p]
        } else {
            [p, q]
        }
    }

    /// `ones * ln q + zeros * ln(1 - q)`, with empty counts contributing nothing.
    #[inline]
    fn absent_leaves_loglik(self, ones: u32, zeros: u32) -> F {
        let mut v = F::zero();
        if ones > 0 {
            v = v + F::of(f64::from(ones)) * self.0.ln();
        }
        if zeros > 0 {
            v = v + F::of(f64::from(zeros)) * (F::one() - self.0).ln();
        }
        v
    }
}

impl Default for ErrorRate<f64> {
    fn default() -> Self {
        ErrorRate(0.01)
    }
}

/// Per-branch loss probabilities indexed by child node id.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParams<F> {
    theta: Vec<F>,
}

impl<F: Real> LossParams<F> {
    pub fn new(theta: Vec<F>) -> Result<Self, HmmError> {
        for (branch, &v) in theta.iter().enumerate() {
            if !(v >= F::zero() && v <= F::one()) {
                return Err(HmmError::InvalidLoss {
                    branch,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(LossParams { theta })
    }

    pub fn uniform(tree: &PhyloTree, value: F) -> Self {
        LossParams {
            theta: vec![value; tree.branch_count()],
        }
    }

    pub fn as_slice(&self) -> &[F] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

impl<F> std::ops::Index<usize> for LossParams<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.theta[i]
    }
}

/// Beta(a, b) prior on every loss probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior<F> {
    pub a: F,
    pub b: F,
}

impl<F: Real> BetaPrior<F> {
    pub fn new(a: F, b: F) -> Result<Self, HmmError> {
        if a > F::zero() && b > F::zero() && a.is_finite() && b.is_finite() {
            Ok(BetaPrior { a, b })
        } else {
            Err(HmmError::InvalidPrior(a.to_f64_lossy(), b.to_f64_lossy()))
        }
    }

    pub fn mean(&self) -> F {
        self.a / (self.a + self.b)
    }
}

impl<F: Real> Default for BetaPrior<F> {
    fn default() -> Self {
        BetaPrior {
            a: F::of(0.03),
            b: F::of(0.97),
        }
    }
}

/// Hidden presence states over all nodes, plus the gain node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HiddenHistory {
    pub states: Vec<bool>,
    pub gain: NodeId,
}

impl HiddenHistory {
    /// Present everywhere in the gain clade, absent elsewhere.
    pub fn all_present(tree: &PhyloTree, gain: NodeId) -> Self {
        let mut states = vec![false; tree.node_count()];
        for &v in tree.clade(gain) {
            states[v] = true;
        }
        HiddenHistory { states, gain }
    }

    /// Gain node present, nothing outside its clade, and no re-gain.
    pub fn is_consistent(&self, tree: &PhyloTree) -> bool {
        if self.states.len() != tree.node_count() || self.gain >= tree.node_count() {
            return false;
        }
        if !self.states[self.gain] {
            return false;
        }
        for v in 0..tree.node_count() {
            if !self.states[v] {
                continue;
            }
            if !tree.in_subtree(self.gain, v) {
                return false;
            }
            if v != self.gain {
                match tree.parent(v) {
                    Some(p) if self.states[p] => {}
                    _ => return false,
                }
            }
        }
        true
    }

    pub fn leaf_states(&self, tree: &PhyloTree) -> &[bool] {
        &self.states[..tree.leaf_count()]
    }
}

/// Per-branch transition counts from a set of histories, with the Beta prior
/// they update. Posterior means are kept current as histories come and go.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCounts<F> {
    prior: BetaPrior<F>,
    loss: Vec<u32>,
    keep: Vec<u32>,
    mean: Vec<F>,
}

impl<F: Real> BetaCounts<F> {
    pub fn empty(prior: BetaPrior<F>, branches: usize) -> Self {
        BetaCounts {
            prior,
            loss: vec![0; branches],
            keep: vec![0; branches],
            mean: vec![prior.mean(); branches],
        }
    }

    pub fn prior(&self) -> BetaPrior<F> {
        self.prior
    }

    pub fn loss(&self) -> &[u32] {
        &self.loss
    }

    pub fn keep(&self) -> &[u32] {
        &self.keep
    }

    /// Posterior means `(a + loss) / (a + b + loss + keep)` per branch.
    pub fn means(&self) -> &[F] {
        &self.mean
    }

    pub fn posterior(&self, branch: usize) -> (F, F) {
        (
            self.prior.a + F::of(f64::from(self.loss[branch])),
            self.prior.b + F::of(f64::from(self.keep[branch])),
        )
    }

    fn refresh(&mut self, s: usize) {
        let (a, b) = self.posterior(s);
        self.mean[s] = a / (a + b);
    }

    pub fn add(&mut self, tree: &PhyloTree, h: &HiddenHistory) {
        self.apply(tree, h, true);
    }

    pub fn remove(&mut self, tree: &PhyloTree, h: &HiddenHistory) {
        self.apply(tree, h, false);
    }

    fn apply(&mut self, tree: &PhyloTree, h: &HiddenHistory, add: bool) {
        for &s in tree.clade(h.gain) {
            if s == h.gain {
                continue;
            }
            let p = tree.parent(s).expect("non-gain clade node has a parent");
            if !h.states[p] {
                continue;
            }
            let slot = if h.states[s] {
                &mut self.keep[s]
            } else {
                &mut self.loss[s]
            };
            if add {
                *slot += 1;
            } else {
                *slot -= 1;
            }
            self.refresh(s);
        }
    }

    /// Elementwise sum of two count sets over the same prior.
    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for s in 0..out.loss.len() {
            out.loss[s] += other.loss[s];
            out.keep[s] += other.keep[s];
            out.refresh(s);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.loss.iter().chain(&self.keep).all(|&c| c == 0)
    }
}

/// Counts over a set of histories on one tree.
pub fn accumulate_counts<'a, F: Real>(
    tree: &PhyloTree,
    prior: BetaPrior<F>,
    histories: impl IntoIterator<Item = &'a HiddenHistory>,
) -> BetaCounts<F> {
    let mut c = BetaCounts::empty(prior, tree.branch_count());
    for h in histories {
        c.add(tree, h);
    }
    c
}

/// Backward (pruning) table over a gain clade.
///
/// `values[s]` holds `(beta_s(0), beta_s(1))` rescaled so the larger entry is
/// not tiny; `log_scale[s]` is the accumulated log of the factors removed in
/// the clade of `s`, so `ln beta_s(h) = ln values[s][h] + log_scale[s]`.
#[derive(Debug, Clone)]
pub struct BackwardTable<F> {
    lambda: NodeId,
    values: Vec<[F; 2]>,
    log_scale: Vec<F>,
    ones: Vec<u32>,
    leaves: Vec<u32>,
    q: F,
}

impl<F: Real> BackwardTable<F> {
    pub fn new(tree: &PhyloTree) -> Self {
        let n = tree.node_count();
        BackwardTable {
            lambda: tree.root(),
            values: vec![[F::zero(); 2]; n],
            log_scale: vec![F::zero(); n],
            ones: vec![0; n],
            leaves: vec![0; n],
            q: F::zero(),
        }
    }

    /// Fills the table bottom-up over the clade of `lambda`. `loss[s]` is the
    /// presence-to-absence probability on branch `s`.
    pub fn compute(&mut self, tree: &PhyloTree, x: &[u8], lambda: NodeId, q: ErrorRate<F>, loss: &[F]) {
        debug_assert_eq!(x.len(), tree.leaf_count());
        debug_assert_eq!(loss.len(), tree.branch_count());
        self.lambda = lambda;
        self.q = q.value();
        for &s in tree.clade(lambda) {
            if tree.is_leaf(s) {
                self.values[s] = q.emission(x[s]);
                self.log_scale[s] = F::zero();
                self.ones[s] = u32::from(x[s]);
                self.leaves[s] = 1;
                continue;
            }
            let (mut b0, mut b1, mut ls) = (F::one(), F::one(), F::zero());
            let (mut ones, mut leaves) = (0, 0);
            for &c in tree.children(s) {
                let [c0, c1] = self.values[c];
                let p = loss[c];
                b0 = b0 * c0;
                b1 = b1 * (p * c0 + (F::one() - p) * c1);
                ls = ls + self.log_scale[c];
                ones += self.ones[c];
                leaves += self.leaves[c];
            }
            let m = b0.max(b1);
            if m > F::zero() && m < F::RESCALE_BELOW {
                b0 = b0 / m;
                b1 = b1 / m;
                ls = ls + m.ln();
            }
            self.values[s] = [b0, b1];
            self.log_scale[s] = ls;
            self.ones[s] = ones;
            self.leaves[s] = leaves;
        }
    }

    pub fn lambda(&self) -> NodeId {
        self.lambda
    }

    /// `ln beta_s(h)` for a node inside the computed clade.
    pub fn log_beta(&self, s: NodeId, h: usize) -> F {
        self.values[s][h].ln() + self.log_scale[s]
    }

    /// Log-likelihood of the whole profile when the gene is gained at `s`,
    /// for any node `s` inside the computed clade.
    pub fn log_marginal_at(&self, s: NodeId, x_ones: u32, x_len: u32) -> F {
        let q = ErrorRate(self.q);
        let ones_out = x_ones - self.ones[s];
        let zeros_out = (x_len - x_ones) - (self.leaves[s] - self.ones[s]);
        self.log_beta(s, 1) + q.absent_leaves_loglik(ones_out, zeros_out)
    }

    /// Draws a history given the table; `loss` must be the vector the table
    /// was computed with.
    pub fn sample<R: Rng + ?Sized>(&self, tree: &PhyloTree, loss: &[F], rng: &mut R) -> HiddenHistory {
        let mut h = HiddenHistory {
            states: vec![false; tree.node_count()],
            gain: self.lambda,
        };
        h.states[self.lambda] = true;
        self.sample_into(tree, loss, rng, &mut h.states);
        h
    }

    /// Top-down draw reusing an existing state buffer; entries outside the
    /// clade are reset to absent.
    pub fn sample_into<R: Rng + ?Sized>(&self, tree: &PhyloTree, loss: &[F], rng: &mut R, states: &mut [bool]) {
        self.sample_below(tree, self.lambda, loss, rng, states);
    }

    /// Draw for a gain at any node inside the computed clade; the table
    /// entries below it do not depend on where the gain is.
    pub fn sample_at<R: Rng + ?Sized>(&self, tree: &PhyloTree, gain: NodeId, loss: &[F], rng: &mut R) -> HiddenHistory {
        debug_assert!(tree.in_subtree(self.lambda, gain));
        let mut states = vec![false; tree.node_count()];
        self.sample_below(tree, gain, loss, rng, &mut states);
        HiddenHistory { states, gain }
    }

    fn sample_below<R: Rng + ?Sized>(&self, tree: &PhyloTree, gain: NodeId, loss: &[F], rng: &mut R, states: &mut [bool]) {
        states.iter_mut().for_each(|v| *v = false);
        states[gain] = true;
        for &s in tree.clade(gain).iter().rev() {
            if s == gain {
                continue;
            }
            let parent = tree.parent(s).expect("clade node below gain has a parent");
            if !states[parent] {
                continue;
            }
            let p = loss[s];
            let [b0, b1] = self.values[s];
            let w1 = (F::one() - p) * b1;
            let w0 = p * b0;
            let total = w0 + w1;
            let u = F::of(rng.random::<f64>());
            // a zero-probability branch (impossible data) falls back to the prior
            states[s] = if total > F::zero() {
                u * total < w1
            } else {
                u >= p
            };
        }
    }
}

fn check_sizes<F>(tree: &PhyloTree, x: &[u8], loss: &[F], lambda: NodeId) -> Result<(), HmmError> {
    if x.len() != tree.leaf_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.leaf_count(),
            got: x.len(),
        });
    }
    if loss.len() != tree.branch_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.branch_count(),
            got: loss.len(),
        });
    }
    if lambda >= tree.node_count() {
        return Err(HmmError::NodeOutOfRange(lambda));
    }
    Ok(())
}

pub(crate) fn ones_in(x: &[u8]) -> u32 {
    x.iter().map(|&v| u32::from(v)).sum()
}

/// `ln P(x | h)` over the leaves; `-inf` when `q = 0` and any leaf mismatches.
pub fn emission_loglik<F: Real>(x: &[u8], h_leaves: &[bool], q: ErrorRate<F>) -> Result<F, HmmError> {
    if x.len() != h_leaves.len() {
        return Err(HmmError::SizeMismatch {
            expected: x.len(),
            got: h_leaves.len(),
        });
    }
    let mismatches = x
        .iter()
        .zip(h_leaves)
        .filter(|(&xv, &hv)| (xv == 1) != hv)
        .count() as u32;
    Ok(q.absent_leaves_loglik(mismatches, x.len() as u32 - mismatches))
}

/// `ln P(x, h | theta)`; `-inf` for histories the model forbids.
pub fn complete_loglik<F: Real>(
    tree: &PhyloTree,
    x: &[u8],
    h: &HiddenHistory,
    theta: &LossParams<F>,
    q: ErrorRate<F>,
) -> Result<F, HmmError> {
    check_sizes(tree, x, theta.as_slice(), h.gain)?;
    if h.states.len() != tree.node_count() {
        return Err(HmmError::SizeMismatch {
            expected: tree.node_count(),
            got: h.states.len(),
        });
    }
    if !h.states[h.gain] || (0..tree.node_count()).any(|v| h.states[v] && !tree.in_subtree(h.gain, v)) {
        return Ok(F::neg_infinity());
    }
    let mut ll = F::zero();
    for &s in tree.clade(h.gain) {
        if s == h.gain {
            continue;
        }
        let parent = h.states[tree.parent(s).expect("parent")];
        let p = theta[s];
        let factor = match (parent, h.states[s]) {
            (false, false) => F::one(),
            (false, true) => F::zero(),
            (true, false) => p,
            (true, true) => F::one() - p,
        };
        ll = ll + factor.ln();
    }
    Ok(ll + emission_loglik(x, h.leaf_states(tree), q)?)
}

/// `ln P(x | theta)` for a gene gained at `lambda`, by pruning.
pub fn marginal_loglik<F: Real>(
    tree: &PhyloTree,
    x: &[u8],
    theta: &LossParams<F>,
    lambda: NodeId,
    q: ErrorRate<F>,
) -> Result<F, HmmError> {
    check_sizes(tree, x, theta.as_slice(), lambda)?;
    let mut table = BackwardTable::new(tree);
    Ok(marginal_with(&mut table, tree, x, theta.as_slice(), lambda, q))
}

/// Pruning into a caller-owned table; no validation.
#[inline]
pub fn marginal_with<F: Real>(
    table: &mut BackwardTable<F>,
    tree: &PhyloTree,
    x: &[u8],
    loss: &[F],
    lambda: NodeId,
    q: ErrorRate<F>,
) -> F {
    table.compute(tree, x, lambda, q, loss);
    table.log_marginal_at(lambda, ones_in(x), x.len() as u32)
}

/// `ln P(x | H^k)` with the loss probabilities integrated against their Beta
/// posteriors. Each loss probability enters a single gene's likelihood at
/// most linearly, so plugging in the posterior means is exact.
pub fn expected_marginal_loglik<F: Real>(
    tree: &PhyloTree,
    x: &[u8],
    counts: &BetaCounts<F>,
    lambda: NodeId,
    q: ErrorRate<F>,
) -> Result<F, HmmError> {
    check_sizes(tree, x, counts.means(), lambda)?;
    let mut table = BackwardTable::new(tree);
    Ok(marginal_with(&mut table, tree, x, counts.means(), lambda, q))
}

/// Draws `H ~ P(H | x, loss)` by forward summation, backward sampling.
pub fn sample_history<F: Real, R: Rng + ?Sized>(
    tree: &PhyloTree,
    x: &[u8],
    loss: &[F],
    lambda: NodeId,
    q: ErrorRate<F>,
    rng: &mut R,
) -> Result<HiddenHistory, HmmError> {
    check_sizes(tree, x, loss, lambda)?;
    let mut table = BackwardTable::new(tree);
    table.compute(tree, x, lambda, q, loss);
    Ok(table.sample(tree, loss, rng))
}

/// Log-likelihood of `x` for every possible gain node from one pruning pass
/// over the whole tree.
pub fn gain_logliks<F: Real>(
    table: &mut BackwardTable<F>,
    tree: &PhyloTree,
    x: &[u8],
    loss: &[F],
    q: ErrorRate<F>,
) -> Vec<F> {
    table.compute(tree, x, tree.root(), q, loss);
    let ones = ones_in(x);
    (0..tree.node_count())
        .map(|s| table.log_marginal_at(s, ones, x.len() as u32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::tree::parse_newick;

    fn q(v: f64) -> ErrorRate<f64> {
        ErrorRate::new(v).unwrap()
    }

    #[test]
    fn error_rate_bounds() {
        assert!(ErrorRate::new(0.5f64).is_err());
        assert!(ErrorRate::new(-0.1f64).is_err());
        assert!(ErrorRate::new(0.0f64).is_ok());
    }

    #[test]
    fn emission_examples() {
        let v = emission_loglik(&[1, 0], &[true, false], q(0.01)).unwrap();
        assert!((v - 2.0 * 0.99f64.ln()).abs() < 1e-15);
        let v = emission_loglik(&[1, 0], &[true, true], q(0.01)).unwrap();
        assert!((v - (0.99f64.ln() + 0.01f64.ln())).abs() < 1e-15);
        let v = emission_loglik(&[1, 0], &[false, false], q(0.0)).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
        assert!(emission_loglik(&[1], &[true, true], q(0.0)).is_err());
    }

    #[test]
    fn complete_loglik_examples() {
        let t = parse_newick("((A,B),C);").unwrap();
        let zero = LossParams::uniform(&t, 0.0);
        let h = HiddenHistory::all_present(&t, t.root());
        assert_eq!(complete_loglik(&t, &[1, 1, 1], &h, &zero, q(0.0)).unwrap(), 0.0);

        let mut theta = vec![0.0; 4];
        theta[2] = 0.3;
        let theta = LossParams::new(theta).unwrap();
        let mut lost = h.clone();
        lost.states[2] = false;
        let v = complete_loglik(&t, &[1, 1, 0], &lost, &theta, q(0.0)).unwrap();
        assert!((v - 0.3f64.ln()).abs() < 1e-15);

        // presence outside the gain clade is forbidden
        let mut outside = HiddenHistory::all_present(&t, 3);
        outside.states[2] = true;
        assert_eq!(
            complete_loglik(&t, &[1, 1, 1], &outside, &theta, q(0.01)).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(!outside.is_consistent(&t));
    }

    #[test]
    fn marginal_at_leaf_gain() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let theta = LossParams::uniform(&t, 0.2);
        let x = [1u8, 0, 1, 0];
        let got = marginal_loglik(&t, &x, &theta, 0, q(0.05)).unwrap();
        // A present as gained; B, D correctly absent; C an error
        let want = 0.95f64.ln() + 2.0 * 0.95f64.ln() + 0.05f64.ln();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn marginal_deterministic_case() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let zero = LossParams::uniform(&t, 0.0);
        let v = marginal_loglik(&t, &[1, 1, 1, 1], &zero, t.root(), q(0.0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn empty_counts_use_prior_mean() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let counts = BetaCounts::empty(BetaPrior::new(0.03, 0.97).unwrap(), t.branch_count());
        let x = [1u8, 0, 1, 1];
        let a = expected_marginal_loglik(&t, &x, &counts, t.root(), q(0.01)).unwrap();
        let b = marginal_loglik(&t, &x, &LossParams::uniform(&t, 0.03), t.root(), q(0.01)).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn dominant_loss_counts_act_as_certain_loss() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let mut c = BetaCounts::empty(BetaPrior::default(), t.branch_count());
        c.loss[4] = 1_000_000;
        c.refresh(4);
        let mut certain = vec![0.03; t.branch_count()];
        certain[4] = 1.0;
        let x = [0u8, 0, 1, 1];
        let a = expected_marginal_loglik(&t, &x, &c, t.root(), q(0.01)).unwrap();
        let b = marginal_loglik(&t, &x, &LossParams::new(certain).unwrap(), t.root(), q(0.01)).unwrap();
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn large_tree_does_not_underflow() {
        // caterpillar with 139 leaves
        let mut s = String::from("L0");
        for i in 1..139 {
            s = format!("({s},L{i})");
        }
        s.push(';');
        let t = parse_newick(&s).unwrap();
        let theta = LossParams::uniform(&t, 0.2);
        for x in [vec![1u8; 139], vec![0u8; 139]] {
            let v = marginal_loglik(&t, &x, &theta, t.root(), q(0.01)).unwrap();
            assert!(v.is_finite(), "{v}");
            let v32 = marginal_loglik(
                &t,
                &x,
                &LossParams::uniform(&t, 0.2f32),
                t.root(),
                ErrorRate::new(0.01f32).unwrap(),
            )
            .unwrap();
            assert!(v32.is_finite());
            assert!(((f64::from(v32) - v) / v).abs() < 1e-4);
        }
    }

    #[test]
    fn sampler_deterministic_cases() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let zero = vec![0.0; t.branch_count()];
        let mut rng = stream(1, "t", 0);
        for _ in 0..20 {
            let h = sample_history(&t, &[1, 1, 1, 1], &zero, t.root(), q(0.0), &mut rng).unwrap();
            assert_eq!(h, HiddenHistory::all_present(&t, t.root()));
        }
        // certain loss on branch 4: the clade below stays absent
        let mut loss = vec![0.5; t.branch_count()];
        loss[4] = 1.0;
        for _ in 0..20 {
            let h = sample_history(&t, &[1, 1, 1, 1], &loss, t.root(), q(0.1), &mut rng).unwrap();
            assert!(!h.states[4] && !h.states[0] && !h.states[1]);
            assert!(h.is_consistent(&t));
        }
    }

    #[test]
    fn counts_are_additive() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let prior = BetaPrior::default();
        let mut h1 = HiddenHistory::all_present(&t, t.root());
        h1.states[4] = false;
        h1.states[0] = false;
        h1.states[1] = false;
        let mut h2 = HiddenHistory::all_present(&t, 5);
        h2.states[3] = false;
        let c1 = accumulate_counts(&t, prior, [&h1]);
        assert_eq!(c1.loss()[4], 1);
        assert_eq!(c1.keep()[5], 1);
        assert_eq!(c1.loss()[0], 0);
        assert_eq!(c1.keep()[2] + c1.keep()[3], 2);
        let c2 = accumulate_counts(&t, prior, [&h2]);
        let both = accumulate_counts(&t, prior, [&h1, &h2]);
        assert_eq!(both, c1.merged(&c2));
        let mut back = both.clone();
        back.remove(&t, &h2);
        assert_eq!(back, c1);
        assert!(accumulate_counts::<f64>(&t, prior, []).is_empty());
    }

    #[test]
    fn gain_logliks_match_single_lambda() {
        let t = parse_newick("(((A,B),C),(D,E));").unwrap();
        let theta = LossParams::new(vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.25, 0.35, 0.4]).unwrap();
        let x = [1u8, 1, 0, 0, 1];
        let mut table = BackwardTable::new(&t);
        let all = gain_logliks(&mut table, &t, &x, theta.as_slice(), q(0.02));
        for s in 0..t.node_count() {
            let one = marginal_loglik(&t, &x, &theta, s, q(0.02)).unwrap();
            assert!((all[s] - one).abs() < 1e-12, "node {s}");
        }
    }
}
