//! Scoring candidate genes against inferred modules by log-likelihood ratio
//! to the background model.

use rayon::prelude::*;
use thiserror::Error;

use crate::dpm::EcmAssignment;
use crate::preprocess::NullModel;
use crate::profiles::ProfileMatrix;
use crate::scalar::Real;
use crate::tree::{NodeId, PhyloTree};
use crate::treehmm::{marginal_loglik, marginal_with, BackwardTable, ErrorRate, HmmError, LossParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("candidate {0} is missing from the null model")]
    UnknownGene(String),
    #[error("candidate profiles have {got} species but the tree has {expected}")]
    SpeciesMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Hmm(#[from] HmmError),
}

/// `ln P(x | theta_k) - ln P(x | theta_0)` with the gene's own gain node.
pub fn llr_score<F: Real>(
    x: &[u8],
    theta_k: &LossParams<F>,
    theta0: &LossParams<F>,
    lambda: NodeId,
    q: ErrorRate<F>,
    tree: &PhyloTree,
) -> Result<F, HmmError> {
    if theta_k.len() != theta0.len() {
        return Err(HmmError::SizeMismatch {
            expected: theta0.len(),
            got: theta_k.len(),
        });
    }
    Ok(marginal_loglik(tree, x, theta_k, lambda, q)? - marginal_loglik(tree, x, theta0, lambda, q)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<F> {
    pub gene: usize,
    pub llr: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport<F> {
    pub gene_ids: Vec<String>,
    /// `llr[g][k]`; `None` for skipped genes and for a module's own members.
    pub llr: Vec<Vec<Option<F>>>,
    /// Per module, candidates above the threshold, best first, ties by name.
    pub lists: Vec<Vec<Hit<F>>>,
    pub skipped: Vec<(String, String)>,
    pub threshold: F,
}

impl<F> ExpansionReport<F> {
    pub fn ecm_count(&self) -> usize {
        self.lists.len()
    }
}

/// Scores every candidate against every module of `assignment`.
pub fn expand_ecm<F: Real>(
    candidates: &ProfileMatrix,
    assignment: &EcmAssignment<F>,
    null: &NullModel<F>,
    tree: &PhyloTree,
    q: ErrorRate<F>,
    threshold: F,
) -> Result<ExpansionReport<F>, ExpansionError> {
    if candidates.n_species() != tree.leaf_count() {
        return Err(ExpansionError::SpeciesMismatch {
            expected: tree.leaf_count(),
            got: candidates.n_species(),
        });
    }
    let k = assignment.k();
    let mut info = Vec::with_capacity(candidates.n_genes());
    for g in candidates.gene_ids() {
        let i = null
            .gene_ids
            .iter()
            .position(|n| n == g)
            .ok_or_else(|| ExpansionError::UnknownGene(g.clone()))?;
        let own = assignment.gene_ids.iter().position(|n| n == g).map(|j| assignment.labels[j]);
        info.push((null.lambdas[i], null.no_signal[i], own));
    }
    let llr: Vec<Vec<Option<F>>> = (0..candidates.n_genes())
        .into_par_iter()
        .map_init(
            || BackwardTable::new(tree),
            |table, g| {
                let (lambda, no_signal, own) = info[g];
                if no_signal {
                    return vec![None; k];
                }
                let x = candidates.row(g);
                let base = marginal_with(table, tree, x, null.theta0.as_slice(), lambda, q);
                (0..k)
                    .map(|e| {
                        if own == Some(e) {
                            return None;
                        }
                        let v = marginal_with(table, tree, x, assignment.theta_hat[e].as_slice(), lambda, q);
                        Some(v - base)
                    })
                    .collect()
            },
        )
        .collect();
    let skipped = (0..candidates.n_genes())
        .filter(|&g| info[g].1)
        .map(|g| (candidates.gene_ids()[g].clone(), NO_SIGNAL.to_string()))
        .collect();
    Ok(build_report(candidates.gene_ids(), llr, k, skipped, threshold))
}

pub(crate) const NO_SIGNAL: &str = "no signal (all-zero profile)";

pub(crate) fn build_report<F: Real>(
    names: &[String],
    llr: Vec<Vec<Option<F>>>,
    k: usize,
    skipped: Vec<(String, String)>,
    threshold: F,
) -> ExpansionReport<F> {
    let mut lists = vec![Vec::new(); k];
    for (g, row) in llr.iter().enumerate() {
        for (e, v) in row.iter().enumerate() {
            if let Some(v) = *v {
                if v > threshold {
                    lists[e].push(Hit { gene: g, llr: v });
                }
            }
        }
    }
    for l in &mut lists {
        l.sort_by(|a, b| {
            b.llr
                .partial_cmp(&a.llr)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| names[a.gene].cmp(&names[b.gene]))
        });
    }
    ExpansionReport {
        gene_ids: names.to_vec(),
        llr,
        lists,
        skipped,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_newick;

    fn setup() -> (PhyloTree, EcmAssignment<f64>, NullModel<f64>, ProfileMatrix) {
        let t = parse_newick("(((A,B),C),(D,E));").unwrap();
        let mut lost = vec![0.02; 8];
        lost[7] = 0.95;
        let a = EcmAssignment {
            gene_ids: vec!["m1".into(), "m2".into()],
            labels: vec![0, 0],
            strengths: vec![1.0],
            theta_hat: vec![LossParams::new(lost).unwrap()],
            log_marginals: vec![-3.0],
            score: -3.0,
            iteration: 0,
            tree: 0,
        };
        let names = ["m1", "m2", "c1", "c2", "c3", "z"];
        let rows = vec![
            vec![1, 1, 1, 0, 0],
            vec![1, 1, 1, 0, 0],
            vec![1, 1, 1, 0, 0],
            vec![1, 1, 1, 0, 0],
            vec![1, 1, 1, 1, 1],
            vec![0, 0, 0, 0, 0],
        ];
        let m = ProfileMatrix::from_rows(names.iter().map(|s| s.to_string()).collect(), t.leaf_labels().to_vec(), rows)
            .unwrap();
        let null = NullModel {
            gene_ids: m.gene_ids().to_vec(),
            theta0: LossParams::uniform(&t, 0.1),
            lambdas: vec![8; 6],
            lambda_mass: vec![1.0; 6],
            no_signal: vec![false, false, false, false, false, true],
            lambda_move_rate: 0.0,
        };
        (t, a, null, m)
    }

    #[test]
    fn identical_models_score_zero_and_swap_negates() {
        let t = parse_newick("((A,B),C);").unwrap();
        let q = ErrorRate::new(0.01).unwrap();
        let a = LossParams::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = LossParams::new(vec![0.5, 0.1, 0.05, 0.2]).unwrap();
        let x = [1u8, 0, 1];
        assert_eq!(llr_score(&x, &a, &a, 4, q, &t).unwrap(), 0.0);
        let ab: f64 = llr_score(&x, &a, &b, 4, q, &t).unwrap();
        let ba = llr_score(&x, &b, &a, 4, q, &t).unwrap();
        assert!((ab + ba).abs() < 1e-14);
    }

    #[test]
    fn ranking_threshold_and_exclusions() {
        let (t, a, null, m) = setup();
        let q = ErrorRate::new(0.01).unwrap();
        let r = expand_ecm(&m, &a, &null, &t, q, 0.0).unwrap();
        let hits: Vec<&str> = r.lists[0].iter().map(|h| r.gene_ids[h.gene].as_str()).collect();
        assert_eq!(hits, vec!["c1", "c2"]);
        assert_eq!(r.llr[0][0], None);
        assert_eq!(r.skipped.len(), 1);
        let none = expand_ecm(&m, &a, &null, &t, q, f64::INFINITY).unwrap();
        assert!(none.lists[0].is_empty());
    }

    #[test]
    fn order_of_candidates_does_not_change_lists() {
        let (t, a, null, m) = setup();
        let q = ErrorRate::new(0.01).unwrap();
        let r1 = expand_ecm(&m, &a, &null, &t, q, 0.0).unwrap();
        let rev: Vec<String> = m.gene_ids().iter().rev().cloned().collect();
        let m2 = m.subset(&rev).unwrap();
        let r2 = expand_ecm(&m2, &a, &null, &t, q, 0.0).unwrap();
        let names = |r: &ExpansionReport<f64>| -> Vec<String> {
            r.lists[0].iter().map(|h| r.gene_ids[h.gene].clone()).collect()
        };
        assert_eq!(names(&r1), names(&r2));
    }
}
