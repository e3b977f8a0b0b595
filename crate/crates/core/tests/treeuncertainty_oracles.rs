mod common;

use common::*;
use ecm_core::dpm::{EcmAssignment, SamplerConfig};
use ecm_core::expansion::llr_score;
use ecm_core::profiles::ProfileMatrix;
use ecm_core::rng::stream;
use ecm_core::tree::{parse_newick, TreeSet};
use ecm_core::treehmm::{marginal_loglik, ErrorRate, LossParams};
use ecm_core::treeuncertainty::*;

#[test]
fn tree_step_matches_exact_conditional() {
    let t1 = parse_newick("((A,B),C);").unwrap();
    let t2 = parse_newick("((A,C),B);").unwrap().with_leaf_order(t1.leaf_labels()).unwrap();
    let trees = TreeSet::uniform(vec![t1, t2]).unwrap();
    let rows = vec![vec![0u8, 0, 1], vec![0u8, 0, 1]];
    let m = ProfileMatrix::from_rows(vec!["a".into(), "b".into()], trees.leaf_labels().to_vec(), rows.clone()).unwrap();
    let q = 0.05;
    let cfg = SamplerConfig {
        q: ErrorRate::new(q).unwrap(),
        seed: 2,
        ..SamplerConfig::<f64>::default()
    };
    let lambdas = vec![vec![4, 4], vec![4, 4]];
    let exact: Vec<f64> = trees
        .trees()
        .iter()
        .map(|t| 0.5f64.ln() + exact_cluster_log_marginal(t, &rows, &[4, 4], q, 0.03, 0.97))
        .collect();
    let z = log_sum_exp(&exact);
    let exact: Vec<f64> = exact.iter().map(|v| (v - z).exp()).collect();

    let mut state = TreeAveragedState::new(&trees, lambdas, 0);
    let mut rng = stream(3, "tree-step", 0);
    let n = 50_000;
    let mut hits = [0usize; 2];
    for _ in 0..n {
        hits[state.sample_tree(&m, &trees, &[0, 0], &cfg, &mut rng).unwrap()] += 1;
    }
    let tv = 0.5 * (0..2).map(|i| (hits[i] as f64 / n as f64 - exact[i]).abs()).sum::<f64>();
    assert!(tv < 0.02, "tv {tv}: {hits:?} vs {exact:?}");
    assert!(exact[0] > 0.6);
}

#[test]
fn single_tree_llr_matches_plug_in_within_mc_error() {
    let tree = parse_newick("(((A,B),(C,D)),((E,F),(G,H)));").unwrap();
    let ts = TreeSet::single(tree.clone());
    let q = ErrorRate::new(0.01).unwrap();
    let root = tree.root();
    let mut loss = vec![0.02; tree.branch_count()];
    loss[tree.leaf_index("C").unwrap()] = 0.9;
    loss[tree.leaf_index("G").unwrap()] = 0.9;
    let n = 8;
    let mut planted = vec![1u8; 8];
    planted[2] = 0;
    planted[6] = 0;
    let mut rows = vec![planted; n];
    rows[3][0] = 0;
    rows[5][7] = 0;
    let names: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
    let m = ProfileMatrix::from_rows(names.clone(), tree.leaf_labels().to_vec(), rows).unwrap();
    let a = EcmAssignment {
        gene_ids: names,
        labels: vec![0; n],
        strengths: vec![0.0],
        theta_hat: vec![LossParams::new(loss).unwrap()],
        log_marginals: vec![0.0],
        score: 0.0,
        iteration: 0,
        tree: 0,
    };
    let cfg = SamplerConfig {
        q,
        seed: 4,
        ..SamplerConfig::<f64>::default()
    };
    let model = tree_predictive(&m, &a, &ts, &[vec![root; n]], &cfg).unwrap();
    let draws = &model.theta_draws[0][0];
    assert_eq!(draws.len(), 1000);
    let nb = tree.branch_count();
    let mean: Vec<f64> = (0..nb).map(|s| draws.iter().map(|d| d[s]).sum::<f64>() / draws.len() as f64).collect();
    let th0 = LossParams::uniform(&tree, 0.1);
    let plug_theta = LossParams::new(mean).unwrap();
    for x in [[1u8, 1, 0, 1, 1, 1, 0, 1], [1, 1, 1, 1, 1, 1, 0, 1], [0, 1, 1, 0, 1, 1, 1, 1]] {
        let v = llr_11(&x, 0, &model, &[th0.clone()], &[root], &ts, q).unwrap();
        let plug = llr_score(&x, &plug_theta, &th0, root, q, &tree).unwrap();
        let lik: Vec<f64> = draws
            .iter()
            .map(|d| marginal_loglik(&tree, &x, &LossParams::new(d.clone()).unwrap(), root, q).unwrap().exp())
            .collect();
        let (mu, sd) = mean_sd(&lik);
        let se = sd / (lik.len() as f64).sqrt() / mu;
        assert!((v - plug).abs() <= 3.0 * se + 1e-12, "{x:?}: {v} vs {plug} (se {se})");
    }
}
