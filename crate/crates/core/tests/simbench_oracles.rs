mod common;

use ecm_core::dpm::{gibbs_partition, map_assignment, SamplerConfig};
use ecm_core::preprocess::{estimate_null, PreprocessConfig};
use ecm_core::rng::{derive_seed, stream};
use ecm_core::simbench::*;
use ecm_core::tree::TreeSet;
use ecm_core::treehmm::{complete_loglik, ErrorRate, LossParams};
use ecm_core::treeuncertainty::{gibbs_partition_11, tree_frequencies};
use proptest::prelude::*;
use rand::seq::SliceRandom;

#[test]
fn ari_hand_value() {
    // contingency {2,1},{0,2}: index 2, row pairs 4, column pairs 4, total 10
    let v = adjusted_rand_index(&[1, 1, 1, 2, 2], &[1, 1, 2, 2, 2]).unwrap();
    let expected = (2.0 - 4.0 * 4.0 / 10.0) / (4.0 - 1.6);
    assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    assert!((v - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn ari_of_random_permutations_is_near_zero() {
    let mut rng = stream(1, "ari", 0);
    let base: Vec<usize> = (0..60).map(|i| i / 10).collect();
    let n = 1000;
    let mut total = 0.0;
    for _ in 0..n {
        let mut p = base.clone();
        p.shuffle(&mut rng);
        total += adjusted_rand_index(&base, &p).unwrap();
    }
    let mean = total / n as f64;
    assert!(mean.abs() < 0.05, "mean {mean}");
}

proptest! {
    #[test]
    fn ari_is_symmetric_bounded_and_label_invariant(
        a in proptest::collection::vec(0usize..4, 2..30),
        seed in 0u64..1000,
    ) {
        let mut rng = stream(seed, "ari-prop", 0);
        let b: Vec<usize> = a.iter().map(|_| rand::Rng::random_range(&mut rng, 0..3)).collect();
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ba = adjusted_rand_index(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        let renamed: Vec<usize> = a.iter().map(|&x| 7 * x + 3).collect();
        prop_assert!((adjusted_rand_index(&renamed, &b).unwrap() - ab).abs() < 1e-12);
        prop_assert_eq!(adjusted_rand_index(&a, &renamed).unwrap(), 1.0);
    }

    #[test]
    fn generated_histories_are_feasible_and_noise_free_rows_match(
        seed in 0u64..500,
        leaves in 8usize..40,
    ) {
        let mut rng = stream(seed, "gen-prop", 0);
        let tree = random_tree(leaves, &mut rng).unwrap();
        let cfg = SimConfig {
            ecm_count: 2,
            genes_per_ecm: 3,
            loss_branches: 3,
            loss_prob: 0.7,
            singletons: 2,
            q_sim: 0.0,
            min_gain_leaves: 4,
            ..SimConfig::default()
        };
        let data = simulate_tree_based(&TreeSet::single(tree.clone()), &cfg, &mut rng).unwrap();
        prop_assert_eq!(data.labels.len(), cfg.gene_count());
        for i in 0..data.labels.len() {
            let h = &data.histories[i];
            prop_assert!(h.is_consistent(&tree));
            let theta = LossParams::new(data.thetas[data.labels[i]].clone()).unwrap();
            let ll = complete_loglik(&tree, data.matrix.row(i), h, &theta, ErrorRate::new(0.0).unwrap()).unwrap();
            prop_assert!(ll.is_finite());
            let leaves_present: Vec<u8> = h.leaf_states(&tree).iter().map(|&p| u8::from(p)).collect();
            prop_assert_eq!(data.matrix.row(i), &leaves_present[..]);
        }
    }
}

#[test]
fn planted_pair_of_modules_is_recovered() {
    let cfg = SimConfig {
        ecm_count: 2,
        ..SimConfig::default()
    };
    let mut good = 0;
    for rep in 0..20u64 {
        let mut rng = stream(21, "planted", rep);
        let tree = random_tree(64, &mut rng).unwrap();
        let disjoint = |t: &[Vec<f64>]| t[0].iter().zip(&t[1]).all(|(a, b)| *a == 0.0 || *b == 0.0);
        let data = loop {
            let d = simulate_tree_based(&TreeSet::single(tree.clone()), &cfg, &mut rng).unwrap();
            if disjoint(&d.thetas) {
                break d;
            }
        };
        let seed = derive_seed(21, "planted/fit", rep);
        let pre = PreprocessConfig::<f64> {
            seed,
            ..PreprocessConfig::default()
        };
        let null = estimate_null(&data.matrix, &tree, &pre).unwrap();
        let sc = SamplerConfig::<f64> {
            iterations: 200,
            seed,
            ..SamplerConfig::default()
        };
        let trace = gibbs_partition(&data.matrix, &tree, &null.lambdas, &sc).unwrap();
        let a = map_assignment(&trace, &data.matrix, &tree, &null.lambdas, &sc).unwrap();
        if adjusted_rand_index(&a.labels, &data.labels).unwrap() >= 0.9 {
            good += 1;
        }
    }
    assert!(good >= 18, "{good}/20 replicates reached ARI 0.9");
}

#[test]
fn coherent_tree_is_preferred_over_a_scrambled_one() {
    let mut rng = stream(31, "coherent", 0);
    let coherent = random_tree(64, &mut rng).unwrap();
    let scrambled = random_tree(64, &mut rng).unwrap().with_leaf_order(coherent.leaf_labels()).unwrap();
    let cfg = SimConfig {
        ecm_count: 3,
        ..SimConfig::default()
    };
    let data = simulate_tree_based(&TreeSet::single(coherent.clone()), &cfg, &mut rng).unwrap();
    let trees = TreeSet::uniform(vec![coherent, scrambled]).unwrap();
    let pre = PreprocessConfig::<f64> {
        seed: 3,
        ..PreprocessConfig::default()
    };
    let lambdas: Vec<Vec<usize>> = trees
        .trees()
        .iter()
        .map(|t| estimate_null(&data.matrix, t, &pre).unwrap().lambdas)
        .collect();
    let sc = SamplerConfig::<f64> {
        iterations: 100,
        seed: 3,
        ..SamplerConfig::default()
    };
    let trace = gibbs_partition_11(&data.matrix, &trees, &lambdas, &sc).unwrap();
    let freq = tree_frequencies(&trace, 2);
    assert!(freq[0] > 0.8, "coherent tree frequency {}", freq[0]);
}

#[test]
fn generating_parameters_beat_a_permuted_control() {
    let mut rng = stream(51, "self-consistency", 0);
    let tree = random_tree(64, &mut rng).unwrap();
    let data = simulate_tree_based(&TreeSet::single(tree.clone()), &SimConfig::default(), &mut rng).unwrap();
    let q = ErrorRate::new(0.02).unwrap();
    let floor = |t: &[f64]| LossParams::new(t.iter().map(|v| v.max(1e-3)).collect()).unwrap();
    let (mut own, mut control) = (0.0, 0.0);
    for i in 0..data.labels.len() {
        let theta = &data.thetas[data.labels[i]];
        let mut permuted = theta.clone();
        permuted.shuffle(&mut rng);
        let (x, h) = (data.matrix.row(i), &data.histories[i]);
        own += complete_loglik(&tree, x, h, &floor(theta), q).unwrap();
        control += complete_loglik(&tree, x, h, &floor(&permuted), q).unwrap();
    }
    assert!(own > control, "{own} vs {control}");
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn hamming_baseline_decays_with_singletons() {
    let counts = [0usize, 10, 20, 50];
    let cells: Vec<SimConfig> = counts
        .iter()
        .map(|&s| SimConfig {
            singletons: s,
            ..SimConfig::default()
        })
        .collect();
    let rows = run_benchmark(&cells, &[Method::HcHamming], 20, &BenchSettings::default()).unwrap();
    let means: Vec<f64> = mean_ari(&rows).into_iter().map(|(_, _, m)| m).collect();
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let rho = spearman(&xs, &means);
    assert!(rho < 0.0, "rho {rho}, means {means:?}");
}
