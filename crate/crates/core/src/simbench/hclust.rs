//! Average-linkage agglomerative clustering with a singleton-fraction cut.

use crate::profiles::{anticorrelation_distance, hamming_distance, ProfileMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Hamming,
    Anticorrelation,
}

/// One merge: the two cluster ids joined and the linkage height. Clusters
/// `0..n` are the genes; merge `m` creates cluster `n + m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

fn distance_matrix(matrix: &ProfileMatrix, metric: Metric) -> Vec<Vec<f64>> {
    let n = matrix.n_genes();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (matrix.row(i), matrix.row(j));
            let v = match metric {
                Metric::Hamming => hamming_distance(a, b).expect("same width") as f64,
                Metric::Anticorrelation => anticorrelation_distance::<f64>(a, b).expect("same width"),
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Full UPGMA dendrogram. Ties go to the pair with the smallest cluster ids.
pub fn dendrogram(matrix: &ProfileMatrix, metric: Metric) -> Vec<Merge> {
    let n = matrix.n_genes();
    let mut d = distance_matrix(matrix, metric);
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if !alive[j] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj, h)) => {
                        d[i][j] < h || (d[i][j] == h && (id[i].min(id[j]), id[i].max(id[j])) < (id[bi].min(id[bj]), id[bi].max(id[bj])))
                    }
                };
                if better {
                    best = Some((i, j, d[i][j]));
                }
            }
        }
        let (i, j, h) = best.expect("two live clusters");
        merges.push(Merge {
            a: id[i].min(id[j]),
            b: id[i].max(id[j]),
            height: h,
        });
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if alive[k] && k != i && k != j {
                let v = (si * d[i][k] + sj * d[j][k]) / (si + sj);
                d[i][k] = v;
                d[k][i] = v;
            }
        }
        size[i] += size[j];
        alive[j] = false;
        id[i] = n + step;
    }
    merges
}

/// Dense labels (by first appearance in row order) after cutting at the
/// lowest merge height where singleton clusters make up at most
/// `singleton_fraction` of the genes.
pub fn hierarchical_cluster(matrix: &ProfileMatrix, metric: Metric, singleton_fraction: f64) -> Vec<usize> {
    let n = matrix.n_genes();
    let merges = dendrogram(matrix, metric);
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    let mut csize = vec![1usize; 2 * n];
    let mut singletons = n;
    let limit = singleton_fraction * n as f64;
    let mut m = 0;
    while m < merges.len() && (singletons as f64) > limit {
        let h = merges[m].height;
        while m < merges.len() && merges[m].height == h {
            let Merge { a, b, .. } = merges[m];
            let new = n + m;
            for c in [a, b] {
                if csize[c] == 1 {
                    singletons -= 1;
                }
                parent[c] = new;
            }
            csize[new] = csize[a] + csize[b];
            m += 1;
        }
    }
    let mut map = std::collections::HashMap::new();
    (0..n)
        .map(|g| {
            let r = find(&mut parent, g);
            let next = map.len();
            *map.entry(r).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ProfileMatrix;

    fn m(rows: Vec<Vec<u8>>) -> ProfileMatrix {
        let w = rows[0].len();
        ProfileMatrix::from_rows(
            (0..rows.len()).map(|i| format!("g{i}")).collect(),
            (0..w).map(|i| format!("s{i}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_groups_are_recovered() {
        let a = vec![1, 1, 1, 0, 0, 0, 1, 0];
        let b = vec![0, 0, 1, 1, 1, 1, 0, 1];
        let x = m(vec![a.clone(), b.clone(), a.clone(), b.clone(), a, b]);
        assert_eq!(hierarchical_cluster(&x, Metric::Hamming, 0.1), vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(hierarchical_cluster(&x, Metric::Anticorrelation, 0.1), vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn identical_rows_form_one_cluster() {
        let x = m(vec![vec![1, 0, 1]; 5]);
        assert_eq!(hierarchical_cluster(&x, Metric::Hamming, 0.1), vec![0; 5]);
    }

    #[test]
    fn toy_matrix_merges_g4_and_g6_first() {
        let x = ProfileMatrix::parse_tsv(crate::profiles::tests::TOY).unwrap();
        let d = dendrogram(&x, Metric::Hamming);
        let g4 = x.gene_index("G4").unwrap();
        let g6 = x.gene_index("G6").unwrap();
        assert_eq!((d[0].a, d[0].b), (g4.min(g6), g4.max(g6)));
        assert_eq!(d[0].height, 0.0);
    }

    #[test]
    fn heights_never_decrease() {
        let rows: Vec<Vec<u8>> = (0..12u32).map(|i| (0..10).map(|j| ((i * 7 + j * 3) % 5 < 2) as u8).collect()).collect();
        let d = dendrogram(&m(rows), Metric::Hamming);
        assert!(d.windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
    }
}
