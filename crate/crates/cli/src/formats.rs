//! On-disk formats. Node ids and module ids in files are 1-based.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ecm_core::dpm::{EcmAssignment, SamplerConfig};
use ecm_core::preprocess::NullModel;
use ecm_core::tree::{parse_newick, PhyloTree, TreeSet};
use ecm_core::{BetaPrior, ErrorRate, LossParams, ProfileMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const NULL_FORMAT: &str = "ecm-null-model";
pub const PARTITION_FORMAT: &str = "ecm-partition";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchValue {
    pub node: usize,
    pub loss: f64,
}

fn branch_values(theta: &LossParams<f64>) -> Vec<BranchValue> {
    theta
        .as_slice()
        .iter()
        .enumerate()
        .map(|(s, &loss)| BranchValue { node: s + 1, loss })
        .collect()
}

fn loss_params(values: &[BranchValue], tree: &PhyloTree) -> Result<LossParams<f64>> {
    let mut theta = vec![f64::NAN; tree.branch_count()];
    for v in values {
        if v.node == 0 || v.node > theta.len() {
            return Err(CliError::input(format!("branch {} is not a branch of the tree", v.node)));
        }
        theta[v.node - 1] = v.loss;
    }
    if let Some(s) = theta.iter().position(|v| v.is_nan()) {
        return Err(CliError::input(format!("no loss probability for branch {}", s + 1)));
    }
    Ok(LossParams::new(theta)?)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PreprocessSettings {
    pub sweeps: usize,
    pub burn_in: f64,
    pub q: f64,
    pub prior_a: f64,
    pub prior_b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GeneGain {
    pub gene: String,
    pub lambda: usize,
    pub lambda_mass: f64,
    pub no_signal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeNull {
    pub newick: String,
    pub weight: f64,
    pub lambda_move_rate: f64,
    pub theta0: Vec<BranchValue>,
    pub genes: Vec<GeneGain>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NullModelFile {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    /// `tree` or `tree_set`.
    pub mode: String,
    pub config: PreprocessSettings,
    pub species: Vec<String>,
    pub trees: Vec<TreeNull>,
}

impl NullModelFile {
    pub fn new(
        seed: u64,
        mode: &str,
        config: PreprocessSettings,
        trees: &TreeSet,
        nulls: &[NullModel<f64>],
    ) -> Self {
        NullModelFile {
            format: NULL_FORMAT.into(),
            version: 1,
            seed,
            mode: mode.into(),
            config,
            species: trees.leaf_labels().to_vec(),
            trees: trees
                .trees()
                .iter()
                .zip(trees.weights())
                .zip(nulls)
                .map(|((t, &w), n)| TreeNull {
                    newick: t.render(),
                    weight: w,
                    lambda_move_rate: n.lambda_move_rate,
                    theta0: branch_values(&n.theta0),
                    genes: (0..n.gene_ids.len())
                        .map(|i| GeneGain {
                            gene: n.gene_ids[i].clone(),
                            lambda: n.lambdas[i] + 1,
                            lambda_mass: n.lambda_mass[i],
                            no_signal: n.no_signal[i],
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: NullModelFile = read_json(path)?;
        if f.format != NULL_FORMAT {
            return Err(CliError::input(format!("not a null-model file (format `{}`)", f.format)).at(path));
        }
        if f.trees.is_empty() {
            return Err(CliError::input("null model lists no trees").at(path));
        }
        Ok(f)
    }

    pub fn tree_set(&self) -> Result<TreeSet> {
        let trees = self
            .trees
            .iter()
            .map(|t| Ok(parse_newick(&t.newick)?.with_leaf_order(&self.species)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeSet::new(trees, self.trees.iter().map(|t| t.weight).collect())?)
    }

    pub fn null_models(&self, trees: &TreeSet) -> Result<Vec<NullModel<f64>>> {
        self.trees
            .iter()
            .zip(trees.trees())
            .map(|(t, tree)| {
                for g in &t.genes {
                    if g.lambda == 0 || g.lambda > tree.node_count() {
                        return Err(CliError::input(format!("gene {}: gain node {} is not in the tree", g.gene, g.lambda)));
                    }
                }
                Ok(NullModel {
                    gene_ids: t.genes.iter().map(|g| g.gene.clone()).collect(),
                    theta0: loss_params(&t.theta0, tree)?,
                    lambdas: t.genes.iter().map(|g| g.lambda - 1).collect(),
                    lambda_mass: t.genes.iter().map(|g| g.lambda_mass).collect(),
                    no_signal: t.genes.iter().map(|g| g.no_signal).collect(),
                    lambda_move_rate: t.lambda_move_rate,
                })
            })
            .collect()
    }

    /// Checks that `trees` are the trees the model was estimated on.
    pub fn check_trees(&self, trees: &TreeSet) -> Result<()> {
        let own = self.tree_set()?;
        if own.len() != trees.len() {
            return Err(CliError::input(format!(
                "null model was estimated on {} tree(s), {} given",
                own.len(),
                trees.len()
            )));
        }
        let given = trees.with_leaf_order(&self.species)?;
        for (i, (a, b)) in own.trees().iter().zip(given.trees()).enumerate() {
            if a.render() != b.render() {
                return Err(CliError::input(format!("tree {} differs from the null model's tree", i + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplerSettings {
    pub alpha: f64,
    pub iterations: usize,
    pub burn_in: f64,
    pub chib_samples: usize,
    pub chib_burn_in: usize,
    pub tree_chib_samples: usize,
    pub q: f64,
    pub prior_a: f64,
    pub prior_b: f64,
    pub seed: u64,
}

impl SamplerSettings {
    pub fn from_config(c: &SamplerConfig<f64>) -> Self {
        SamplerSettings {
            alpha: c.alpha,
            iterations: c.iterations,
            burn_in: c.burn_in,
            chib_samples: c.chib_samples,
            chib_burn_in: c.chib_burn_in,
            tree_chib_samples: c.tree_chib_samples,
            q: c.q.value(),
            prior_a: c.prior.a,
            prior_b: c.prior.b,
            seed: c.seed,
        }
    }

    pub fn to_config(&self) -> Result<SamplerConfig<f64>> {
        Ok(SamplerConfig {
            alpha: self.alpha,
            prior: BetaPrior::new(self.prior_a, self.prior_b)?,
            q: ErrorRate::new(self.q)?,
            iterations: self.iterations,
            burn_in: self.burn_in,
            chib_samples: self.chib_samples,
            chib_burn_in: self.chib_burn_in,
            tree_chib_samples: self.tree_chib_samples,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EcmEntry {
    pub id: usize,
    pub genes: Vec<String>,
    pub strength: f64,
    pub log_marginal: f64,
    pub theta_hat: Vec<BranchValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreePosterior {
    pub tree: usize,
    pub weight: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PartitionFile {
    pub format: String,
    pub version: u32,
    /// `tree` or `tree_set`, copied from the null model.
    pub mode: String,
    pub config: SamplerSettings,
    pub map_score: f64,
    /// 1-based sweep of the selected snapshot.
    pub map_iteration: usize,
    pub map_tree: usize,
    /// Clustered genes, in chain order.
    pub genes: Vec<String>,
    pub ecms: Vec<EcmEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_posterior: Option<Vec<TreePosterior>>,
}

impl PartitionFile {
    pub fn new(mode: &str, cfg: &SamplerConfig<f64>, a: &EcmAssignment<f64>, tree_posterior: Option<Vec<TreePosterior>>) -> Self {
        PartitionFile {
            format: PARTITION_FORMAT.into(),
            version: 1,
            mode: mode.into(),
            config: SamplerSettings::from_config(cfg),
            map_score: a.score,
            map_iteration: a.iteration + 1,
            map_tree: a.tree + 1,
            genes: a.gene_ids.clone(),
            ecms: (0..a.k())
                .map(|k| EcmEntry {
                    id: k + 1,
                    genes: a.members(k).into_iter().map(|i| a.gene_ids[i].clone()).collect(),
                    strength: a.strengths[k],
                    log_marginal: a.log_marginals[k],
                    theta_hat: branch_values(&a.theta_hat[k]),
                })
                .collect(),
            tree_posterior,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: PartitionFile = read_json(path)?;
        if f.format != PARTITION_FORMAT {
            return Err(CliError::input(format!("not a partition file (format `{}`)", f.format)).at(path));
        }
        Ok(f)
    }

    pub fn assignment(&self, tree: &PhyloTree) -> Result<EcmAssignment<f64>> {
        let index: BTreeMap<&str, usize> = self.genes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let mut labels = vec![usize::MAX; self.genes.len()];
        for (k, e) in self.ecms.iter().enumerate() {
            if e.id != k + 1 {
                return Err(CliError::input(format!("module ids must run 1..K in order, found {}", e.id)));
            }
            for g in &e.genes {
                let i = *index
                    .get(g.as_str())
                    .ok_or_else(|| CliError::input(format!("module {} lists unknown gene {g}", e.id)))?;
                if labels[i] != usize::MAX {
                    return Err(CliError::input(format!("gene {g} is in more than one module")));
                }
                labels[i] = k;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(CliError::input(format!("gene {} is in no module", self.genes[i])));
        }
        Ok(EcmAssignment {
            gene_ids: self.genes.clone(),
            labels,
            strengths: self.ecms.iter().map(|e| e.strength).collect(),
            theta_hat: self
                .ecms
                .iter()
                .map(|e| loss_params(&e.theta_hat, tree))
                .collect::<Result<_>>()?,
            log_marginals: self.ecms.iter().map(|e| e.log_marginal).collect(),
            score: self.map_score,
            iteration: self.map_iteration.saturating_sub(1),
            tree: self.map_tree.saturating_sub(1),
        })
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(e).at(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::from(e).at(path))
}

pub fn read_profiles(path: &Path) -> Result<ProfileMatrix> {
    ProfileMatrix::parse_tsv(&read_text(path)?).map_err(|e| CliError::from(e).at(path))
}

/// One gene name per line; blank lines and `#` comments are ignored.
pub fn read_gene_list(path: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for line in read_text(path)?.lines() {
        let g = line.trim();
        if g.is_empty() || g.starts_with('#') {
            continue;
        }
        if out.iter().any(|o| o == g) {
            return Err(CliError::input(format!("duplicate gene `{g}`")).at(path));
        }
        out.push(g.to_string());
    }
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::input(e).at(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Runtime {
    pub threads: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Everything here may differ between otherwise identical runs.
    pub runtime: Runtime,
}

/// Output directory that remembers which files were written.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::input(e).at(dir))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, content).map_err(|e| CliError::input(e).at(&p))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<()> {
        self.written.sort();
        manifest.outputs = self.written.clone();
        self.write_json("manifest.json", &manifest)
    }
}
