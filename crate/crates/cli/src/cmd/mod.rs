pub mod benchmark;
pub mod expand;
pub mod partition;
pub mod preprocess;
pub mod simulate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use ecm_core::dpm::SamplerConfig;
use ecm_core::preprocess::PreprocessConfig;
use ecm_core::tree::{parse_newick, parse_tree_set, TreeSet};
use ecm_core::{BetaPrior, ErrorRate};

use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::{read_text, sha256_file, InputDigest, OutDir, RunManifest, Runtime};
use crate::Context;

/// Partition-chain settings shared by `partition` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Partition-chain sweeps.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Concentration of the Chinese restaurant process.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of sweeps discarded before MAP search.
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Draws per marginal-likelihood estimate.
    #[arg(long)]
    pub chib_samples: Option<usize>,
    #[arg(long)]
    pub chib_burn_in: Option<usize>,
    /// Draws per marginal-likelihood estimate inside the tree step.
    #[arg(long)]
    pub tree_chib_samples: Option<usize>,
    /// Observation error rate.
    #[arg(long)]
    pub q: Option<f64>,
    /// Beta prior on loss probabilities.
    #[arg(long)]
    pub prior_a: Option<f64>,
    #[arg(long)]
    pub prior_b: Option<f64>,
}

pub fn sampler_config(r: &mut Resolver, a: &SamplerArgs, seed: u64, default_q: f64) -> Result<SamplerConfig<f64>> {
    let d = SamplerConfig::<f64>::default();
    let cfg = SamplerConfig {
        iterations: r.get("iterations", a.iterations, d.iterations)?,
        alpha: r.get("alpha", a.alpha, d.alpha)?,
        burn_in: r.get("burn_in", a.burn_in, d.burn_in)?,
        chib_samples: r.get("chib_samples", a.chib_samples, d.chib_samples)?,
        chib_burn_in: r.get("chib_burn_in", a.chib_burn_in, d.chib_burn_in)?,
        tree_chib_samples: r.get("tree_chib_samples", a.tree_chib_samples, d.tree_chib_samples)?,
        q: ErrorRate::new(r.get("q", a.q, default_q)?)?,
        prior: BetaPrior::new(r.get("prior_a", a.prior_a, d.prior.a)?, r.get("prior_b", a.prior_b, d.prior.b)?)?,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Background-chain settings; `burn_key` names the burn-in setting.
pub fn preprocess_config(
    r: &mut Resolver,
    sweeps: Option<usize>,
    burn_key: &str,
    burn_in: Option<f64>,
    q: Option<f64>,
    prior: (Option<f64>, Option<f64>),
    seed: u64,
) -> Result<PreprocessConfig<f64>> {
    let d = PreprocessConfig::<f64>::default();
    Ok(PreprocessConfig {
        sweeps: r.get("sweeps", sweeps, d.sweeps)?,
        burn_in: r.get(burn_key, burn_in, d.burn_in)?,
        q: ErrorRate::new(r.get("q", q, d.q.value())?)?,
        prior: BetaPrior::new(r.get("prior_a", prior.0, d.prior.a)?, r.get("prior_b", prior.1, d.prior.b)?)?,
        seed,
    })
}

/// Exactly one of a single tree or a tree-set file; returns the set and its mode.
pub fn load_trees(tree: Option<&Path>, tree_set: Option<&Path>) -> Result<Option<(TreeSet, &'static str)>> {
    match (tree, tree_set) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either --tree or --tree-set, not both".into())),
        (Some(p), None) => {
            let t = parse_newick(read_text(p)?.trim()).map_err(|e| CliError::from(e).at(p))?;
            Ok(Some((TreeSet::single(t), "tree")))
        }
        (None, Some(p)) => {
            let s = parse_tree_set(&read_text(p)?).map_err(|e| CliError::from(e).at(p))?;
            Ok(Some((s, "tree_set")))
        }
        (None, None) => Ok(None),
    }
}

pub struct Inputs(Vec<(String, PathBuf)>);

impl Inputs {
    pub fn new() -> Self {
        Inputs(Vec::new())
    }

    pub fn add(&mut self, role: &str, path: Option<&Path>) {
        if let Some(p) = path {
            self.0.push((role.to_string(), p.to_path_buf()));
        }
    }

    fn digests(&self) -> Result<Vec<InputDigest>> {
        self.0
            .iter()
            .map(|(role, p)| {
                Ok(InputDigest {
                    role: role.clone(),
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect()
    }
}

pub fn finish(
    out: OutDir,
    subcommand: &str,
    seed: u64,
    config: BTreeMap<String, String>,
    inputs: &Inputs,
    ctx: &Context,
) -> Result<()> {
    let manifest = RunManifest {
        subcommand: subcommand.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config,
        inputs: inputs.digests()?,
        outputs: Vec::new(),
        runtime: Runtime {
            threads: ctx.threads,
            wall_seconds: ctx.started.elapsed().as_secs_f64(),
        },
    };
    out.finish(manifest)
}
