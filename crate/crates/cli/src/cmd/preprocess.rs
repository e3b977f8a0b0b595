use std::path::PathBuf;

use clap::Args;
use ecm_core::preprocess::estimate_null;

use super::{finish, load_trees, preprocess_config, Inputs};
use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::{read_profiles, NullModelFile, OutDir, PreprocessSettings};
use crate::{Common, Context};

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Profile matrix TSV (`gene<TAB>species...`).
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Rooted Newick tree.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// One Newick tree per line; a background model is estimated per tree.
    #[arg(long)]
    pub tree_set: Option<PathBuf>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub prior_a: Option<f64>,
    #[arg(long)]
    pub prior_b: Option<f64>,
}

pub fn run(a: PreprocessArgs, ctx: &Context) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let profiles = r.required_path("profiles", a.profiles)?;
    let tree = r.path("tree", a.tree)?;
    let tree_set = r.path("tree_set", a.tree_set)?;
    let out = r.out_dir(a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0u64)?;
    let cfg = preprocess_config(&mut r, a.sweeps, "burn_in", a.burn_in, a.q, (a.prior_a, a.prior_b), seed)?;
    let resolved = r.finish()?;

    let (trees, mode) = load_trees(tree.as_deref(), tree_set.as_deref())?
        .ok_or_else(|| CliError::Usage("missing required option --tree or --tree-set".into()))?;
    let matrix = read_profiles(&profiles)?
        .aligned_to(trees.tree(0))
        .map_err(|e| CliError::from(e).at(&profiles))?;
    let mut nulls = Vec::with_capacity(trees.len());
    for (i, t) in trees.trees().iter().enumerate() {
        log::info!("background chain on tree {} of {}", i + 1, trees.len());
        nulls.push(estimate_null(&matrix, t, &cfg)?);
    }
    let settings = PreprocessSettings {
        sweeps: cfg.sweeps,
        burn_in: cfg.burn_in,
        q: cfg.q.value(),
        prior_a: cfg.prior.a,
        prior_b: cfg.prior.b,
    };
    let mut dir = OutDir::create(&out)?;
    dir.write_json("null_model.json", &NullModelFile::new(seed, mode, settings, &trees, &nulls))?;
    let mut inputs = Inputs::new();
    inputs.add("profiles", Some(&profiles));
    inputs.add("tree", tree.as_deref());
    inputs.add("tree_set", tree_set.as_deref());
    finish(dir, "preprocess", seed, resolved, &inputs, ctx)
}
