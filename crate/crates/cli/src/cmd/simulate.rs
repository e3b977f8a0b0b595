use clap::Args;
use ecm_core::simbench::{replicate_data, BenchSettings, Regime, SimConfig};

use super::{finish, Inputs};
use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::OutDir;
use crate::{Common, Context};

/// Generator settings shared by `simulate` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Leaves of the random tree.
    #[arg(long)]
    pub leaves: Option<usize>,
    /// Trees in the candidate set (NNI perturbations of the first).
    #[arg(long)]
    pub tree_set_size: Option<usize>,
    #[arg(long)]
    pub nni_moves: Option<usize>,
    /// `tree_based` or `tree_independent`.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub ecm_count: Option<usize>,
    #[arg(long)]
    pub genes_per_ecm: Option<usize>,
    #[arg(long)]
    pub loss_branches: Option<usize>,
    #[arg(long)]
    pub loss_prob: Option<f64>,
    #[arg(long)]
    pub singletons: Option<usize>,
    #[arg(long)]
    pub q_sim: Option<f64>,
    #[arg(long)]
    pub min_gain_leaves: Option<usize>,
}

pub fn sim_config(r: &mut Resolver, a: &SimArgs) -> Result<SimConfig> {
    let d = SimConfig::default();
    let regime = r.get("regime", a.regime.clone(), d.regime.name().to_string())?;
    let cfg = SimConfig {
        regime: Regime::parse(&regime).ok_or_else(|| CliError::input(format!("unknown regime `{regime}`")))?,
        ecm_count: r.get("ecm_count", a.ecm_count, d.ecm_count)?,
        genes_per_ecm: r.get("genes_per_ecm", a.genes_per_ecm, d.genes_per_ecm)?,
        loss_branches: r.get("loss_branches", a.loss_branches, d.loss_branches)?,
        loss_prob: r.get("loss_prob", a.loss_prob, d.loss_prob)?,
        singletons: r.get("singletons", a.singletons, d.singletons)?,
        q_sim: r.get("q_sim", a.q_sim, d.q_sim)?,
        min_gain_leaves: r.get("min_gain_leaves", a.min_gain_leaves, d.min_gain_leaves)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Tree settings; sampler and preprocess fields stay at their defaults.
pub fn bench_settings(r: &mut Resolver, a: &SimArgs, seed: u64) -> Result<BenchSettings> {
    let d = BenchSettings::default();
    let s = BenchSettings {
        leaves: r.get("leaves", a.leaves, d.leaves)?,
        tree_set_size: r.get("tree_set_size", a.tree_set_size, d.tree_set_size)?,
        nni_moves: r.get("nni_moves", a.nni_moves, d.nni_moves)?,
        seed,
        ..d
    };
    if s.leaves < 2 || s.tree_set_size == 0 {
        return Err(CliError::input("need at least 2 leaves and at least 1 tree"));
    }
    Ok(s)
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
}

pub fn run(a: SimulateArgs, ctx: &Context) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let out = r.out_dir(a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0u64)?;
    let cfg = sim_config(&mut r, &a.sim)?;
    let settings = bench_settings(&mut r, &a.sim, seed)?;
    let resolved = r.finish()?;

    let (trees, data) = replicate_data(0, &cfg, 0, &settings)?;
    let mut dir = OutDir::create(&out)?;
    dir.write("profiles.tsv", &data.matrix.to_tsv())?;
    let mut truth = String::from("gene\tecm\tgain\n");
    for (i, g) in data.matrix.gene_ids().iter().enumerate() {
        truth.push_str(&format!("{g}\t{}\t{}\n", data.labels[i] + 1, data.gains[i] + 1));
    }
    dir.write("truth.tsv", &truth)?;
    let set: String = trees.trees().iter().map(|t| t.render() + "\n").collect();
    dir.write("trees.nwk", &set)?;
    dir.write("tree.nwk", &(trees.tree(data.tree_index).render() + "\n"))?;
    finish(dir, "simulate", seed, resolved, &Inputs::new(), ctx)
}
