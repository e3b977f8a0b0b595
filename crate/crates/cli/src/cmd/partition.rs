use std::path::PathBuf;

use clap::Args;
use ecm_core::dpm::{gibbs_partition, map_assignment};
use ecm_core::treeuncertainty::{gibbs_partition_11, map_assignment_11, tree_frequencies};
use ecm_core::NodeId;

use super::{finish, load_trees, sampler_config, Inputs, SamplerArgs};
use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::{read_gene_list, read_profiles, NullModelFile, OutDir, PartitionFile, TreePosterior};
use crate::{Common, Context};

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Output of `preprocess`.
    #[arg(long)]
    pub null_model: Option<PathBuf>,
    /// Genes to cluster, one per line (default: every gene in the profiles).
    #[arg(long)]
    pub geneset: Option<PathBuf>,
    /// Optional; must match the tree the null model was estimated on.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Optional; must match the null model's tree set.
    #[arg(long)]
    pub tree_set: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

pub fn run(a: PartitionArgs, ctx: &Context) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let profiles = r.required_path("profiles", a.profiles)?;
    let null_path = r.required_path("null_model", a.null_model)?;
    let geneset = r.path("geneset", a.geneset)?;
    let tree = r.path("tree", a.tree)?;
    let tree_set = r.path("tree_set", a.tree_set)?;
    let out = r.out_dir(a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0u64)?;
    let nm = NullModelFile::load(&null_path)?;
    let cfg = sampler_config(&mut r, &a.sampler, seed, nm.config.q)?;
    let resolved = r.finish()?;

    let trees = nm.tree_set().map_err(|e| e.at(&null_path))?;
    if let Some((given, _)) = load_trees(tree.as_deref(), tree_set.as_deref())? {
        nm.check_trees(&given)?;
    }
    let nulls = nm.null_models(&trees).map_err(|e| e.at(&null_path))?;
    let matrix = read_profiles(&profiles)?
        .aligned_to(trees.tree(0))
        .map_err(|e| CliError::from(e).at(&profiles))?;
    let genes = match &geneset {
        Some(p) => read_gene_list(p)?,
        None => matrix.gene_ids().to_vec(),
    };
    let mut clustered = Vec::new();
    let mut skipped = String::from("gene\treason\n");
    let mut lambdas: Vec<Vec<NodeId>> = vec![Vec::new(); trees.len()];
    for g in &genes {
        if matrix.gene_index(g).is_none() {
            return Err(CliError::input(format!("unknown gene `{g}` in the gene set")));
        }
        let mut no_signal = false;
        let mut lams = Vec::with_capacity(nulls.len());
        for n in &nulls {
            let i = n
                .gene_ids
                .iter()
                .position(|m| m == g)
                .ok_or_else(|| CliError::input(format!("gene `{g}` is missing from the null model")))?;
            no_signal |= n.no_signal[i];
            lams.push(n.lambdas[i]);
        }
        if no_signal {
            skipped.push_str(&format!("{g}\tno signal (all-zero profile)\n"));
            continue;
        }
        clustered.push(g.clone());
        for (l, v) in lambdas.iter_mut().zip(lams) {
            l.push(v);
        }
    }
    let sub = matrix.subset(&clustered)?;

    let (assignment, posterior) = if nm.mode == "tree" {
        let trace = gibbs_partition(&sub, trees.tree(0), &lambdas[0], &cfg)?;
        (map_assignment(&trace, &sub, trees.tree(0), &lambdas[0], &cfg)?, None)
    } else {
        let trace = gibbs_partition_11(&sub, &trees, &lambdas, &cfg)?;
        let a = map_assignment_11(&trace, &sub, &trees, &lambdas, &cfg)?;
        let freq = tree_frequencies(&trace, trees.len());
        let post: Vec<TreePosterior> = (0..trees.len())
            .map(|i| TreePosterior {
                tree: i + 1,
                weight: trees.weights()[i],
                frequency: freq[i],
            })
            .collect();
        (a, Some(post))
    };

    let mut dir = OutDir::create(&out)?;
    let mut tsv = String::from("gene\tecm\n");
    for (g, &k) in assignment.gene_ids.iter().zip(&assignment.labels) {
        tsv.push_str(&format!("{g}\t{}\n", k + 1));
    }
    dir.write("partition.tsv", &tsv)?;
    dir.write("skipped.tsv", &skipped)?;
    if let Some(post) = &posterior {
        let mut t = String::from("tree\tweight\tfrequency\n");
        for p in post {
            t.push_str(&format!("{}\t{}\t{}\n", p.tree, p.weight, p.frequency));
        }
        dir.write("tree_posterior.tsv", &t)?;
    }
    dir.write_json("partition.json", &PartitionFile::new(&nm.mode, &cfg, &assignment, posterior))?;
    let mut inputs = Inputs::new();
    inputs.add("profiles", Some(&profiles));
    inputs.add("null_model", Some(&null_path));
    inputs.add("geneset", geneset.as_deref());
    inputs.add("tree", tree.as_deref());
    inputs.add("tree_set", tree_set.as_deref());
    finish(dir, "partition", seed, resolved, &inputs, ctx)
}
