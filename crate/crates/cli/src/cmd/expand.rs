use std::path::PathBuf;

use clap::Args;
use ecm_core::expansion::{expand_ecm, ExpansionReport};
use ecm_core::treeuncertainty::{expand_ecm_11, tree_predictive};
use ecm_core::NodeId;

use super::{finish, Inputs};
use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::{read_gene_list, read_profiles, NullModelFile, OutDir, PartitionFile};
use crate::{Common, Context};

#[derive(Debug, Clone, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub common: Common,
    /// `partition.json` from `partition`.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub null_model: Option<PathBuf>,
    /// Candidate genes, one per line (default: every gene in the profiles).
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Candidates need an LLR strictly above this (`inf` lists nothing).
    #[arg(long, allow_negative_numbers = true)]
    pub llr_threshold: Option<f64>,
}

fn hits_tsv(report: &ExpansionReport<f64>, ecms: impl Iterator<Item = usize>) -> String {
    let mut s = String::from("gene\tecm\tllr\trank\n");
    for k in ecms {
        for (rank, h) in report.lists[k].iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{:.6}\t{}\n", report.gene_ids[h.gene], k + 1, h.llr, rank + 1));
        }
    }
    s
}

pub fn run(a: ExpandArgs, ctx: &Context) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let part_path = r.required_path("partition", a.partition)?;
    let profiles = r.required_path("profiles", a.profiles)?;
    let null_path = r.required_path("null_model", a.null_model)?;
    let cand_path = r.path("candidates", a.candidates)?;
    let out = r.out_dir(a.common.out)?;
    let threshold = r.get("llr_threshold", a.llr_threshold, 0.0f64)?;
    if threshold.is_nan() {
        return Err(CliError::input("--llr-threshold must be a number"));
    }
    let part = PartitionFile::load(&part_path)?;
    let seed = r.get("seed", a.common.seed, part.config.seed)?;
    let resolved = r.finish()?;

    let nm = NullModelFile::load(&null_path)?;
    if nm.mode != part.mode {
        return Err(CliError::input(format!(
            "partition was run in `{}` mode but the null model is `{}`",
            part.mode, nm.mode
        )));
    }
    let trees = nm.tree_set().map_err(|e| e.at(&null_path))?;
    let nulls = nm.null_models(&trees).map_err(|e| e.at(&null_path))?;
    let assignment = part.assignment(trees.tree(0)).map_err(|e| e.at(&part_path))?;
    let mut cfg = part.config.to_config()?;
    cfg.seed = seed;
    let matrix = read_profiles(&profiles)?
        .aligned_to(trees.tree(0))
        .map_err(|e| CliError::from(e).at(&profiles))?;
    let candidates = match &cand_path {
        Some(p) => matrix.subset(&read_gene_list(p)?)?,
        None => matrix.clone(),
    };

    let report = if nm.mode == "tree" {
        expand_ecm(&candidates, &assignment, &nulls[0], trees.tree(0), cfg.q, threshold)?
    } else {
        let members = matrix.subset(&assignment.gene_ids)?;
        let lambdas: Vec<Vec<NodeId>> = nulls
            .iter()
            .map(|n| {
                assignment
                    .gene_ids
                    .iter()
                    .map(|g| n.lambda_of(g).ok_or_else(|| CliError::input(format!("gene `{g}` is missing from the null model"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let model = tree_predictive(&members, &assignment, &trees, &lambdas, &cfg)?;
        expand_ecm_11(&candidates, &assignment, &model, &nulls, &trees, cfg.q, threshold)?
    };

    let mut dir = OutDir::create(&out)?;
    dir.write("expansion.tsv", &hits_tsv(&report, 0..report.ecm_count()))?;
    for k in 0..report.ecm_count() {
        dir.write(&format!("ecm_{}.tsv", k + 1), &hits_tsv(&report, k..k + 1))?;
    }
    let mut skipped = String::from("gene\treason\n");
    for (g, why) in &report.skipped {
        skipped.push_str(&format!("{g}\t{why}\n"));
    }
    dir.write("skipped.tsv", &skipped)?;
    let mut inputs = Inputs::new();
    inputs.add("partition", Some(&part_path));
    inputs.add("profiles", Some(&profiles));
    inputs.add("null_model", Some(&null_path));
    inputs.add("candidates", cand_path.as_deref());
    finish(dir, "expand", seed, resolved, &inputs, ctx)
}
