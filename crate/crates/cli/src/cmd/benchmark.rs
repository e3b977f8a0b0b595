use std::path::Path;

use clap::Args;
use ecm_core::simbench::{mean_ari, results_tsv, run_benchmark, Method, Regime, SimConfig};

use super::simulate::{bench_settings, sim_config, SimArgs};
use super::{finish, preprocess_config, sampler_config, Inputs, SamplerArgs};
use crate::config::Resolver;
use crate::error::{CliError, Result};
use crate::formats::{read_text, OutDir};
use crate::{Common, Context};

pub const DEFAULT_GRID: &str = "loss_branches=4,10;loss_prob=0.6,0.9;singletons=0,20";

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    /// `key=v1,v2;key=v1,...` (or a file holding it); cells are the
    /// cartesian product, last key varying fastest.
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated subset of clime10, clime11, hc_hamming, hc_anticorr.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Singleton fraction at which the hierarchical baselines stop merging.
    #[arg(long)]
    pub singleton_fraction: Option<f64>,
    /// Background-chain sweeps.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Background-chain burn-in fraction.
    #[arg(long)]
    pub null_burn_in: Option<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

fn set_field(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let bad = |e: &dyn std::fmt::Display| CliError::input(format!("grid `{key}={value}`: {e}"));
    match key {
        "regime" => {
            cfg.regime = Regime::parse(value).ok_or_else(|| bad(&"unknown regime"))?;
        }
        "ecm_count" => cfg.ecm_count = value.parse().map_err(|e| bad(&e))?,
        "genes_per_ecm" => cfg.genes_per_ecm = value.parse().map_err(|e| bad(&e))?,
        "loss_branches" => cfg.loss_branches = value.parse().map_err(|e| bad(&e))?,
        "loss_prob" => cfg.loss_prob = value.parse().map_err(|e| bad(&e))?,
        "singletons" => cfg.singletons = value.parse().map_err(|e| bad(&e))?,
        "q_sim" => cfg.q_sim = value.parse().map_err(|e| bad(&e))?,
        "min_gain_leaves" => cfg.min_gain_leaves = value.parse().map_err(|e| bad(&e))?,
        _ => return Err(CliError::input(format!("unknown grid key `{key}`"))),
    }
    Ok(())
}

pub fn parse_grid(spec: &str, base: &SimConfig) -> Result<Vec<SimConfig>> {
    let mut cells = vec![base.clone()];
    for part in spec.split([';', '\n']).map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("grid entry `{part}` is not key=values")))?;
        let key = key.trim().replace('-', "_");
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(CliError::input(format!("grid key `{key}` has no values")));
        }
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for c in &cells {
            for v in &values {
                let mut c = c.clone();
                set_field(&mut c, &key, v)?;
                next.push(c);
            }
        }
        cells = next;
    }
    for c in &cells {
        c.validate()?;
    }
    Ok(cells)
}

pub fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for m in spec.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let m = Method::parse(m)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::input("no methods given"));
    }
    Ok(out)
}

pub fn run(a: BenchmarkArgs, ctx: &Context) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let out = r.out_dir(a.common.out)?;
    let seed = r.get("seed", a.common.seed, 0u64)?;
    let grid = r.get("grid", a.grid, DEFAULT_GRID.to_string())?;
    let default_methods = Method::ALL.map(Method::name).join(",");
    let methods = parse_methods(&r.get("methods", a.methods, default_methods)?)?;
    let replicates = r.get("replicates", a.replicates, 20usize)?;
    let base = sim_config(&mut r, &a.sim)?;
    let mut settings = bench_settings(&mut r, &a.sim, seed)?;
    settings.singleton_fraction = r.get("singleton_fraction", a.singleton_fraction, settings.singleton_fraction)?;
    settings.sampler = sampler_config(&mut r, &a.sampler, seed, settings.sampler.q.value())?;
    settings.preprocess = preprocess_config(
        &mut r,
        a.sweeps,
        "null_burn_in",
        a.null_burn_in,
        a.sampler.q,
        (a.sampler.prior_a, a.sampler.prior_b),
        seed,
    )?;
    let resolved = r.finish()?;

    let grid_path = Path::new(&grid);
    let mut inputs = Inputs::new();
    let spec = if grid_path.is_file() {
        inputs.add("grid", Some(grid_path));
        read_text(grid_path)?
    } else {
        grid.clone()
    };
    let cells = parse_grid(&spec, &base)?;
    let rows = run_benchmark(&cells, &methods, replicates, &settings)?;

    let mut dir = OutDir::create(&out)?;
    dir.write("results.tsv", &results_tsv(&rows))?;
    let mut summary = String::from("cell\tregime\tloss_branches\tloss_prob\tsingletons\tmethod\treplicates\tmean_ari\n");
    for (c, m, v) in mean_ari(&rows) {
        let cfg = &cells[c];
        summary.push_str(&format!(
            "{c}\t{}\t{}\t{}\t{}\t{}\t{replicates}\t{v:.6}\n",
            cfg.regime.name(),
            cfg.loss_branches,
            cfg.loss_prob,
            cfg.singletons,
            m.name()
        ));
    }
    dir.write("summary.tsv", &summary)?;
    finish(dir, "benchmark", seed, resolved, &inputs, ctx)
}
