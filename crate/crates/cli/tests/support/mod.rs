#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const TOY_PROFILES: &str = "gene\tS1\tS2\tS3\tS4\tS5\tS6\tS7\tS8
G1\t1\t1\t1\t1\t0\t0\t1\t1
G2\t1\t1\t1\t1\t0\t0\t1\t0
G3\t1\t0\t1\t0\t1\t0\t1\t0
G4\t0\t0\t1\t1\t1\t1\t0\t0
G5\t1\t1\t0\t0\t0\t0\t0\t0
G6\t0\t0\t1\t1\t1\t1\t0\t0
G7\t0\t0\t0\t0\t0\t0\t0\t0
";

pub const TOY_TREE: &str = "(((S1,S2),(S3,S4)),((S5,S6),(S7,S8)));\n";
pub const TOY_TREE_SET: &str = "(((S1,S2),(S3,S4)),((S5,S6),(S7,S8)));\n(((S1,S3),(S2,S4)),((S5,S6),(S7,S8)));\n";

pub fn ecm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecm"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs and asserts success, printing stderr on failure.
pub fn ecm_ok(args: &[&str]) -> Output {
    let out = ecm(args);
    assert!(
        out.status.success(),
        "ecm {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file of `dir`; the manifest loses its runtime block.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = fs::read(&p).unwrap();
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("runtime");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

/// Names of files that differ between two output directories.
pub fn differing(a: &Path, b: &Path) -> Vec<String> {
    let (x, y) = (snapshot(a), snapshot(b));
    let mut names: Vec<String> = x.keys().chain(y.keys()).cloned().collect();
    names.sort();
    names.dedup();
    names.into_iter().filter(|n| x.get(n) != y.get(n)).collect()
}

pub fn read_tsv(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

/// Second column of a `gene<TAB>label` file, in gene order of `genes`.
pub fn labels_for(p: &Path, genes: &[String]) -> Vec<usize> {
    let rows = read_tsv(p);
    let map: BTreeMap<&str, usize> = rows[1..].iter().map(|r| (r[0].as_str(), r[1].parse().unwrap())).collect();
    genes.iter().map(|g| map[g.as_str()]).collect()
}

/// Runs every subcommand with `threads` workers on small settings, then moves
/// the outputs to `root/<tag>`. Every run uses the same paths, so manifests
/// are comparable.
pub fn pipeline(root: &Path, tag: &str, threads: usize) -> Vec<PathBuf> {
    let base = root.join("run");
    fs::create_dir_all(&base).unwrap();
    let t = threads.to_string();
    let sim = base.join("sim");
    ecm_ok(&["simulate", "--out", s(&sim), "--seed", "5", "--ecm-count", "3", "--leaves", "32", "--min-gain-leaves", "16", "--tree-set-size", "3", "--threads", &t]);
    let profiles = root.join("profiles.tsv");
    let tree = root.join("tree.nwk");
    let trees = root.join("trees.nwk");
    if !profiles.exists() {
        fs::copy(sim.join("profiles.tsv"), &profiles).unwrap();
        fs::copy(sim.join("tree.nwk"), &tree).unwrap();
        fs::copy(sim.join("trees.nwk"), &trees).unwrap();
    }
    let mut dirs = vec![sim];
    for (mode, flag, tree_path) in [("one", "--tree", &tree), ("set", "--tree-set", &trees)] {
        let pre = base.join(format!("pre_{mode}"));
        let part = base.join(format!("part_{mode}"));
        let exp = base.join(format!("exp_{mode}"));
        ecm_ok(&["preprocess", "--profiles", s(&profiles), flag, s(tree_path), "--out", s(&pre), "--sweeps", "100", "--seed", "2", "--threads", &t]);
        let null = pre.join("null_model.json");
        ecm_ok(&["partition", "--profiles", s(&profiles), "--null-model", s(&null), "--out", s(&part), "--iterations", "40", "--chib-samples", "100", "--tree-chib-samples", "50", "--seed", "3", "--threads", &t]);
        ecm_ok(&["expand", "--partition", s(&part.join("partition.json")), "--profiles", s(&profiles), "--null-model", s(&null), "--out", s(&exp), "--llr-threshold", "-5", "--threads", &t]);
        dirs.extend([pre, part, exp]);
    }
    let bench = base.join("bench");
    ecm_ok(&["benchmark", "--out", s(&bench), "--grid", "singletons=0,5", "--replicates", "2", "--leaves", "32", "--min-gain-leaves", "16", "--ecm-count", "3", "--tree-set-size", "2", "--iterations", "30", "--chib-samples", "60", "--tree-chib-samples", "30", "--sweeps", "60", "--seed", "4", "--threads", &t]);
    dirs.push(bench);
    let dest = root.join(tag);
    fs::rename(&base, &dest).unwrap();
    dirs.iter().map(|d| dest.join(d.file_name().unwrap())).collect()
}
