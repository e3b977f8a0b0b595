//! Binary presence/absence profile matrices and the pairwise distances used
//! by the baseline clusterers.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::scalar::Real;
use crate::tree::PhyloTree;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no genes")]
    NoGenes,
    #[error("header must be `gene<TAB>species...` with at least one species")]
    BadHeader,
    #[error("line {line}: expected {expected} values, found {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("gene `{gene}`, species `{species}`: value `{value}` is not 0 or 1")]
    NonBinary {
        gene: String,
        species: String,
        value: String,
    },
    #[error("duplicate gene `{0}`")]
    DuplicateGene(String),
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("species `{0}` is in the profile matrix but not in the tree")]
    SpeciesNotInTree(String),
    #[error("species `{0}` is in the tree but missing from the profile matrix")]
    SpeciesMissing(String),
    #[error("unknown gene `{0}`")]
    UnknownGene(String),
    #[error("profile rows have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// N genes by S species, stored row-major as 0/1 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileMatrix {
    gene_ids: Vec<String>,
    species_ids: Vec<String>,
    cells: Vec<u8>,
}

impl ProfileMatrix {
    pub fn from_rows(
        gene_ids: Vec<String>,
        species_ids: Vec<String>,
        rows: Vec<Vec<u8>>,
    ) -> Result<Self, ProfileError> {
        if gene_ids.is_empty() {
            return Err(ProfileError::NoGenes);
        }
        let s = species_ids.len();
        let mut seen = HashSet::new();
        for sp in &species_ids {
            if !seen.insert(sp) {
                return Err(ProfileError::DuplicateSpecies(sp.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut cells = Vec::with_capacity(gene_ids.len() * s);
        for (i, (g, row)) in gene_ids.iter().zip(&rows).enumerate() {
            if !seen.insert(g) {
                return Err(ProfileError::DuplicateGene(g.clone()));
            }
            if row.len() != s {
                return Err(ProfileError::RaggedRow {
                    line: i + 2,
                    expected: s,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(ProfileError::NonBinary {
                        gene: g.clone(),
                        species: species_ids[j].clone(),
                        value: v.to_string(),
                    });
                }
            }
            cells.extend_from_slice(row);
        }
        if rows.len() != gene_ids.len() {
            return Err(ProfileError::LengthMismatch(gene_ids.len(), rows.len()));
        }
        Ok(ProfileMatrix {
            gene_ids,
            species_ids,
            cells,
        })
    }

    /// Parses the TSV format without reference to a tree; columns stay in file order.
    pub fn parse_tsv(text: &str) -> Result<Self, ProfileError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(ProfileError::NoGenes)?;
        let mut cols = header.split('\t');
        cols.next();
        let species: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
        if species.is_empty() || species.iter().any(String::is_empty) {
            return Err(ProfileError::BadHeader);
        }
        let mut genes = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let mut fields = line.split('\t');
            let gene = fields.next().unwrap_or("").trim().to_string();
            let values: Vec<&str> = fields.map(str::trim).collect();
            if values.len() != species.len() {
                return Err(ProfileError::RaggedRow {
                    line: lineno + 1,
                    expected: species.len(),
                    got: values.len(),
                });
            }
            let mut row = Vec::with_capacity(values.len());
            for (j, v) in values.iter().enumerate() {
                row.push(match *v {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(ProfileError::NonBinary {
                            gene,
                            species: species[j].clone(),
                            value: other.to_string(),
                        })
                    }
                });
            }
            genes.push(gene);
            rows.push(row);
        }
        Self::from_rows(genes, species, rows)
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_species(&self) -> usize {
        self.species_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn species_ids(&self) -> &[String] {
        &self.species_ids
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let s = self.n_species();
        &self.cells[i * s..(i + 1) * s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(self.n_species())
    }

    pub fn gene_index(&self, gene: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == gene)
    }

    /// Columns permuted into the tree's leaf order; the species sets must match.
    pub fn aligned_to(&self, tree: &PhyloTree) -> Result<Self, ProfileError> {
        let col: HashMap<&str, usize> = self
            .species_ids
            .iter()
            .enumerate()
            .map(|(j, s)| (s.as_str(), j))
            .collect();
        for sp in &self.species_ids {
            if tree.leaf_index(sp).is_none() {
                return Err(ProfileError::SpeciesNotInTree(sp.clone()));
            }
        }
        let mut perm = Vec::with_capacity(tree.leaf_count());
        for leaf in tree.leaf_labels() {
            perm.push(
                *col.get(leaf.as_str())
                    .ok_or_else(|| ProfileError::SpeciesMissing(leaf.clone()))?,
            );
        }
        let mut cells = Vec::with_capacity(self.cells.len());
        for row in self.rows() {
            cells.extend(perm.iter().map(|&j| row[j]));
        }
        Ok(ProfileMatrix {
            gene_ids: self.gene_ids.clone(),
            species_ids: tree.leaf_labels().to_vec(),
            cells,
        })
    }

    /// Rows for the named genes, in the given order.
    pub fn subset(&self, genes: &[String]) -> Result<Self, ProfileError> {
        let index: HashMap<&str, usize> = self
            .gene_ids
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(genes.len());
        for g in genes {
            let i = *index
                .get(g.as_str())
                .ok_or_else(|| ProfileError::UnknownGene(g.clone()))?;
            rows.push(self.row(i).to_vec());
        }
        Self::from_rows(genes.to_vec(), self.species_ids.clone(), rows)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene");
        for s in &self.species_ids {
            out.push('\t');
            out.push_str(s);
        }
        out.push('\n');
        for (g, row) in self.gene_ids.iter().zip(self.rows()) {
            out.push_str(g);
            for &v in row {
                out.push('\t');
                out.push(if v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a profile TSV and aligns its columns to the tree's leaf order.
pub fn load_profiles(path: &Path, tree: &PhyloTree) -> Result<ProfileMatrix, ProfileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ProfileMatrix::parse_tsv(&text)?.aligned_to(tree)
}

pub fn hamming_distance(a: &[u8], b: &[u8]) -> Result<usize, ProfileError> {
    if a.len() != b.len() {
        return Err(ProfileError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Squared anti-correlation distance `1 - corr(a, b)^2`.
///
/// A constant row has no defined correlation; the distance is then 1.
pub fn anticorrelation_distance<F: Real>(a: &[u8], b: &[u8]) -> Result<F, ProfileError> {
    if a.len() != b.len() {
        return Err(ProfileError::LengthMismatch(a.len(), b.len()));
    }
    let n = F::of(a.len() as f64);
    let mean = |r: &[u8]| r.iter().map(|&v| F::of(f64::from(v))).sum::<F>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        let dx = F::of(f64::from(x)) - ma;
        let dy = F::of(f64::from(y)) - mb;
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa == F::zero() || sbb == F::zero() {
        log::warn!("constant profile row; correlation distance set to 1");
        return Ok(F::one());
    }
    let r2 = sab * sab / (saa * sbb);
    Ok((F::one() - r2).max(F::zero()))
}
