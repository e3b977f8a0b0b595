use std::collections::HashMap;

use super::SimError;

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert-Arabie adjusted Rand index. When both partitions are trivial in
/// the same way the index is undefined; it is then 1 for identical
/// partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, SimError> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as u64;
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = if n < 2 { 0.0 } else { sa * sb / pairs(n) };
    let max = (sa + sb) / 2.0;
    if max == expected {
        let same = cells.len() == rows.len() && cells.len() == cols.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
