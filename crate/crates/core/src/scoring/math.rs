//! Pure numeric routines behind the analysis diagrams.

use super::ScoringError;

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ScoringError> {
    if u.len() != v.len() {
        return Err(ScoringError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(ScoringError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Affine rescale onto `[0, 1]`. A constant input maps to all `0.5`.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return vec![0.5; values.len()];
    }
    let range = max - min;
    values.iter().map(|v| ((v - min) / range).clamp(0.0, 1.0)).collect()
}

/// Rank-based map onto the grid `{i/(n-1)}`. Tied values share the mean of
/// the grid positions they occupy. A single value maps to `0.5`.
pub fn quantile_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.5];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let step = (n - 1) as f64;
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j, mean rank (i + j) / 2
        let grid = (i + j) as f64 / 2.0 / step;
        for &k in &order[i..=j] {
            out[k] = grid;
        }
        i = j + 1;
    }
    out
}

/// Arithmetic mean of two sentiment scores.
pub fn pair_mean(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}
