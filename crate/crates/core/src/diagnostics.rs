//! Embedding-level measurements: distance-to-origin statistics, cosine
//! distances between input, projected and replaced embeddings, and
//! cumulative explained-variance curves.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::parallel;
use crate::store::EmbeddingMatrix;

/// Label attached to similarity reports: the tabulated values are distances.
pub const COSINE_METRIC: &str = "cosine distance = 1 - cosine similarity";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellReport {
    pub count: usize,
    pub mean_norm: f64,
    /// Population standard deviation.
    pub std_norm: f64,
    pub min_norm: f64,
    pub max_norm: f64,
    pub relative_spread: f64,
}

pub fn row_norms(data: &EmbeddingMatrix) -> Vec<f64> {
    parallel::map_indices(data.count(), |i| {
        let row: Vec<f64> = data.row(i).iter().map(|&x| x as f64).collect();
        norm(&row)
    })
}

pub fn shell_report(data: &EmbeddingMatrix) -> ShellReport {
    let norms = row_norms(data);
    let (mean, std) = mean_std(&norms);
    ShellReport {
        count: norms.len(),
        mean_norm: mean,
        std_norm: std,
        min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        max_norm: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        relative_spread: if mean > 0.0 { std / mean } else { 0.0 },
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::Data("no values to bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: lo + i as f64 * width,
            bin_right: if i + 1 == bins { hi.max(lo + width) } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect())
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.bin_left, b.bin_right, b.count);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityTriple {
    pub index: usize,
    pub d_input_replace: f64,
    pub d_project_replace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityTable {
    pub rows: Vec<SimilarityTriple>,
    pub d_input_replace: MeanStd,
    pub d_project_replace: MeanStd,
}

/// `1 - cos(a, b)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0))
}

pub fn similarity_table(
    inputs: &EmbeddingMatrix,
    projected: &EmbeddingMatrix,
    replaced: &EmbeddingMatrix,
) -> Result<SimilarityTable> {
    for m in [projected, replaced] {
        if m.count() != inputs.count() {
            return Err(Error::Data(format!("row counts differ: {} vs {}", inputs.count(), m.count())));
        }
        if m.dim() != inputs.dim() {
            return Err(Error::Dim { expected: inputs.dim(), actual: m.dim() });
        }
    }
    let triples = parallel::map_indices(inputs.count(), |i| {
        let (x, p, r) = (inputs.row_vector(i), projected.row_vector(i), replaced.row_vector(i));
        let d_in = cosine_distance(x.as_slice(), r.as_slice());
        let d_pr = cosine_distance(p.as_slice(), r.as_slice());
        match (d_in, d_pr) {
            (Some(a), Some(b)) => Ok(SimilarityTriple { index: i, d_input_replace: a, d_project_replace: b }),
            _ => Err(Error::Data(format!("row {i} has a zero-norm embedding"))),
        }
    });
    let rows = triples.into_iter().collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = rows.iter().map(|t| t.d_input_replace).collect();
    let b: Vec<f64> = rows.iter().map(|t| t.d_project_replace).collect();
    let (ma, sa) = mean_std(&a);
    let (mb, sb) = mean_std(&b);
    Ok(SimilarityTable {
        rows,
        d_input_replace: MeanStd { mean: ma, std: sa },
        d_project_replace: MeanStd { mean: mb, std: sb },
    })
}

/// `(k, cumulative ratio)` for `k = 1..=len`, ending at exactly 1.
pub fn evr_curve(values: &[f64]) -> Result<Vec<(usize, f64)>> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data("principal values must be finite and nonnegative".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Data("all principal values are zero".into()));
    }
    let mut cumulative = 0.0;
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            cumulative += v;
            (i + 1, cumulative / total)
        })
        .collect())
}

/// Envelope shared by every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: &'static str,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Value>,
    pub summary: Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
