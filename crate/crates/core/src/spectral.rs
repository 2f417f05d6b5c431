//! PCA over embedding matrices.
//!
//! Spectra are eigen-decompositions of the second-moment matrix `DᵀD / m`
//! (uncentered by default, since the embeddings sit on a shell around the
//! origin) or of the covariance when centering is requested. When `d ≤ m` the
//! `d × d` moment matrix is accumulated in row chunks; otherwise the `m × m`
//! Gram matrix is used and axes are mapped back through the data.
//!
//! Accumulation runs in `f64`. Each output entry is summed over data rows in
//! file order by exactly one task, so results do not depend on thread count
//! or chunk size.

use crate::error::{Error, Result};
use crate::linalg::{self, canonical_sign, dot, orthonormalize_rows};
use crate::parallel;
use crate::store::{EmbeddingMatrix, EmbeddingVector, SourceRef};

/// Output rows of the moment matrix handled by one task.
const MOMENT_BLOCK: usize = 32;

/// Relative tolerance below which a negative eigenvalue is treated as round-off.
const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Principal axes (rows, descending by value) with their principal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axes: Vec<f64>,
    values: Vec<f64>,
    total_variance: f64,
    dim: usize,
    sample_count: usize,
    centered: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All axes as a row-major `len × dim` buffer.
    pub fn axes(&self) -> &[f64] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    /// Fraction of the total captured by the first `k` values.
    pub fn explained_ratio(&self, k: usize) -> f64 {
        let head: f64 = self.values[..k.min(self.len())].iter().sum();
        head / self.total_variance
    }
}

/// Streaming accumulator for the upper triangle of `Σ (x - s)(x - s)ᵀ`.
pub struct SecondMoment {
    dim: usize,
    upper: Vec<f64>,
    count: usize,
    shift: Option<Vec<f64>>,
}

impl SecondMoment {
    pub fn new(dim: usize) -> Self {
        Self { dim, upper: vec![0.0; dim * dim], count: 0, shift: None }
    }

    /// Accumulates about `shift` (usually the column mean) instead of the origin.
    pub fn centered_at(dim: usize, shift: Vec<f64>) -> Self {
        assert_eq!(shift.len(), dim);
        Self { shift: Some(shift), ..Self::new(dim) }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, chunk: &EmbeddingMatrix) -> Result<()> {
        let d = self.dim;
        if chunk.dim() != d {
            return Err(Error::Dim { expected: d, actual: chunk.dim() });
        }
        let wide = widen(chunk, self.shift.as_deref());
        let rows = chunk.count();
        parallel::for_each_chunk_mut(&mut self.upper, MOMENT_BLOCK * d, |block, out| {
            let first = block * MOMENT_BLOCK;
            for r in 0..rows {
                let x = &wide[r * d..(r + 1) * d];
                for (local, out_row) in out.chunks_exact_mut(d).enumerate() {
                    let i = first + local;
                    let xi = x[i];
                    for (o, xj) in out_row[i..].iter_mut().zip(&x[i..]) {
                        *o += xi * xj;
                    }
                }
            }
        });
        self.count += rows;
        Ok(())
    }

    /// Decomposes the accumulated moment matrix divided by the row count.
    pub fn finish(self) -> Result<Spectrum> {
        let d = self.dim;
        let m = self.count;
        if m < 2 {
            return Err(Error::Data(format!("need at least 2 samples, got {m}")));
        }
        let mut full = self.upper;
        let scale = 1.0 / m as f64;
        for i in 0..d {
            for j in i..d {
                let v = full[i * d + j] * scale;
                full[i * d + j] = v;
                full[j * d + i] = v;
            }
        }
        let (values, mut axes) = linalg::symmetric_eigen(full, d);
        for axis in axes.chunks_exact_mut(d) {
            canonical_sign(axis);
        }
        let values = clamp_values(values)?;
        Ok(assemble(axes, values, d, m, self.shift.is_some()))
    }
}

fn widen(chunk: &EmbeddingMatrix, shift: Option<&[f64]>) -> Vec<f64> {
    let d = chunk.dim();
    let mut wide: Vec<f64> = chunk.as_slice().iter().map(|&x| x as f64).collect();
    if let Some(s) = shift {
        for row in wide.chunks_exact_mut(d) {
            row.iter_mut().zip(s).for_each(|(x, m)| *x -= m);
        }
    }
    wide
}

fn clamp_values(mut values: Vec<f64>) -> Result<Vec<f64>> {
    let scale = values.first().copied().unwrap_or(0.0).abs();
    for v in &mut values {
        if !v.is_finite() {
            return Err(Error::Data("non-finite principal value".into()));
        }
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE * scale {
                return Err(Error::Data(format!("negative principal value {v:e}")));
            }
            *v = 0.0;
        }
    }
    Ok(values)
}

fn assemble(axes: Vec<f64>, values: Vec<f64>, dim: usize, m: usize, centered: bool) -> Spectrum {
    let total_variance = values.iter().sum();
    Spectrum { axes, values, total_variance, dim, sample_count: m, centered }
}

/// Column means accumulated in row order.
pub fn column_means(data: &EmbeddingMatrix) -> Vec<f64> {
    let mut sum = vec![0.0; data.dim()];
    for row in data.rows() {
        sum.iter_mut().zip(row).for_each(|(s, &x)| *s += x as f64);
    }
    let m = data.count() as f64;
    sum.iter_mut().for_each(|s| *s /= m);
    sum
}

/// Full PCA spectrum of `data`: `min(m, d)` axes and values.
pub fn compute_spectrum(data: &EmbeddingMatrix, center: bool) -> Result<Spectrum> {
    let (m, d) = (data.count(), data.dim());
    if m < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {m}")));
    }
    let shift = center.then(|| column_means(data));
    if d <= m {
        let mut acc = match shift {
            Some(s) => SecondMoment::centered_at(d, s),
            None => SecondMoment::new(d),
        };
        acc.push(data)?;
        acc.finish()
    } else {
        gram_spectrum(data, shift.as_deref())
    }
}

/// `m < d` route: decompose `X Xᵀ / m` and map eigenvectors back to axes.
fn gram_spectrum(data: &EmbeddingMatrix, shift: Option<&[f64]>) -> Result<Spectrum> {
    let (m, d) = (data.count(), data.dim());
    let wide = widen(data, shift);
    let mut gram = vec![0.0; m * m];
    parallel::for_each_chunk_mut(&mut gram, m, |a, out| {
        let xa = &wide[a * d..(a + 1) * d];
        for (b, g) in out.iter_mut().enumerate().skip(a) {
            *g = dot(xa, &wide[b * d..(b + 1) * d]);
        }
    });
    let inv_m = 1.0 / m as f64;
    for a in 0..m {
        for b in a..m {
            let v = gram[a * m + b] * inv_m;
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    let (values, left) = linalg::symmetric_eigen(gram, m);
    let values = clamp_values(values)?;
    let cutoff = values[0] * 1e-12;

    let supported = values.iter().take_while(|&&v| v > cutoff && v > 0.0).count();
    let mut axes = vec![0.0; supported * d];
    parallel::for_each_chunk_mut(&mut axes, d, |i, axis| {
        let u = &left[i * m..(i + 1) * m];
        for (a, &ua) in u.iter().enumerate() {
            linalg::axpy(ua, &wide[a * d..(a + 1) * d], axis);
        }
    });
    let mut axes = orthonormalize_rows(&axes, supported, d)?;
    complete_basis(&mut axes, supported, m, d);
    for axis in axes.chunks_exact_mut(d) {
        canonical_sign(axis);
    }
    Ok(assemble(axes, values, d, m, shift.is_some()))
}

/// Extends `have` orthonormal rows to `want` rows with Gram-Schmidt over the
/// standard basis, in index order.
fn complete_basis(axes: &mut Vec<f64>, have: usize, want: usize, dim: usize) {
    let mut count = have;
    let mut candidate = 0;
    while count < want && candidate < dim {
        let mut v = vec![0.0; dim];
        v[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for prev in axes.chunks_exact(dim) {
                let c = dot(prev, &v);
                linalg::axpy(-c, prev, &mut v);
            }
        }
        let n = linalg::norm(&v);
        if n > 1e-3 {
            axes.extend(v.iter().map(|x| x / n));
            count += 1;
        }
    }
}

/// Global orthonormal reduction of the ambient embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSpace {
    basis: Vec<f32>,
    frame: Vec<f64>,
    ambient_dim: usize,
    reduced_dim: usize,
    captured_variance_ratio: f64,
    retained_values: Vec<f64>,
    total_variance: f64,
    sample_count: usize,
    created_from: Vec<SourceRef>,
}

impl ReducedSpace {
    /// Keeps the top `target_dim` axes of an uncentered spectrum.
    pub fn from_spectrum(spectrum: &Spectrum, target_dim: usize) -> Result<Self> {
        let limit = spectrum.len().min(spectrum.sample_count());
        if target_dim == 0 || target_dim >= limit || target_dim >= spectrum.dim() {
            return Err(Error::Config(format!(
                "target_dim {target_dim} must satisfy 1 <= target_dim < min(m, d) = {}",
                limit.min(spectrum.dim())
            )));
        }
        let d = spectrum.dim();
        let basis: Vec<f32> = spectrum.axes()[..target_dim * d].iter().map(|&x| x as f32).collect();
        let retained = spectrum.values()[..target_dim].to_vec();
        let ratio = spectrum.explained_ratio(target_dim);
        Self::from_parts(basis, target_dim, d, ratio, retained, spectrum.total_variance(), spectrum.sample_count())
    }

    /// Reassembles a reducer from stored parts, re-validating the basis.
    pub fn from_parts(
        basis: Vec<f32>,
        reduced_dim: usize,
        ambient_dim: usize,
        captured_variance_ratio: f64,
        retained_values: Vec<f64>,
        total_variance: f64,
        sample_count: usize,
    ) -> Result<Self> {
        if reduced_dim == 0 || reduced_dim >= ambient_dim {
            return Err(Error::Integrity(format!("reduced dim {reduced_dim} must be in 1..{ambient_dim}")));
        }
        if basis.len() != reduced_dim * ambient_dim {
            return Err(Error::Integrity("reducer basis has the wrong shape".into()));
        }
        let frame = validated_frame(&basis, reduced_dim, ambient_dim)?;
        Ok(Self {
            basis,
            frame,
            ambient_dim,
            reduced_dim,
            captured_variance_ratio,
            retained_values,
            total_variance,
            sample_count,
            created_from: Vec::new(),
        })
    }

    pub fn with_created_from(mut self, sources: Vec<SourceRef>) -> Self {
        self.created_from = sources;
        self
    }

    pub fn created_from(&self) -> &[SourceRef] {
        &self.created_from
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn captured_variance_ratio(&self) -> f64 {
        self.captured_variance_ratio
    }

    /// Stored basis rows (`reduced_dim × ambient_dim`).
    pub fn basis(&self) -> &[f32] {
        &self.basis
    }

    pub fn retained_values(&self) -> &[f64] {
        &self.retained_values
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Coordinates of `input` in the reduced basis.
    pub fn reduce(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.ambient_dim {
            return Err(Error::Dim { expected: self.ambient_dim, actual: input.len() });
        }
        Ok(self.frame.chunks_exact(self.ambient_dim).map(|b| dot(b, input)).collect())
    }

    /// Maps reduced coordinates back to the ambient space.
    pub fn lift(&self, coords: &[f64]) -> Result<EmbeddingVector> {
        if coords.len() != self.reduced_dim {
            return Err(Error::Dim { expected: self.reduced_dim, actual: coords.len() });
        }
        let mut out = vec![0.0; self.ambient_dim];
        for (c, b) in coords.iter().zip(self.frame.chunks_exact(self.ambient_dim)) {
            linalg::axpy(*c, b, &mut out);
        }
        Ok(EmbeddingVector::from_vec_unchecked(out))
    }

    pub fn reduce_matrix(&self, data: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if data.dim() != self.ambient_dim {
            return Err(Error::Dim { expected: self.ambient_dim, actual: data.dim() });
        }
        let r = self.reduced_dim;
        let mut out = vec![0.0f32; data.count() * r];
        parallel::for_each_chunk_mut(&mut out, r, |i, row| {
            let x: Vec<f64> = data.row(i).iter().map(|&v| v as f64).collect();
            for (o, b) in row.iter_mut().zip(self.frame.chunks_exact(self.ambient_dim)) {
                *o = dot(b, &x) as f32;
            }
        });
        EmbeddingMatrix::new(data.count(), r, out)
    }

    pub fn lift_matrix(&self, data: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if data.dim() != self.reduced_dim {
            return Err(Error::Dim { expected: self.reduced_dim, actual: data.dim() });
        }
        let d = self.ambient_dim;
        let mut out = vec![0.0f32; data.count() * d];
        parallel::for_each_chunk_mut(&mut out, d, |i, row| {
            let mut acc = vec![0.0f64; d];
            for (&c, b) in data.row(i).iter().zip(self.frame.chunks_exact(d)) {
                linalg::axpy(c as f64, b, &mut acc);
            }
            row.iter_mut().zip(&acc).for_each(|(o, a)| *o = *a as f32);
        });
        EmbeddingMatrix::new(data.count(), d, out)
    }
}

/// Checks stored `f32` rows are orthonormal within `1e-5`, then returns an
/// `f64` re-orthonormalized copy used for arithmetic.
pub(crate) fn validated_frame(basis: &[f32], k: usize, dim: usize) -> Result<Vec<f64>> {
    let dev = linalg::gram_deviation(basis, k, dim);
    if dev.is_nan() || dev > 1e-5 {
        return Err(Error::Integrity(format!("basis rows deviate from orthonormal by {dev:e} (limit 1e-5)")));
    }
    let wide: Vec<f64> = basis.iter().map(|&x| x as f64).collect();
    orthonormalize_rows(&wide, k, dim)
}

/// Uncentered PCA reducer keeping the top `target_dim` axes.
pub fn build_reducer(data: &EmbeddingMatrix, target_dim: usize) -> Result<ReducedSpace> {
    let limit = data.count().min(data.dim());
    if target_dim == 0 || target_dim >= limit {
        return Err(Error::Config(format!(
            "target_dim {target_dim} must satisfy 1 <= target_dim < min(m, d) = {limit}"
        )));
    }
    let spectrum = compute_spectrum(data, false)?;
    ReducedSpace::from_spectrum(&spectrum, target_dim)
}
