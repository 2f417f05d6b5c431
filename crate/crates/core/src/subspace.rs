//! Concept subspaces and projection into them.
//!
//! A subspace keeps the top `k` uncentered principal axes of a concept
//! dataset, with `k` the smallest rank reaching the explained-variance
//! threshold. Projection is orthogonal onto that span; the compensated mode
//! rescales the result back to the input's norm so projected embeddings stay
//! on the same shell around the origin as real ones.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::parallel;
use crate::prompts::ConceptSpec;
use crate::spectral::{compute_spectrum, validated_frame, Spectrum};
use crate::store::{EmbeddingMatrix, EmbeddingVector, SourceRef};

pub const DEFAULT_EVR_THRESHOLD: f64 = 0.95;

/// Projected-to-input norm ratio below which an input counts as orthogonal.
pub const ORTHOGONAL_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Orthogonal projection rescaled to the input norm.
    Compensated,
    /// Plain orthogonal projection.
    Naive,
}

impl std::str::FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compensated" => Ok(Self::Compensated),
            "naive" => Ok(Self::Naive),
            _ => Err(Error::Config(format!("unknown projection mode '{s}'"))),
        }
    }
}

/// Smallest `k` whose leading values reach `threshold` of the total.
pub fn select_k(values: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} is outside (0, 1]")));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data("principal values must be finite and nonnegative".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Data("all principal values are zero".into()));
    }
    let mut cumulative = 0.0;
    for (i, v) in values.iter().enumerate() {
        cumulative += v;
        if cumulative / total >= threshold {
            return Ok(i + 1);
        }
    }
    Ok(values.len())
}

/// A truncated PCA basis for one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSubspace {
    basis: Vec<f32>,
    frame: Vec<f64>,
    k: usize,
    working_dim: usize,
    retained_values: Vec<f64>,
    total_variance: f64,
    evr_threshold: f64,
    concept: ConceptSpec,
    sample_count: usize,
    provenance: Provenance,
}

/// Where a subspace's training data came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub created_from: Vec<SourceRef>,
    /// Ambient dimension when the basis lives in a reduced space.
    pub ambient_dim: Option<usize>,
    pub reducer_digest: Option<String>,
}

impl ConceptSubspace {
    /// Truncates `spectrum` at the rank chosen by `threshold`.
    pub fn from_spectrum(spectrum: &Spectrum, concept: ConceptSpec, threshold: f64) -> Result<Self> {
        let k = select_k(spectrum.values(), threshold)?;
        let d = spectrum.dim();
        if k >= d {
            return Err(Error::Degenerate { k });
        }
        let basis = spectrum.axes()[..k * d].iter().map(|&x| x as f32).collect();
        Self::from_parts(
            basis,
            k,
            d,
            spectrum.values()[..k].to_vec(),
            spectrum.total_variance(),
            threshold,
            concept,
            spectrum.sample_count(),
        )
    }

    /// Reassembles a subspace from stored parts, re-checking orthonormality
    /// and that `k` is the rank the threshold selects.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        basis: Vec<f32>,
        k: usize,
        working_dim: usize,
        retained_values: Vec<f64>,
        total_variance: f64,
        evr_threshold: f64,
        concept: ConceptSpec,
        sample_count: usize,
    ) -> Result<Self> {
        if k == 0 || k >= working_dim {
            return Err(Error::Integrity(format!("rank {k} must be in 1..{working_dim}")));
        }
        if basis.len() != k * working_dim || retained_values.len() != k {
            return Err(Error::Integrity("subspace parts have inconsistent shapes".into()));
        }
        if !(evr_threshold > 0.0 && evr_threshold <= 1.0) {
            return Err(Error::Integrity(format!("threshold {evr_threshold} is outside (0, 1]")));
        }
        let mut cumulative = 0.0;
        for (i, v) in retained_values.iter().enumerate() {
            cumulative += v;
            let reached = cumulative / total_variance >= evr_threshold;
            if reached != (i + 1 == k) {
                return Err(Error::Integrity(format!("k = {k} is not the smallest rank reaching {evr_threshold}")));
            }
        }
        let frame = validated_frame(&basis, k, working_dim)?;
        Ok(Self {
            basis,
            frame,
            k,
            working_dim,
            retained_values,
            total_variance,
            evr_threshold,
            concept,
            sample_count,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn working_dim(&self) -> usize {
        self.working_dim
    }

    /// Stored basis rows (`k × working_dim`).
    pub fn basis(&self) -> &[f32] {
        &self.basis
    }

    /// Orthonormal `f64` axis `i` used in all arithmetic.
    pub fn axis(&self, i: usize) -> &[f64] {
        &self.frame[i * self.working_dim..(i + 1) * self.working_dim]
    }

    pub fn retained_values(&self) -> &[f64] {
        &self.retained_values
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_ratio(&self) -> f64 {
        self.retained_values.iter().sum::<f64>() / self.total_variance
    }

    pub fn evr_threshold(&self) -> f64 {
        self.evr_threshold
    }

    pub fn concept(&self) -> &ConceptSpec {
        &self.concept
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.working_dim {
            return Err(Error::Dim { expected: self.working_dim, actual: len });
        }
        Ok(())
    }

    /// `BᵀB x` for the orthonormal frame `B`.
    fn orthogonal_projection(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.working_dim];
        for axis in self.frame.chunks_exact(self.working_dim) {
            linalg::axpy(dot(axis, x), axis, &mut out);
        }
        out
    }

    pub fn project(&self, input: &EmbeddingVector, mode: ProjectionMode) -> Result<ProjectionResult> {
        self.project_slice(input.as_slice(), mode)
    }

    fn project_slice(&self, x: &[f64], mode: ProjectionMode) -> Result<ProjectionResult> {
        self.check_dim(x.len())?;
        let in_norm = linalg::norm(x);
        if in_norm == 0.0 {
            return Err(Error::Data("cannot project a zero vector".into()));
        }
        let mut v = self.orthogonal_projection(x);
        let ratio = linalg::norm(&v) / in_norm;
        if ratio.is_nan() || ratio < ORTHOGONAL_RATIO {
            return Err(Error::OrthogonalInput { ratio });
        }
        let eta = 1.0 / ratio;
        if mode == ProjectionMode::Compensated {
            v.iter_mut().for_each(|c| *c *= eta);
        }
        Ok(ProjectionResult { vector: EmbeddingVector::from_vec_unchecked(v), eta, raw_norm_ratio: ratio })
    }

    /// Projects every row; rows orthogonal to the subspace are zeroed or
    /// dropped according to `policy` and listed in the report.
    pub fn project_batch(
        &self,
        data: &EmbeddingMatrix,
        mode: ProjectionMode,
        policy: OrthogonalPolicy,
    ) -> Result<BatchProjection> {
        self.check_dim(data.dim())?;
        let outcomes = parallel::map_indices(data.count(), |i| {
            let x: Vec<f64> = data.row(i).iter().map(|&v| v as f64).collect();
            self.project_slice(&x, mode)
        });

        let d = self.working_dim;
        let mut out = Vec::with_capacity(data.count() * d);
        let mut rows = Vec::with_capacity(data.count());
        let mut orthogonal_rows = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(p) => {
                    out.extend(p.vector.as_slice().iter().map(|&x| x as f32));
                    rows.push(RowEta { row: i, eta: Some(p.eta), raw_norm_ratio: p.raw_norm_ratio });
                }
                Err(Error::OrthogonalInput { ratio }) => {
                    orthogonal_rows.push(i);
                    rows.push(RowEta { row: i, eta: None, raw_norm_ratio: ratio });
                    if policy == OrthogonalPolicy::Zero {
                        out.extend(std::iter::repeat_n(0.0f32, d));
                    }
                }
                Err(Error::Data(msg)) => return Err(Error::Data(format!("row {i}: {msg}"))),
                Err(e) => return Err(e),
            }
        }
        let count = out.len() / d;
        if count == 0 {
            return Err(Error::Data("every row is orthogonal to the subspace".into()));
        }
        let matrix = EmbeddingMatrix::new(count, d, out)?;
        let summary = EtaSummary::from_rows(&rows);
        Ok(BatchProjection { matrix, rows, orthogonal_rows, summary })
    }

    /// Straight-line path between the compensated projections of `a` and `b`.
    pub fn interpolate(&self, a: &EmbeddingVector, b: &EmbeddingVector, steps: usize) -> Result<Vec<EmbeddingVector>> {
        if steps < 2 {
            return Err(Error::Config(format!("interpolation needs at least 2 steps, got {steps}")));
        }
        let pa = self.project(a, ProjectionMode::Compensated)?.vector;
        let pb = self.project(b, ProjectionMode::Compensated)?.vector;
        let last = (steps - 1) as f64;
        Ok((0..steps)
            .map(|i| {
                let t = i as f64 / last;
                let v = pa.as_slice().iter().zip(pb.as_slice()).map(|(x, y)| (1.0 - t) * x + t * y).collect();
                EmbeddingVector::from_vec_unchecked(v)
            })
            .collect())
    }

    /// Moves the compensated projection of `input` along principal axis
    /// `component` by each offset. Results are not re-normalized.
    pub fn traverse(
        &self,
        input: &EmbeddingVector,
        component: usize,
        offsets: &[f64],
        units: OffsetUnits,
    ) -> Result<Vec<EmbeddingVector>> {
        if component >= self.k {
            return Err(Error::Config(format!("component {component} is out of range for k = {}", self.k)));
        }
        let base = self.project(input, ProjectionMode::Compensated)?.vector;
        let scale = match units {
            OffsetUnits::Raw => 1.0,
            OffsetUnits::StdDev => self.component_std(component),
        };
        let axis = self.axis(component);
        Ok(offsets
            .iter()
            .map(|&o| {
                let mut v = base.as_slice().to_vec();
                linalg::axpy(o * scale, axis, &mut v);
                EmbeddingVector::from_vec_unchecked(v)
            })
            .collect())
    }

    /// Root-mean-square spread of the concept data along axis `i`.
    pub fn component_std(&self, i: usize) -> f64 {
        self.retained_values[i].sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetUnits {
    Raw,
    /// Multiples of the data's spread along the chosen axis.
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthogonalPolicy {
    Zero,
    Exclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub vector: EmbeddingVector,
    /// `‖input‖ / ‖naive projection‖`; applied only in compensated mode.
    pub eta: f64,
    /// `‖naive projection‖ / ‖input‖`
    pub raw_norm_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowEta {
    pub row: usize,
    /// `None` when the row was orthogonal to the subspace.
    pub eta: Option<f64>,
    pub raw_norm_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSummary {
    pub projected: usize,
    pub orthogonal: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl EtaSummary {
    fn from_rows(rows: &[RowEta]) -> Self {
        let etas: Vec<f64> = rows.iter().filter_map(|r| r.eta).collect();
        let n = etas.len() as f64;
        let mean = etas.iter().sum::<f64>() / n;
        let var = etas.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        Self {
            projected: etas.len(),
            orthogonal: rows.len() - etas.len(),
            mean,
            std: var.sqrt(),
            min: etas.iter().copied().fold(f64::INFINITY, f64::min),
            max: etas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchProjection {
    pub matrix: EmbeddingMatrix,
    /// One entry per input row, in input order.
    pub rows: Vec<RowEta>,
    pub orthogonal_rows: Vec<usize>,
    pub summary: EtaSummary,
}

/// Uncentered PCA of a concept dataset truncated at `threshold`.
pub fn build_subspace(data: &EmbeddingMatrix, concept: ConceptSpec, threshold: f64) -> Result<ConceptSubspace> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} is outside (0, 1]")));
    }
    let spectrum = compute_spectrum(data, false)?;
    ConceptSubspace::from_spectrum(&spectrum, concept, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::TemplateSlot;

    fn cat() -> ConceptSpec {
        ConceptSpec::new(TemplateSlot::Subject, "cat")
    }

    /// Rows spanning the first two coordinate axes of R^4.
    fn plane_subspace() -> ConceptSubspace {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                vec![3.0 * t.cos(), t.sin(), 0.0, 0.0]
            })
            .collect();
        build_subspace(&EmbeddingMatrix::from_rows(&rows).unwrap(), cat(), 0.95).unwrap()
    }

    #[test]
    fn select_k_examples() {
        let mut one = vec![0.0; 10];
        one[0] = 1.0;
        assert_eq!(select_k(&one, 0.95).unwrap(), 1);
        let v = [10.0, 5.0, 2.0, 1.0, 0.5, 0.5, 0.5, 0.5];
        // cumulative: 10, 15, 17, 18, 18.5, 19, ... of 20; 19/20 reaches 0.95 at k = 6
        assert_eq!(select_k(&v, 0.95).unwrap(), 6);
        assert_eq!(select_k(&v, 1.0).unwrap(), 8);
        assert!(matches!(select_k(&[0.0, 0.0], 0.95), Err(Error::Data(_))));
        assert!(matches!(select_k(&v, 0.0), Err(Error::Config(_))));
        assert!(matches!(select_k(&v, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn full_rank_at_threshold_one_is_degenerate() {
        let rows: Vec<Vec<f64>> =
            (0..10).map(|i| (0..3).map(|j| (((i * 3 + j) * (j + 1)) as f64).cos()).collect()).collect();
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        assert!(matches!(build_subspace(&data, cat(), 1.0), Err(Error::Degenerate { k: 3 })));
    }

    #[test]
    fn in_span_input_is_a_fixed_point() {
        let s = plane_subspace();
        assert_eq!(s.k(), 2);
        let x = EmbeddingVector::new(vec![1.5, -2.0, 0.0, 0.0]).unwrap();
        for mode in [ProjectionMode::Compensated, ProjectionMode::Naive] {
            let p = s.project(&x, mode).unwrap();
            assert!((p.eta - 1.0).abs() < 1e-9);
            for (a, b) in p.vector.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_and_zero_inputs_are_rejected() {
        let s = plane_subspace();
        let ortho = EmbeddingVector::new(vec![0.0, 0.0, 1.0, -1.0]).unwrap();
        assert!(matches!(s.project(&ortho, ProjectionMode::Compensated), Err(Error::OrthogonalInput { .. })));
        let zero = EmbeddingVector::zeros(4);
        assert!(matches!(s.project(&zero, ProjectionMode::Naive), Err(Error::Data(_))));
        let short = EmbeddingVector::new(vec![1.0]).unwrap();
        assert!(matches!(s.project(&short, ProjectionMode::Naive), Err(Error::Dim { expected: 4, actual: 1 })));
    }

    #[test]
    fn naive_mode_reports_but_does_not_apply_eta() {
        let s = plane_subspace();
        let x = EmbeddingVector::new(vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        let naive = s.project(&x, ProjectionMode::Naive).unwrap();
        assert!((naive.raw_norm_ratio - 0.6).abs() < 1e-12);
        assert!((naive.eta - 1.0 / 0.6).abs() < 1e-12);
        assert!((naive.vector.norm() - 3.0).abs() < 1e-12);
        let comp = s.project(&x, ProjectionMode::Compensated).unwrap();
        assert!((comp.vector.norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn batch_policies() {
        let s = plane_subspace();
        let data =
            EmbeddingMatrix::from_rows(&[[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0], [0.0, 1.0, 1.0, 0.0]]).unwrap();
        let zeroed = s.project_batch(&data, ProjectionMode::Compensated, OrthogonalPolicy::Zero).unwrap();
        assert_eq!(zeroed.matrix.count(), 3);
        assert_eq!(zeroed.orthogonal_rows, vec![1]);
        assert!(zeroed.matrix.row(1).iter().all(|&x| x == 0.0));
        assert_eq!(zeroed.summary.projected, 2);
        let dropped = s.project_batch(&data, ProjectionMode::Compensated, OrthogonalPolicy::Exclude).unwrap();
        assert_eq!(dropped.matrix.count(), 2);
        assert_eq!(dropped.matrix.row(1), zeroed.matrix.row(2));
    }

    #[test]
    fn interpolation_endpoints_and_step_count() {
        let s = plane_subspace();
        let a = EmbeddingVector::new(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let b = EmbeddingVector::new(vec![0.0, 2.0, 0.0, 1.0]).unwrap();
        let path = s.interpolate(&a, &b, 2).unwrap();
        assert_eq!(path[0], s.project(&a, ProjectionMode::Compensated).unwrap().vector);
        assert_eq!(path[1], s.project(&b, ProjectionMode::Compensated).unwrap().vector);
        let same = s.interpolate(&a, &a, 5).unwrap();
        assert!(same.iter().all(|v| v == &same[0]));
        assert!(matches!(s.interpolate(&a, &b, 1), Err(Error::Config(_))));
    }

    #[test]
    fn traversal_offsets() {
        let s = plane_subspace();
        let x = EmbeddingVector::new(vec![1.0, 1.0, 0.5, 0.0]).unwrap();
        let base = s.project(&x, ProjectionMode::Compensated).unwrap().vector;
        let out = s.traverse(&x, 0, &[0.0, -2.0, 2.0], OffsetUnits::Raw).unwrap();
        assert_eq!(out[0], base);
        let dist = |v: &EmbeddingVector| {
            v.as_slice().iter().zip(base.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        assert!((dist(&out[1]) - 2.0).abs() < 1e-12);
        assert!((dist(&out[2]) - 2.0).abs() < 1e-12);
        let sd = s.traverse(&x, 1, &[1.0], OffsetUnits::StdDev).unwrap();
        assert!((dist(&sd[0]) - s.component_std(1)).abs() < 1e-12);
        assert!(matches!(s.traverse(&x, 2, &[1.0], OffsetUnits::Raw), Err(Error::Config(_))));
    }

    #[test]
    fn stored_parts_must_match_the_threshold_rule() {
        let s = plane_subspace();
        let rebuilt = ConceptSubspace::from_parts(
            s.basis().to_vec(),
            s.k(),
            s.working_dim(),
            s.retained_values().to_vec(),
            s.total_variance(),
            s.evr_threshold(),
            s.concept().clone(),
            s.sample_count(),
        )
        .unwrap();
        assert_eq!(rebuilt, s);
        let wrong = ConceptSubspace::from_parts(
            s.basis().to_vec(),
            s.k(),
            s.working_dim(),
            s.retained_values().to_vec(),
            s.total_variance(),
            0.5,
            s.concept().clone(),
            s.sample_count(),
        );
        assert!(matches!(wrong, Err(Error::Integrity(_))));
    }
}
