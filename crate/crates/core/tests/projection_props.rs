mod support;

use editioner::subspace::{OffsetUnits, OrthogonalPolicy};
use editioner::{build_subspace, ConceptSpec, ConceptSubspace, EmbeddingVector, ProjectionMode, TemplateSlot};
use proptest::prelude::*;
use support::*;

fn concept() -> ConceptSpec {
    ConceptSpec::new(TemplateSlot::Subject, "dog")
}

/// Subspace fitted to `n` noisy samples from a random `rank`-dim frame in R^dim.
fn fitted(seed: u64, rank: usize, dim: usize, noise: f64) -> (ConceptSubspace, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let frame = random_frame(&mut r, rank, dim);
    let rows: Vec<Vec<f64>> = (0..(20 * rank).max(60))
        .map(|_| {
            let mut v = combine(&frame, &gaussian(&mut r, rank));
            v.iter_mut().zip(gaussian(&mut r, dim)).for_each(|(x, g)| *x += noise * g);
            v
        })
        .collect();
    (build_subspace(&matrix(&rows), concept(), 0.95).unwrap(), frame)
}

fn vector(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}

fn in_span_residual(s: &ConceptSubspace, v: &[f64]) -> f64 {
    let mut resid = v.to_vec();
    for i in 0..s.k() {
        let a = s.axis(i);
        let c = dot(a, v);
        resid.iter_mut().zip(a).for_each(|(x, y)| *x -= c * y);
    }
    norm(&resid)
}

#[test]
fn recovers_the_generating_frame() {
    for (noise, tol) in [(0.0, 1e-6), (1e-3, 1e-2)] {
        let (s, frame) = fitted(4, 3, 24, noise);
        assert_eq!(s.k(), 3, "noise {noise}");
        let basis: Vec<Vec<f64>> = (0..3).map(|i| s.axis(i).to_vec()).collect();
        let angle = max_principal_angle(&basis, &frame);
        assert!(angle < tol, "noise {noise}: angle {angle:e}");
    }
}

#[test]
fn compensated_projection_matches_a_dense_projector() {
    let (s, _) = fitted(12, 4, 16, 1e-2);
    let d = s.working_dim();
    // dense d x d projector built from the stored f32 basis
    let rows: Vec<Vec<f64>> = s.basis().chunks(d).map(|c| c.iter().map(|&x| x as f64).collect()).collect();
    let q = gram_schmidt(&rows);
    let mut proj = vec![vec![0.0; d]; d];
    for a in &q {
        for i in 0..d {
            for j in 0..d {
                proj[i][j] += a[i] * a[j];
            }
        }
    }
    let mut r = rng(99);
    for _ in 0..200 {
        let x = gaussian(&mut r, d);
        let px: Vec<f64> = proj.iter().map(|row| dot(row, &x)).collect();
        let out = s.project(&vector(x.clone()), ProjectionMode::Compensated).unwrap();
        assert!((out.vector.norm() - norm(&x)).abs() <= 1e-6 * norm(&x));
        let (u, w) = (scale_to(out.vector.as_slice(), 1.0), scale_to(&px, 1.0));
        assert!(u.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9));
        let naive = s.project(&vector(x.clone()), ProjectionMode::Naive).unwrap();
        assert!(naive.vector.as_slice().iter().zip(&px).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

/// Orthonormalizes rows by classical Gram-Schmidt, independent of the crate.
fn gram_schmidt(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for _ in 0..2 {
            for f in &out {
                let c = dot(f, &v);
                v.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
            }
        }
        out.push(scale_to(&v, 1.0));
    }
    out
}

#[test]
fn batch_equals_stacked_single_projections() {
    let (s, _) = fitted(21, 3, 12, 1e-2);
    let mut r = rng(5);
    let rows = gaussian_rows(&mut r, 50, 12);
    let data = matrix(&rows);
    for mode in [ProjectionMode::Compensated, ProjectionMode::Naive] {
        let batch = s.project_batch(&data, mode, OrthogonalPolicy::Zero).unwrap();
        for i in 0..data.count() {
            let single = s.project(&data.row_vector(i), mode).unwrap();
            let as_f32: Vec<f32> = single.vector.as_slice().iter().map(|&x| x as f32).collect();
            assert_eq!(batch.matrix.row(i), as_f32.as_slice());
            assert_eq!(batch.rows[i].eta, Some(single.eta));
        }
    }
}

#[test]
fn in_subspace_batch_is_the_identity() {
    let (s, _) = fitted(3, 3, 10, 0.0);
    let mut r = rng(1);
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            let c = gaussian(&mut r, s.k());
            let axes: Vec<Vec<f64>> = (0..s.k()).map(|i| s.axis(i).to_vec()).collect();
            combine(&axes, &c)
        })
        .collect();
    let data = matrix(&rows);
    let out = s.project_batch(&data, ProjectionMode::Compensated, OrthogonalPolicy::Zero).unwrap();
    for (a, b) in out.matrix.as_slice().iter().zip(data.as_slice()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
    }
}

#[test]
fn interpolants_stay_in_the_subspace() {
    let (s, _) = fitted(8, 4, 20, 1e-2);
    let mut r = rng(2);
    let a = vector(gaussian(&mut r, 20));
    let b = vector(gaussian(&mut r, 20));
    let path = s.interpolate(&a, &b, 9).unwrap();
    assert_eq!(path.len(), 9);
    for v in &path {
        assert!(in_span_residual(&s, v.as_slice()) < 1e-6 * v.norm());
    }
    assert_eq!(path[0], s.project(&a, ProjectionMode::Compensated).unwrap().vector);
    assert_eq!(path[8], s.project(&b, ProjectionMode::Compensated).unwrap().vector);
}

#[test]
fn symmetric_traversal_moves_equal_distances() {
    let (s, _) = fitted(6, 3, 15, 1e-2);
    let mut r = rng(4);
    let x = vector(gaussian(&mut r, 15));
    let base = s.project(&x, ProjectionMode::Compensated).unwrap().vector;
    for i in 0..s.k() {
        let sigma = s.component_std(i);
        let out = s.traverse(&x, i, &[-1.0, 1.0], OffsetUnits::StdDev).unwrap();
        let dist = |v: &EmbeddingVector| {
            norm(&v.as_slice().iter().zip(base.as_slice()).map(|(a, b)| a - b).collect::<Vec<_>>())
        };
        assert!((dist(&out[0]) - sigma).abs() < 1e-9 * sigma.max(1.0));
        assert!((dist(&out[1]) - sigma).abs() < 1e-9 * sigma.max(1.0));
        let mid: Vec<f64> = out[0].as_slice().iter().zip(out[1].as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
        assert!(mid.iter().zip(base.as_slice()).all(|(a, b)| (a - b).abs() < 1e-9 * norm(base.as_slice())));
        for v in &out {
            assert!(in_span_residual(&s, v.as_slice()) < 1e-6 * v.norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compensation_preserves_norm_and_is_idempotent(seed in any::<u64>(), rank in 1usize..6) {
        let (s, _) = fitted(seed, rank, 14, 1e-2);
        let mut r = rng(seed ^ 0xabc);
        let x = vector(gaussian(&mut r, 14));
        let p = s.project(&x, ProjectionMode::Compensated).unwrap();
        prop_assert!((p.vector.norm() - x.norm()).abs() <= 1e-6 * x.norm());
        prop_assert!((p.eta * p.raw_norm_ratio - 1.0).abs() < 1e-12);
        let q = s.project(&p.vector, ProjectionMode::Compensated).unwrap();
        prop_assert!((q.eta - 1.0).abs() <= 1e-9);
        for (a, b) in p.vector.as_slice().iter().zip(q.vector.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-6 * x.norm());
        }
    }

    #[test]
    fn naive_projection_contracts(seed in any::<u64>(), rank in 1usize..6) {
        let (s, _) = fitted(seed, rank, 14, 1e-2);
        let mut r = rng(seed ^ 0x5eed);
        let x = vector(gaussian(&mut r, 14));
        let p = s.project(&x, ProjectionMode::Naive).unwrap();
        prop_assert!(p.vector.norm() < x.norm());
        prop_assert!(p.eta > 1.0);
    }

    #[test]
    fn naive_projection_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (s, _) = fitted(seed, 3, 10, 1e-2);
        let mut r = rng(seed ^ 0x11);
        let x = gaussian(&mut r, 10);
        let y = gaussian(&mut r, 10);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assume!(norm(&z) > 1e-3);
        let px = s.project(&vector(x), ProjectionMode::Naive).unwrap().vector;
        let py = s.project(&vector(y), ProjectionMode::Naive).unwrap().vector;
        let pz = s.project(&vector(z), ProjectionMode::Naive).unwrap().vector;
        for i in 0..10 {
            let combo = alpha * px.as_slice()[i] + beta * py.as_slice()[i];
            prop_assert!((pz.as_slice()[i] - combo).abs() <= 1e-6);
        }
    }
}
