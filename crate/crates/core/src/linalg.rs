//! Small dense helpers over row-major `f64` buffers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes `k` rows of length `dim` by modified Gram-Schmidt, run
/// twice per row so the result is orthonormal to working precision even when
/// the input is only approximately so.
pub fn orthonormalize_rows(rows: &[f64], k: usize, dim: usize) -> Result<Vec<f64>> {
    assert_eq!(rows.len(), k * dim);
    let mut out = rows.to_vec();
    for i in 0..k {
        let (done, rest) = out.split_at_mut(i * dim);
        let row = &mut rest[..dim];
        let start = norm(row);
        for _ in 0..2 {
            for prev in done.chunks_exact(dim) {
                let c = dot(prev, row);
                axpy(-c, prev, row);
            }
        }
        let n = norm(row);
        if n.is_nan() || n <= 1e-8 * start || n == 0.0 {
            return Err(Error::Integrity(format!("row {i} is linearly dependent on the rows before it")));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Largest entry-wise deviation of `B Bᵀ` from the identity, computed in `f64`.
pub fn gram_deviation<T: Copy + Into<f64>>(rows: &[T], k: usize, dim: usize) -> f64 {
    let wide: Vec<f64> = rows.iter().map(|&x| x.into()).collect();
    let mut worst = 0.0f64;
    for i in 0..k {
        let ri = &wide[i * dim..(i + 1) * dim];
        for j in i..k {
            let g = dot(ri, &wide[j * dim..(j + 1) * dim]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// Eigen-decomposition of a symmetric `n × n` row-major matrix.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as rows. Equal eigenvalues keep the order the solver produced them in.
pub fn symmetric_eigen(matrix: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let m = DMatrix::from_row_slice(n, n, &matrix);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: ties stay in solver column order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend(eig.eigenvectors.column(i).iter().copied());
    }
    (values, vectors)
}

/// Flips `axis` so that its entry of largest magnitude (first one on ties) is positive.
pub fn canonical_sign(axis: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in axis.iter().enumerate() {
        if x.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis.get(best).is_some_and(|x| *x < 0.0) {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Principal angles (radians, ascending) between the spans of two sets of
/// orthonormal rows. Computed from the sines, which stay accurate for the
/// small angles that matter when comparing nearly equal subspaces.
pub fn principal_angles(a: &[f64], ka: usize, b: &[f64], kb: usize, dim: usize) -> Vec<f64> {
    let (small, ks, large, kl) = if ka <= kb { (a, ka, b, kb) } else { (b, kb, a, ka) };
    // residual of each row of the smaller set after projecting onto the larger span
    let mut resid = small.to_vec();
    for row in resid.chunks_exact_mut(dim) {
        for _ in 0..2 {
            for basis in large[..kl * dim].chunks_exact(dim) {
                let c = dot(basis, row);
                axpy(-c, basis, row);
            }
        }
    }
    let mut gram = vec![0.0; ks * ks];
    for i in 0..ks {
        for j in 0..ks {
            gram[i * ks + j] = dot(&resid[i * dim..(i + 1) * dim], &resid[j * dim..(j + 1) * dim]);
        }
    }
    let (sin2, _) = symmetric_eigen(gram, ks);
    let mut angles: Vec<f64> = sin2.iter().map(|s| s.max(0.0).sqrt().min(1.0).asin()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}
