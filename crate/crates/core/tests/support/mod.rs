//! Test-only oracles and synthetic data, shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use editioner::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Singular value decomposition `A = U Σ Vᵀ` by one-sided Jacobi rotations,
/// written independently of the crate's eigen-solver route.
pub struct SvdOracle {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, one per row, matching `singular_values`.
    pub right_vectors: Vec<Vec<f64>>,
}

impl SvdOracle {
    #[allow(clippy::needless_range_loop)]
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let d = rows[0].len();
        // columns of A
        let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..m).map(|i| rows[i][j]).collect()).collect();
        let mut v: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _sweep in 0..100 {
            let mut rotated = false;
            for p in 0..d {
                for q in p + 1..d {
                    let alpha = dot(&cols[p], &cols[p]);
                    let beta = dot(&cols[q], &cols[q]);
                    let gamma = dot(&cols[p], &cols[q]);
                    if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let (x, y) = (cols[p][i], cols[q][i]);
                        cols[p][i] = c * x - s * y;
                        cols[q][i] = s * x + c * y;
                    }
                    for i in 0..d {
                        let (x, y) = (v[p][i], v[q][i]);
                        v[p][i] = c * x - s * y;
                        v[q][i] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        let sv: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        Self {
            singular_values: order.iter().map(|&j| sv[j]).collect(),
            right_vectors: order.iter().map(|&j| v[j].clone()).collect(),
        }
    }

    /// Eigenvalues of `AᵀA / m`.
    pub fn moment_values(&self, m: usize) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s / m as f64).collect()
    }
}

/// Sine of the angle between two unit vectors, sign-insensitive.
pub fn axis_angle(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b).abs().min(1.0);
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - c.copysign(dot(a, b)) * y).collect();
    norm(&resid).asin()
}

/// `k` random orthonormal vectors in R^dim.
pub fn random_frame(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v = gaussian(rng, dim);
        for _ in 0..2 {
            for f in &frame {
                let c = dot(f, &v);
                v.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            frame.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    frame
}

pub fn combine(frame: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; frame[0].len()];
    for (f, c) in frame.iter().zip(coeffs) {
        out.iter_mut().zip(f).for_each(|(o, x)| *o += c * x);
    }
    out
}

pub fn scale_to(v: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x * radius / n).collect()
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| gaussian(rng, d)).collect()
}

/// Rows widened from the `f32` matrix, so oracles see exactly the stored data.
pub fn widened(m: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    m.rows().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows).unwrap()
}

/// Flattens a list of rows.
pub fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// Largest principal angle between the spans of two orthonormal row sets,
/// from the singular values of `A Bᵀ` via the Jacobi oracle.
pub fn max_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    // residual of each row of `small` outside span(large); its singular values are the sines
    let resid: Vec<Vec<f64>> = small
        .iter()
        .map(|row| {
            let mut r = row.clone();
            for _ in 0..2 {
                for basis in large {
                    let c = dot(basis, &r);
                    r.iter_mut().zip(basis).for_each(|(x, y)| *x -= c * y);
                }
            }
            r
        })
        .collect();
    let svd = SvdOracle::new(&transpose(&resid));
    svd.singular_values[0].min(1.0).asin()
}

pub fn transpose(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Concept cluster on a norm shell: a mean direction plus Gaussian variation
/// along `spread_dirs`, plus isotropic noise, each point rescaled to a radius
/// drawn around `radius` with the given relative spread.
pub struct ShellCluster {
    pub mean_dir: Vec<f64>,
    pub spread_dirs: Vec<Vec<f64>>,
    pub spread: f64,
    pub noise: f64,
    pub radius: f64,
    pub radial_spread: f64,
}

impl ShellCluster {
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        let dim = self.mean_dir.len();
        (0..n)
            .map(|_| {
                let c: Vec<f64> = gaussian(rng, self.spread_dirs.len()).iter().map(|g| g * self.spread).collect();
                let mut v = combine(&self.spread_dirs, &c);
                v.iter_mut().zip(&self.mean_dir).for_each(|(x, m)| *x += m);
                v.iter_mut().zip(gaussian(rng, dim)).for_each(|(x, g)| *x += self.noise * g);
                let r: f64 = self.radius * (1.0 + self.radial_spread * rng.sample::<f64, _>(StandardNormal));
                scale_to(&v, r)
            })
            .collect()
    }
}
