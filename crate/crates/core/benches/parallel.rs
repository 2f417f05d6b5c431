//! Sequential vs parallel timings for the hot paths. "sequential" runs inside a
//! one-thread pool; build with `--no-default-features` for the rayon-free path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use editioner::spectral::{build_reducer, compute_spectrum};
use editioner::subspace::OrthogonalPolicy;
use editioner::{build_subspace, ConceptSpec, EmbeddingMatrix, ProjectionMode, TemplateSlot};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(seed: u64, rows: usize, cols: usize) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f32>>();
    EmbeddingMatrix::new(rows, cols, data).expect("finite data")
}

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let all = rayon::ThreadPoolBuilder::new().build().expect("pool");
    [("sequential", one), ("parallel", all)]
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_spectrum");
    group.sample_size(10);
    for &(m, d) in &[(4096, 256), (256, 2048)] {
        let data = gaussian_matrix(1, m, d);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, format!("{m}x{d}")), &data, |b, data| {
                b.iter(|| pool.install(|| compute_spectrum(black_box(data), false).expect("spectrum")))
            });
        }
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("project_batch");
    let concept = gaussian_matrix(2, 2000, 512);
    let subspace = build_subspace(&concept, ConceptSpec::new(TemplateSlot::Subject, "cat"), 0.5).expect("subspace");
    let inputs = gaussian_matrix(3, 8000, 512);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, format!("k{}", subspace.k())), |b| {
            b.iter(|| {
                pool.install(|| {
                    subspace
                        .project_batch(black_box(&inputs), ProjectionMode::Compensated, OrthogonalPolicy::Zero)
                        .expect("projection")
                })
            })
        });
    }
    group.finish();
}

fn reduction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduce_lift");
    let data = gaussian_matrix(4, 8000, 512);
    let reducer = build_reducer(&data, 64).expect("reducer");
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| {
                pool.install(|| {
                    let reduced = reducer.reduce_matrix(black_box(&data)).expect("reduce");
                    reducer.lift_matrix(&reduced).expect("lift")
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spectrum, projection, reduction);
criterion_main!(benches);
