//! Parallel versus sequential execution of sweep cells and influence grids.
//! Without the `parallel` feature both variants run on one thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gdpmeans::dataio::Dataset;
use gdpmeans::experiment::{run_sweep, FKind, SweepConfig};
use gdpmeans::influence::{influence_curve_1d, linspace};
use gdpmeans::{Divergence, Execution, FSpec, Generator, Matrix};

fn dataset(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 3;
        let c = [(-6.0, 0.0), (6.0, 0.0), (0.0, 8.0)][k];
        values.push(c.0 + rng.random_range(-2.0..2.0));
        values.push(c.1 + rng.random_range(-2.0..2.0));
        labels.push(k);
    }
    Dataset::labeled(Matrix::new(2, values).unwrap(), labels)
}

fn modes() -> [(&'static str, Execution); 2] {
    [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)]
}

fn sweep_cells(c: &mut Criterion) {
    let ds = dataset(300);
    let mut group = c.benchmark_group("sweep_cells");
    group.sample_size(10);
    for (name, exec) in modes() {
        let mut cfg = SweepConfig::new(vec![0.5, 1.0, 2.0], FKind::PowerMean, Divergence::squared_distance());
        cfg.n_shuffles = 16;
        cfg.lambda_decay = 1.1;
        cfg.execution = exec;
        group.bench_function(BenchmarkId::new(name, "3beta_16shuffles"), |b| {
            b.iter(|| run_sweep(&ds, &cfg, |_| Ok(())).unwrap())
        });
    }
    group.finish();
}

fn influence_grids(c: &mut Criterion) {
    let mut group = c.benchmark_group("influence_curve");
    let div = Divergence::bregman(Generator::Alpha(1.0)).total(1.0);
    let f = FSpec::power_mean(0.25, 1.0);
    for points in [1_000usize, 100_000] {
        let grid = linspace(1e-3, 1e3, points);
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, points), &grid, |b, grid| {
                b.iter(|| influence_curve_1d(&f, &div, 10.0, grid, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweep_cells, influence_grids);
criterion_main!(benches);
