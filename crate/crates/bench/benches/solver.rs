use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use krgs::experiment::{load_experiment_data, ExperimentConfig, ExperimentData};
use krgs::kernels::{kernel_matrix, KernelSpec};
use krgs::regression::{assemble_dual_system, solve_weighted, IrlsWeights};
use krgs::{fit_krgs, Hyperparams, Matrix, TrainingSet};

const SIZES: [usize; 2] = [35, 46];

fn data() -> ExperimentData {
    load_experiment_data(&ExperimentConfig::default()).expect("synthetic data")
}

fn gram(data: &ExperimentData, n: usize) -> Matrix {
    kernel_matrix(&KernelSpec::gaussian(20.0).unwrap(), &data.train_inputs[..n]).unwrap()
}

fn assembly(c: &mut Criterion) {
    let data = data();
    let l = data.graph.laplacian();
    let mut group = c.benchmark_group("assemble_dual_system");
    for n in SIZES {
        let k = gram(&data, n);
        let w = IrlsWeights::identity(n, l.nrows());
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| assemble_dual_system(&k, l, &w, 0.1, 0.01).unwrap())
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let data = data();
    let l = data.graph.laplacian();
    let mut group = c.benchmark_group("solve_weighted");
    group.sample_size(10);
    for n in SIZES {
        let k = gram(&data, n);
        let t = data.train_targets.rows(0, n).into_owned();
        let w = IrlsWeights::identity(n, l.nrows());
        group.bench_with_input(BenchmarkId::new("beta=0.01", n), &n, |b, _| {
            b.iter(|| solve_weighted(&k, l, &t, &w, 0.1, 0.01).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("beta=0", n), &n, |b, _| {
            b.iter(|| solve_weighted(&k, l, &t, &w, 0.1, 0.0).unwrap())
        });
    }
    group.finish();
}

fn irls(c: &mut Criterion) {
    let data = data();
    let n = 46;
    let train = TrainingSet::new(
        data.train_inputs[..n].to_vec(),
        data.train_targets.rows(0, n).into_owned(),
        data.graph.clone(),
    )
    .unwrap();
    let kernel = KernelSpec::gaussian(20.0).unwrap();
    let hyper = Hyperparams::new(0.1, 0.01).with_max_iter(10).with_tol(0.0);
    let mut group = c.benchmark_group("fit_krgs");
    group.sample_size(10);
    group.bench_function("N=46,i_max=10", |b| b.iter(|| fit_krgs(&train, &kernel, &hyper).unwrap()));
    group.finish();
}

criterion_group!(benches, assembly, solve, irls);
criterion_main!(benches);
