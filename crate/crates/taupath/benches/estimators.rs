//! Benchmarks for the simulation kernels and the estimator fan-out.
//!
//! The `fan_out` group compares one-worker and multi-worker runs of the
//! same estimation, which is the headline trade-off of the data-parallel
//! sample loop (identical results either way; see the determinism tests).
//! Run with `cargo bench -p taupath`; add `--no-default-features` to time
//! the sequential fallback build instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use taupath::estimate::{estimate, EstimateOptions, Method};
use taupath::exact::simulate_ssa;
use taupath::model::{ParameterSet, ReactionNetwork};
use taupath::rng::RngStream;
use taupath::tauleap::simulate_tauleap;

fn load_model(name: &str) -> ReactionNetwork {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    ReactionNetwork::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn kernels(c: &mut Criterion) {
    let bd = load_model("birth_death.model");
    let params = ParameterSet::from_network(&bd);
    let mut group = c.benchmark_group("kernels");

    let mut stream = RngStream::new(1);
    group.bench_function("ssa_birth_death_T10", |b| {
        b.iter(|| {
            simulate_ssa(&bd, &params, bd.init.clone(), 0.0, 10.0, &mut stream).unwrap()
        })
    });

    let mut stream = RngStream::new(2);
    group.bench_function("tauleap_birth_death_T10_tau0.5", |b| {
        b.iter(|| {
            simulate_tauleap(&bd, &params, bd.init.clone(), 0.0, 10.0, 0.5, &mut stream).unwrap()
        })
    });

    let rep = load_model("repressilator.model");
    let rparams = ParameterSet::from_network(&rep);
    let mut stream = RngStream::new(3);
    group.sample_size(20);
    group.bench_function("ssa_repressilator_T10", |b| {
        b.iter(|| {
            simulate_ssa(&rep, &rparams, rep.init.clone(), 0.0, 10.0, &mut stream).unwrap()
        })
    });
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut stream = RngStream::new(7);
    let mut group = c.benchmark_group("rng");
    for mean in [0.5, 8.0, 200.0] {
        group.bench_with_input(BenchmarkId::new("poisson", mean), &mean, |b, &m| {
            b.iter(|| stream.poisson(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let bd = load_model("birth_death.model");
    let n = 2000u64;
    let mut group = c.benchmark_group("estimators");
    group.sample_size(10);
    group.throughput(Throughput::Elements(n));
    for method in Method::ALL {
        group.bench_function(method.name(), |b| {
            b.iter(|| {
                let mut opts = EstimateOptions::new(method, "theta2", 5.0, n);
                if method.uses_tau_leap() {
                    opts.tau_max = Some(0.5);
                }
                estimate(&bd, &opts).unwrap()
            })
        });
    }
    group.finish();
}

fn fan_out(c: &mut Criterion) {
    let bd = load_model("birth_death.model");
    let n = 5000u64;
    let mut group = c.benchmark_group("fan_out");
    group.sample_size(10);
    group.throughput(Throughput::Elements(n));
    let worker_counts: &[Option<usize>] = &[Some(1), Some(2), Some(4), None];
    for &workers in worker_counts {
        let label = match workers {
            Some(w) => format!("workers_{w}"),
            None => "workers_default".into(),
        };
        group.bench_function(BenchmarkId::new("tauipa_birth_death", label), |b| {
            b.iter(|| {
                let mut opts = EstimateOptions::new(Method::TauIpa, "theta2", 5.0, n);
                opts.tau_max = Some(0.5);
                opts.workers = workers;
                estimate(&bd, &opts).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernels, sampling, estimators, fan_out);
criterion_main!(benches);
