use std::hint::black_box;

use bitrack::engine::{step, ReplicaState};
use bitrack::{prepare, preset, reduce, solve_lyapunov};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn engine_step(c: &mut Criterion) {
    for name in ["paper-crs", "paper-brs"] {
        let p = prepare(&preset(name).unwrap()).unwrap();
        c.bench_function(&format!("step/{name}"), |b| {
            b.iter_batched_ref(
                || ReplicaState::new(&p.experiment, 0).unwrap(),
                |s| {
                    for _ in 0..100 {
                        step(s, &p.experiment, None).unwrap();
                    }
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn spectral(c: &mut Criterion) {
    let p = prepare(&preset("paper-crs").unwrap()).unwrap();
    let lap = p.experiment.topology.laplacian();
    c.bench_function("reduce", |b| b.iter(|| reduce(black_box(&lap)).unwrap()));
    let sr = reduce(&lap).unwrap();
    c.bench_function("lyapunov", |b| b.iter(|| solve_lyapunov(black_box(&sr.l_tilde), 1.0).unwrap()));
}

criterion_group!(benches, engine_step, spectral);
criterion_main!(benches);
