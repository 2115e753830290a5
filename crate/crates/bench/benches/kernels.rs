use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fedrul::fed::{fed_avg, serialize_params};
use fedrul::nn::{forward_backward, init_params, Architecture, Mode, Regularization};
use fedrul::preprocess::median_filter;
use fedrul::rng::{gauss, seeded};
use fedrul::Tensor;

fn median(c: &mut Criterion) {
    let mut rng = seeded(1);
    let signal: Vec<f64> = (0..362).map(|_| gauss(&mut rng)).collect();
    for k in [3, 9, 25] {
        c.bench_function(&format!("median_filter/362/k{k}"), |b| {
            b.iter(|| median_filter(black_box(&signal), k).unwrap())
        });
    }
}

fn lstm(c: &mut Criterion) {
    let arch = Architecture::new(45);
    let params = init_params(&arch, &Regularization::default(), 2).unwrap();
    let mut rng = seeded(3);
    let (batch, steps) = (32, 8);
    let inputs = Tensor::from_vec(
        &[batch, steps, 45],
        (0..batch * steps * 45).map(|_| gauss(&mut rng)).collect(),
    )
    .unwrap();
    let targets: Vec<f64> = (0..batch).map(|i| i as f64).collect();
    c.bench_function("forward_backward/4x64/b32/l8", |b| {
        b.iter_batched(
            || seeded(4),
            |mut r| forward_backward(&inputs, &targets, &params, Mode::Train, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn federation(c: &mut Criterion) {
    let arch = Architecture::new(45);
    let models: Vec<_> = (0..4)
        .map(|s| init_params(&arch, &Regularization::default(), s).unwrap())
        .collect();
    let weights = [100.0, 260.0, 100.0, 248.0];
    c.bench_function("fed_avg/4_clients/4x64", |b| {
        b.iter(|| fed_avg(black_box(&models), &weights).unwrap())
    });
    c.bench_function("serialize/4x64", |b| {
        b.iter(|| serialize_params(black_box(&models[0])).unwrap())
    });
}

criterion_group!(benches, median, lstm, federation);
criterion_main!(benches);
