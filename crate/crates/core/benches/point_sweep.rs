//! Parallel vs sequential point sweeps.
//!
//! The suite's inner loops map a pure per-point computation over sampled
//! chart points; with the `parallel` feature (default) the map runs on
//! rayon. These benches compare the two paths on the heaviest per-point
//! kernels. Run with `cargo bench` and, for the sequential-only build,
//! `cargo bench --no-default-features`.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;

use metalgeo::immersion::frame_at;
use metalgeo::induced::{identity_residuals, sigma_structure};
use metalgeo::sampling::{map_items_seq, sample_chart_points, SplitMix64};
use metalgeo::scenario::compile;
use metalgeo::suite::builtin_example1;

#[cfg(feature = "parallel")]
use metalgeo::sampling::map_items;

const POINTS: usize = 512;
const DIRS: usize = 8;

fn induced_kernel(c: &mut Criterion) {
    let scenario = builtin_example1(1, 1);
    let compiled = compile(&scenario).expect("builtin compiles");
    let imm = &compiled.immersion;
    let op = &compiled.operator;
    let params = compiled.params;
    let points = sample_chart_points(imm.chart_box(), POINTS, 42);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();

    let kernel = |(idx, x): &(usize, DVector<f64>)| -> f64 {
        let frame = frame_at(imm, x).expect("interior point");
        let s = sigma_structure(op, &frame).expect("dimensions match");
        let mut rng = SplitMix64::substream(42, *idx as u64);
        let dirs: Vec<DVector<f64>> = (0..DIRS).map(|_| rng.unit_vector(3)).collect();
        identity_residuals(&s, params, &dirs).max()
    };

    let mut group = c.benchmark_group("induced_sweep");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let out = map_items_seq(&indexed, kernel);
            out.iter().fold(0.0f64, |a, r| a.max(*r))
        })
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let out = map_items(&indexed, kernel);
            out.iter().fold(0.0f64, |a, r| a.max(*r))
        })
    });
    group.finish();
}

fn frame_kernel(c: &mut Criterion) {
    let scenario = builtin_example1(1, 1);
    let compiled = compile(&scenario).expect("builtin compiles");
    let imm = &compiled.immersion;
    let points = sample_chart_points(imm.chart_box(), POINTS, 7);

    let kernel = |x: &DVector<f64>| -> f64 {
        let frame = frame_at(imm, x).expect("interior point");
        frame.induced_metric.trace()
    };

    let mut group = c.benchmark_group("frame_sweep");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| map_items_seq(&points, kernel).iter().sum::<f64>())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| map_items(&points, kernel).iter().sum::<f64>())
    });
    group.finish();
}

criterion_group!(benches, induced_kernel, frame_kernel);
criterion_main!(benches);
