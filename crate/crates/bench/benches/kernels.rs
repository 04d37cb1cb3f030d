use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use herzsq_core::atoms::random_atom;
use herzsq_core::herz::herz_norm;
use herzsq_core::intrinsic::{a_beta, ABetaCache, ConeQuadrature, TestClassGrid};
use herzsq_core::{AtomParams, Generator, GridFunction, HerzParams, PowerWeight};

fn atom(h: f64, extent: f64) -> GridFunction {
    let w = PowerWeight::lebesgue(1);
    let p = AtomParams { alpha: 0.5, q: 2.0, radius: 1.0, w1: w, w2: w, restricted: false, s: 0 };
    random_atom(5, p, Generator::DoubleBump, h, extent).unwrap().f
}

fn lp(c: &mut Criterion) {
    let f = atom(1.0 / 16.0, 16.0);
    for beta in [1.0, 0.5] {
        let tc = TestClassGrid::default_for(1, beta).unwrap();
        c.bench_function(&format!("a_beta/beta={beta}"), |b| {
            b.iter(|| a_beta(black_box(&f), &[0.03125], 0.75, &tc).unwrap())
        });
    }
}

fn cache(c: &mut Criterion) {
    let f = atom(1.0 / 8.0, 16.0);
    let tc = TestClassGrid::default_for(1, 1.0).unwrap();
    let mut g = c.benchmark_group("cache");
    g.sample_size(10);
    g.bench_function("fill_all", |b| {
        b.iter_batched(
            || ABetaCache::new(&f, &tc, ConeQuadrature::for_grid(&f)).unwrap(),
            |mut cache| cache.fill_all().unwrap(),
            BatchSize::LargeInput,
        )
    });
    let mut full = ABetaCache::new(&f, &tc, ConeQuadrature::for_grid(&f)).unwrap();
    full.fill_all().unwrap();
    full.freeze();
    g.bench_function("s_beta", |b| b.iter(|| full.s_beta(black_box(&[1.0625])).unwrap()));
    g.bench_function("g_star", |b| b.iter(|| full.g_star(black_box(&[1.0625]), 5.0).unwrap()));
    g.finish();
}

fn herz(c: &mut Criterion) {
    let w = PowerWeight::new(-0.5, 1).unwrap();
    let f = GridFunction::from_fn(1, 1.0 / 16.0, 1024.0, |x| 1.0 / (1.0 + x[0].abs()).powi(2)).unwrap();
    let p = HerzParams { alpha: 0.5, p: 1.0, q: 2.0, w1: w, w2: w, k_min: -4, k_max: 10, homogeneous: true };
    c.bench_function("herz_norm/32k_nodes", |b| b.iter(|| herz_norm(black_box(&f), &p, None).unwrap()));
}

criterion_group!(benches, lp, cache, herz);
criterion_main!(benches);
