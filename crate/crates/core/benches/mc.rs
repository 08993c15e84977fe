use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sphex_core::arrangement::{Arrangement, Chamber};
use sphex_core::mc::Rng;
use sphex_core::volume::chamber_volume_mc;

fn tetrahedron() -> Arrangement {
    let s = 1.5f64;
    let c = vec![
        vec![0.0, 0.0, 0.0],
        vec![s, 0.0, 0.0],
        vec![s / 2.0, s * 3f64.sqrt() / 2.0, 0.0],
        vec![s / 2.0, s * 3f64.sqrt() / 6.0, s * (2.0f64 / 3.0).sqrt()],
    ];
    Arrangement::from_centers_radii(c, vec![1.2; 4]).unwrap()
}

fn bench(c: &mut Criterion) {
    let a = tetrahedron();
    let ch = Chamber::all_inside(4);
    let mut g = c.benchmark_group("chamber_volume_mc");
    g.sample_size(10);
    for samples in [100_000u64, 1_000_000] {
        g.bench_with_input(BenchmarkId::new("parallel", samples), &samples, |b, &n| {
            b.iter(|| chamber_volume_mc(&a, &ch, n, &Rng::new(0)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sequential", samples), &samples, |b, &n| {
            b.iter(|| chamber_volume_mc(&a, &ch, n, &Rng::new(0).sequential()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
