use criterion::{criterion_group, criterion_main, Criterion};
use isodrast::ambient::{poly_dictionary, AmbientSpace, HamiltonianFn};
use isodrast::band;
use isodrast::flows::{flow_loop, FlowField};
use isodrast::loops::moser_normalize;
use isodrast::metrics;
use isodrast::pairings::omega_weighted_raw;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn pairing_benches(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dict = poly_dictionary(1);

    for n in [128usize, 256] {
        let lp = band::random_loop(&mut rng, AmbientSpace::new(1), n, 6);
        let w = band::random_positive_weighting(&mut rng, n, 6);
        let xi1 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
        let xi2 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
        c.bench_function(&format!("omega_weighted_n{n}"), |b| {
            b.iter(|| omega_weighted_raw(black_box(&lp), &w, &xi1, &xi2))
        });
    }

    let lp = band::random_loop(&mut rng, AmbientSpace::new(1), 256, 6);
    let w = band::random_positive_weighting(&mut rng, 256, 6);
    c.bench_function("moser_normalize_n256", |b| {
        b.iter(|| moser_normalize(black_box(&lp), &w).unwrap())
    });

    let circle = isodrast::loops::LoopEmbedding::circle(AmbientSpace::new(1), 128);
    let field = FlowField::Hamiltonian(HamiltonianFn::from_expr("H", "(q^2 + p^2)/2", 1).unwrap());
    c.bench_function("flow_loop_harmonic_n128_50steps", |b| {
        b.iter(|| flow_loop(black_box(&circle), &field, 0.1, 50).unwrap())
    });

    let g = metrics::random_metric_field(&mut rng, 4, vec![2, 2, 1, 1], (1, 3));
    let h = metrics::random_momentum_field(&mut rng, &g, 0.8);
    let t1 = metrics::random_metric_tangent(&mut rng, &g, 0.6);
    let t2 = metrics::random_metric_tangent(&mut rng, &g, 0.6);
    c.bench_function("omega_metric_lorentzian_d4", |b| {
        b.iter(|| metrics::omega_metric(black_box(&g), &h, &t1, &t2).unwrap())
    });
}

criterion_group!(benches, pairing_benches);
criterion_main!(benches);
