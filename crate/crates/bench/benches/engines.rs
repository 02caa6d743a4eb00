use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use macont_bench::{bernoulli, gaussian, markov, tree_corpus};
use macont_core::affinity::{self, Engine};
use macont_core::decide::{self, DecideConfig};
use macont_core::exact_tree;
use macont_core::montecarlo;
use macont_core::{AtomBudget, Measure, Prefix};

fn m_engines(c: &mut Criterion) {
    let m = markov(4);
    let mut group = c.benchmark_group("m_1k_markov");
    for k in [4usize, 8, 12] {
        group.bench_with_input(BenchmarkId::new("tree_dp", k), &k, |b, &k| {
            b.iter(|| affinity::m_nk_with(&m, Engine::TreeDp, &Prefix::empty(), 1, black_box(k)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("markov_power", k), &k, |b, &k| {
            b.iter(|| affinity::m_nk_with(&m, Engine::MarkovPower, &Prefix::empty(), 1, black_box(k)).unwrap())
        });
    }
    group.finish();

    let g = gaussian(1.0);
    c.bench_function("m_1k_gaussian_closed_form_10000", |b| {
        b.iter(|| affinity::m_nk(&g, &Prefix::empty(), 1, black_box(10_000)).unwrap())
    });
}

fn exact_enumeration(c: &mut Criterion) {
    let corpus = tree_corpus(20);
    c.bench_function("cylinders_corpus_20", |b| {
        b.iter(|| {
            for m in &corpus {
                let depth = m.horizon().unwrap();
                black_box(exact_tree::enumerate_cylinders(m, depth, AtomBudget::default()).unwrap());
            }
        })
    });
    let bern = bernoulli();
    c.bench_function("witness_bernoulli_exact_8", |b| {
        b.iter(|| decide::witness_set(&bern, black_box(8), AtomBudget::default()).unwrap())
    });
}

fn verdicts(c: &mut Criterion) {
    let config = DecideConfig {
        k_max: 10_000,
        ..DecideConfig::default()
    };
    let g = gaussian(0.75);
    c.bench_function("decide_gaussian_kmax_10000", |b| {
        b.iter(|| decide::decide_equivalence(&g, &config).unwrap())
    });
    let m = markov(3);
    c.bench_function("decide_markov3_kmax_1000", |b| {
        b.iter(|| decide::decide_equivalence(&m, &DecideConfig::default()).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let m = markov(3);
    c.bench_function("sample_markov3_1000x100", |b| {
        b.iter(|| montecarlo::sample_paths(&m, Measure::P, 100, 1000, black_box(7)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = m_engines, exact_enumeration, verdicts, sampling
}
criterion_main!(benches);
