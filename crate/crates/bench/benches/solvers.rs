use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdtn_bench::{domain, wave};
use pdtn_core::{dtn_apply, ntd_apply, solve_dirichlet, solve_neumann, DomainKind, SolverConfig};

const CASES: [(DomainKind, usize, &str); 2] = [
    (DomainKind::Grid, 9, "grid-9"),
    (DomainKind::Snowflake, 2, "snowflake-2"),
];
const EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];

fn dirichlet(c: &mut Criterion) {
    let mut group = c.benchmark_group("dirichlet");
    for (kind, size, name) in CASES {
        let graph = domain(kind, size);
        let f = wave(&graph);
        for p in EXPONENTS {
            let cfg = SolverConfig::new(p);
            group.bench_with_input(BenchmarkId::new(name, p), &p, |b, _| {
                b.iter(|| solve_dirichlet(&f, &graph, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn neumann(c: &mut Criterion) {
    let mut group = c.benchmark_group("neumann");
    for (kind, size, name) in CASES {
        let graph = domain(kind, size);
        let f = wave(&graph);
        for p in EXPONENTS {
            let cfg = SolverConfig::new(p);
            let l = dtn_apply(&f, &graph, &cfg).unwrap();
            group.bench_with_input(BenchmarkId::new(name, p), &p, |b, _| {
                b.iter(|| solve_neumann(&l, &graph, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn round_trip(c: &mut Criterion) {
    let mut group = c.benchmark_group("ntd_after_dtn");
    group.sample_size(20);
    for (kind, size, name) in CASES {
        let graph = domain(kind, size);
        let f = wave(&graph);
        let cfg = SolverConfig::new(3.0);
        group.bench_function(name, |b| {
            b.iter(|| ntd_apply(&dtn_apply(&f, &graph, &cfg).unwrap(), &graph, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dirichlet, neumann, round_trip);
criterion_main!(benches);
