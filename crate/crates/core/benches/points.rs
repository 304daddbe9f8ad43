use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spraylab::catalog::MetricSpec;
use spraylab::jet::{Jet, JetSpace};
use spraylab::measures::{bh_ln_sigma, VolumeForm};
use spraylab::par::Execution;
use spraylab::verify::{identity_suite, SuiteOptions};

fn modes() -> [(&'static str, Execution); 2] {
    [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)]
}

fn suite(c: &mut Criterion) {
    let mut g = c.benchmark_group("identity_suite/randers3");
    g.sample_size(10);
    let spec = MetricSpec::generic_randers(3);
    for (name, exec) in modes() {
        let opts = SuiteOptions { points: 16, seed: 1, exec, ..SuiteOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, o| {
            b.iter(|| identity_suite(&spec, &VolumeForm::Coordinate, o).unwrap())
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("bh_ln_sigma/randers3");
    g.sample_size(10);
    let metric = MetricSpec::generic_randers(3).build().unwrap().metric().unwrap();
    let space = JetSpace::new(3).unwrap();
    let x: Vec<Jet> = [0.1, -0.2, 0.15]
        .iter()
        .enumerate()
        .map(|(i, &v)| space.seed(i, v, 4).unwrap())
        .collect();
    for (name, exec) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| bh_ln_sigma(metric.as_ref(), &x, 64, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, suite, quadrature);
criterion_main!(benches);
